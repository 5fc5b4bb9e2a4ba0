from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbs_lab.bundle import PolynomialSection, is_on_veronese
from sbs_lab.errors import NothingToCompareError
from sbs_lab.geometry import SU2, SpherePoint, Chart
from sbs_lab.scanner import (
    ModuliRecord,
    ScanSpec,
    compute_record,
    continuity_probe,
    equivariance_check,
    normalize_section,
    run_scan_to_dir,
    scan,
    section_from_zeros,
    veronese_map,
)
from sbs_lab.tracer import trace_fiber

coeff = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


# ----------------------------------------------------------------------------
# sections


def test_normalize_examples():
    assert np.allclose(normalize_section((0, 2j, 0)).coeffs, (0, 1, 0), atol=1e-15)
    assert np.allclose(normalize_section(np.array((-1, 0, 1)) / 3).coeffs, np.array((-1, 0, 1)) / np.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        normalize_section((0, 0, 0))


@given(st.lists(coeff, min_size=3, max_size=3).filter(lambda c: any(abs(x) > 1e-3 for x in c)))
def test_normalize_is_idempotent_projective(c):
    s = normalize_section(c)
    assert np.linalg.norm(s.array) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(normalize_section(s).array, s.array, atol=1e-15)
    assert np.allclose(normalize_section(tuple(np.exp(0.7j) * 3.0 * np.asarray(c))).array, s.array, atol=1e-12)


def test_veronese_examples():
    south, north = SpherePoint(Chart.Z, 0j), SpherePoint.infinity()
    assert np.allclose(veronese_map([south, north]).coeffs, (0, 1, 0), atol=1e-15)
    one, minus = SpherePoint(Chart.Z, 1 + 0j), SpherePoint(Chart.Z, -1 + 0j)
    assert np.allclose(veronese_map([one, minus]).coeffs, np.array((-1, 0, 1)) / np.sqrt(2), atol=1e-15)
    u = SpherePoint(Chart.Z, 0.3 + 0j)
    assert is_on_veronese(veronese_map([u, u]))[0]


@given(st.integers(0, 2**32 - 1))
def test_section_from_zeros_vanishes_there(seed):
    pts = np.random.default_rng(seed).normal(size=(3, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    s = section_from_zeros(pts)
    assert s.degree == 3
    found = s.zeros_xyz_with_multiplicity
    for p in pts:
        assert np.min(np.linalg.norm(found - p, axis=1)) < 1e-7


def test_scan_spec_round_trip_and_validation():
    spec = ScanSpec(kind="random", count=4, seed=3, oracle_starts=2)
    assert ScanSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    with pytest.raises(ValueError):
        ScanSpec(kind="grid")
    keys = [k for k, _ in spec.sections_list()]
    assert keys == ["r00000", "r00001", "r00002", "r00003"]
    assert [s.coeffs for _, s in spec.sections_list()] == [s.coeffs for _, s in spec.sections_list()]


# ----------------------------------------------------------------------------
# records and scans


def test_record_invariants():
    rec = compute_record("s00000", PolynomialSection.from_coeffs((0.2, 1.0, -0.4j)), oracle_starts=3)
    assert rec.error is None
    assert rec.fiber_size == len(rec.cycles) == 1
    assert rec.oracle_fiber_size == 1
    assert rec.method_agreement < 1e-3
    assert rec.discriminant >= 0
    back = ModuliRecord.from_dict(json.loads(json.dumps(rec.to_dict())))
    assert back.to_dict() == rec.to_dict()
    assert "wall_time" not in rec.to_dict()


def test_veronese_records_are_empty():
    report = scan(ScanSpec(kind="veronese", count=3, seed=1, run_oracle=False))
    assert report.histogram == {0: 3}
    assert all(r.in_band for r in report.records)


def test_failing_section_does_not_abort_the_scan(monkeypatch):
    import sbs_lab.scanner as scanner

    calls = {"n": 0}
    real = scanner.compute_record

    def flaky(key, *a, **kw):
        calls["n"] += 1
        if key == "s00000":
            raise RuntimeError("boom")
        return real(key, *a, **kw)

    monkeypatch.setattr(scanner, "compute_record", flaky)
    spec = ScanSpec(kind="sections", sections=((0, 1, 0), (-1, 0, 1)), run_oracle=False)
    report = scan(spec)
    assert calls["n"] == 2
    assert "boom" in report.records[0].error
    assert report.records[1].fiber_size == 1
    assert report.summary()["failures"] == 1


def test_scan_is_deterministic_and_resumable(tmp_path):
    spec = ScanSpec(kind="random", count=3, seed=11, oracle_starts=2)
    a = run_scan_to_dir(spec, tmp_path / "a")
    b = run_scan_to_dir(spec, tmp_path / "b")
    text = (tmp_path / "a" / "records.jsonl").read_bytes()
    assert text == (tmp_path / "b" / "records.jsonl").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    assert a.histogram == b.histogram == {1: 3}

    # interrupt: keep the first record and a torn second line, then resume
    lines = text.decode().splitlines(keepends=True)
    (tmp_path / "b" / "records.jsonl").write_text(lines[0] + lines[1][: len(lines[1]) // 2])
    run_scan_to_dir(spec, tmp_path / "b")
    assert (tmp_path / "b" / "records.jsonl").read_bytes() == text
    timings = json.loads((tmp_path / "b" / "timings.json").read_text())
    assert sorted(timings) == ["r00000", "r00001", "r00002"]


# ----------------------------------------------------------------------------
# probes


def test_probe_moving_zero():
    # z - k h: one zero moves from z = 0 towards z = 0.1, the other stays at infinity
    res = continuity_probe(PolynomialSection.from_coeffs((0, 1, 0)), (-1, 0, 0), steps=10, h=1e-2)
    assert not res.truncated
    assert len(res.distances) == 10
    assert max(res.distances) < 0.1
    assert res.constant < 3


def test_probe_zero_direction():
    res = continuity_probe(PolynomialSection.from_coeffs((0, 1, 0)), (0, 0, 0), steps=3)
    assert not res.truncated
    assert max(res.distances) < 1e-6


def test_probe_into_discriminant_is_truncated():
    res = continuity_probe(PolynomialSection.from_coeffs((-0.01, 0, 1)), (1, 0, 0), steps=3, h=1e-2)
    assert res.truncated


def test_cycle_shrinks_toward_double_zero():
    dist = []
    for eps in (0.5, 0.3, 0.2, 0.1, 0.05, 0.03, 0.02):
        s = PolynomialSection.from_coeffs((-(eps**2), 0, 1))
        certs = trace_fiber(s).certificates
        assert len(certs) == 1
        dist.append(float(np.min(np.linalg.norm(certs[0].loop.xyz - s.zeros_xyz[0], axis=1))))
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 0.05


# ----------------------------------------------------------------------------
# equivariance


def test_equivariance_examples():
    s = PolynomialSection.from_coeffs((0, 1, 0))
    assert equivariance_check(s, SU2.from_rotvec([np.pi / 2, 0, 0])) < 1e-3
    assert equivariance_check(s, SU2.identity()) < 1e-12
    s2 = PolynomialSection.from_coeffs((0, -1, 1))
    assert equivariance_check(s2, SU2.random(np.random.default_rng(17))) < 1e-3


def test_equivariance_needs_a_cycle():
    with pytest.raises(NothingToCompareError, match="nothing to compare"):
        equivariance_check(PolynomialSection.from_coeffs((0, 0, 1)), SU2.identity())
