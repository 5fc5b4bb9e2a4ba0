from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import random_star_curve, sample, solid_angle_left_area, stereo
from sbs_lab.bundle import PolynomialSection, h_norm
from sbs_lab.conventions import SIGMA, SIGMA_W, calibrate_sigma, calibrate_sigma_w
from sbs_lab.errors import NonEmbeddedLoopError, NotBohrSommerfeldError, SectionZeroError
from sbs_lab.geometry import SU2, LoopSample, Region, circle_loop, enclosed_area, from_ambient, great_circle
from sbs_lab.transport import (
    alpha_trace,
    covariant_constant_section,
    is_bohr_sommerfeld,
    parallel_transport,
    plaquette_holonomy,
    plaquette_residual,
    winding_area_check,
    winding_area_report,
)

S_Z = PolynomialSection.from_coeffs([0, 1, 0])
S_ZZ = PolynomialSection.from_coeffs([0, 0, 1])
S_PM = PolynomialSection.from_coeffs([-1, 0, 1])
EQUATOR = circle_loop(1.0, 256)
# the great circle Re z = 0, oriented so that z = 1 lies on its left
IMAG_AXIS = great_circle([1.0, 0.0, 0.0], 256)


def wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


# ----------------------------------------------------------------------------
# calibration constants


def test_sigma_calibration_is_frozen():
    assert calibrate_sigma(2) == SIGMA
    assert calibrate_sigma(3, 3e-2) == SIGMA
    assert calibrate_sigma_w() == SIGMA_W


def test_plaquette_holonomy_sign_and_size():
    hol, area = plaquette_holonomy(2, 0.2 - 0.1j, 1e-2)
    assert abs(abs(hol) - 1) < 1e-12
    assert np.angle(hol) == pytest.approx(SIGMA * 2 * np.pi * area, rel=1e-4)


@pytest.mark.parametrize("degree", [1, 2, 4])
def test_plaquette_residual_decays(degree):
    eps = np.array([1e-1, 3e-2, 1e-2])
    res = np.array([plaquette_residual(degree, 0.5 + 0.5j, e) for e in eps])
    assert res[-1] < 1e-6
    assert np.polyfit(np.log(eps), np.log(res), 1)[0] > 3.0


# ----------------------------------------------------------------------------
# parallel transport


def test_transport_equator():
    res = parallel_transport(2, EQUATOR)
    assert abs(res.holonomy - 1) < 1e-8


def test_transport_circle_radius_two():
    res = parallel_transport(2, circle_loop(2.0, 256))
    assert abs(wrap(res.phase - SIGMA * 2 * np.pi * 1.6)) < 1e-8


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_transport_tiny_loop(degree):
    res = parallel_transport(degree, circle_loop(1e-7, 32, center=0.3))
    assert abs(res.holonomy - 1) < 1e-9


def test_transport_through_chart_overlap():
    # a great circle through both poles needs a chart switch on each half
    loop = great_circle([0.6, 0.8, 0.0], 256)
    res = parallel_transport(3, loop)
    assert abs(wrap(res.phase - SIGMA * 2 * np.pi * 1.5)) < 1e-8
    assert res.norm_drift < 1e-8


def test_holonomy_matches_independent_area_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(8):
        curve = random_star_curve(rng)
        loop = LoopSample(sample(curve, 300))
        area = solid_angle_left_area(sample(curve, 200_000), 2)
        hol = parallel_transport(2, loop).holonomy
        assert abs(hol - np.exp(SIGMA * 2j * np.pi * area)) < 1e-6


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_norm_preservation(seed, degree):
    rng = np.random.default_rng(seed)
    loop = LoopSample(sample(random_star_curve(rng), 200))
    v0 = complex(*rng.normal(size=2))
    res = parallel_transport(degree, loop, v0=v0)
    assert res.norm_drift < 1e-8
    assert abs(abs(res.holonomy) - 1) < 1e-9


@settings(max_examples=8)
@given(st.integers(0, 2**32 - 1))
def test_reversed_loop_conjugates_holonomy(seed):
    # the global RK45 error is about rtol times the step count; at the default
    # 1e-10 the two directions differ by up to 5e-9, so tighten it here
    loop = LoopSample(sample(random_star_curve(np.random.default_rng(seed)), 200))
    a = parallel_transport(2, loop, rtol=1e-13).holonomy
    b = parallel_transport(2, loop.reversed(), rtol=1e-13).holonomy
    assert abs(b - np.conj(a)) < 1e-9


def test_holonomy_is_deterministic():
    loop = LoopSample(sample(random_star_curve(np.random.default_rng(1)), 200))
    assert parallel_transport(2, loop).holonomy == parallel_transport(2, loop).holonomy


def test_transport_result_json_fields():
    res = parallel_transport(2, EQUATOR)
    data = json.loads(json.dumps(res.to_dict()))
    assert list(data) == ["holonomy", "phase_defect", "norm_drift", "sigma_samples"]
    assert -np.pi < res.phase <= np.pi


# ----------------------------------------------------------------------------
# Bohr-Sommerfeld test


def test_bs_examples():
    ok, defect = is_bohr_sommerfeld(2, EQUATOR)
    assert ok and defect < 1e-8
    ok, defect = is_bohr_sommerfeld(2, circle_loop(2.0, 256))
    assert not ok and defect == pytest.approx(2 * np.pi * 0.4, abs=1e-6)
    ok, defect = is_bohr_sommerfeld(4, circle_loop(np.sqrt(3), 256))
    assert ok and defect < 1e-8


def test_bs_rejects_non_embedded():
    t = 2 * np.pi * np.arange(200) / 200
    with pytest.raises(NonEmbeddedLoopError):
        is_bohr_sommerfeld(2, LoopSample.from_z(0.6 * np.sin(2 * t) + 0.9j * np.sin(t)))


@given(st.integers(0, 2**32 - 1))
def test_bs_defect_tracks_area(seed):
    loop = LoopSample(sample(random_star_curve(np.random.default_rng(seed)), 300))
    area = enclosed_area(Region(loop, "left"), 2)
    _, defect = is_bohr_sommerfeld(2, loop)
    assert abs(defect - 2 * np.pi * abs(area - round(area))) < 1e-6


# ----------------------------------------------------------------------------
# flat section and alpha


def test_covariant_constant_section_on_equator():
    sigma = covariant_constant_section(2, EQUATOR)
    pts = EQUATOR.oriented_xyz
    charts, coords = from_ambient(pts)
    norms = np.abs(sigma) * (1 + np.abs(coords) ** 2) ** -1
    assert np.max(np.abs(norms - 1)) < 1e-8
    res = parallel_transport(2, EQUATOR)
    assert abs(res.holonomy - 1) < 1e-8  # closing gap of the flat frame


def test_covariant_constant_section_errors_and_reversal():
    with pytest.raises(NotBohrSommerfeldError, match="no covariantly constant section"):
        covariant_constant_section(2, circle_loop(2.0, 256))
    sigma = covariant_constant_section(2, EQUATOR.reversed())
    assert len(sigma) == EQUATOR.n


def test_alpha_on_the_worked_point():
    trace = alpha_trace(S_Z, EQUATOR)
    assert trace.arg_deviation < 1e-6
    assert trace.winding == 0
    assert np.max(np.abs(np.abs(trace.alpha) - 0.5)) < 1e-8


def test_alpha_on_imaginary_axis():
    trace = alpha_trace(S_PM, IMAG_AXIS)
    assert trace.arg_deviation < 1e-6 and trace.winding == 0


def test_alpha_for_double_zero():
    trace = alpha_trace(S_ZZ, EQUATOR)
    assert abs(trace.winding) == 1
    assert trace.arg_deviation > 1.0


def test_alpha_modulus_is_h_norm():
    rng = np.random.default_rng(9)
    s = PolynomialSection.from_coeffs(rng.normal(size=3) + 1j * rng.normal(size=3))
    loop = circle_loop(1.0, 256, center=0.0)
    trace = alpha_trace(s, loop)
    charts, coords = from_ambient(loop.oriented_xyz)
    ref = [float(h_norm(s, ch, c)) for ch, c in zip(charts, coords)]
    assert np.max(np.abs(np.abs(trace.alpha) - ref)) < 1e-8


def test_alpha_errors():
    with pytest.raises(SectionZeroError, match="section zero on cycle"):
        alpha_trace(PolynomialSection.from_coeffs([-1, 0, 1]), EQUATOR)
    with pytest.raises(NotBohrSommerfeldError):
        alpha_trace(S_Z, circle_loop(2.0, 256))


def test_base_phase_changes_alpha_by_one_constant():
    rng = np.random.default_rng(4)
    s = PolynomialSection.from_coeffs(rng.normal(size=3) + 1j * rng.normal(size=3))
    a = alpha_trace(s, EQUATOR, base_phase=0.0).alpha
    b = alpha_trace(s, EQUATOR, base_phase=1.234).alpha
    ratio = b / a
    assert np.max(np.abs(ratio - ratio[0])) < 1e-9
    assert abs(abs(ratio[0]) - 1) < 1e-12


def test_alpha_trace_json_fields():
    data = alpha_trace(S_Z, EQUATOR).to_dict()
    assert list(data) == ["alpha", "arg_deviation", "winding", "min_modulus"]


# ----------------------------------------------------------------------------
# winding and area


def test_winding_area_examples():
    rep = winding_area_report(S_Z, EQUATOR)
    assert rep["zeros_left"] == 1 and rep["area_left"] == pytest.approx(1.0) and rep["winding"] == 0
    assert rep["residual"] < 1e-6
    rep = winding_area_report(S_ZZ, EQUATOR)
    assert rep["zeros_left"] == 2 and abs(rep["winding"]) == 1 and rep["residual"] < 1e-6
    rep = winding_area_report(S_PM, IMAG_AXIS)
    assert rep["zeros_left"] == 1 and rep["winding"] == 0 and rep["residual"] < 1e-6


@settings(max_examples=12)
@given(st.integers(0, 2**32 - 1))
def test_winding_area_identity_on_bs_circles(seed):
    """Random degree-4 sections on random rotated copies of the equator (area 2)."""
    rng = np.random.default_rng(seed)
    s = PolynomialSection.from_coeffs(rng.normal(size=5) + 1j * rng.normal(size=5))
    loop = SU2.random(rng).apply_loop(EQUATOR)
    try:
        rep = winding_area_report(s, loop, eps_zero=2e-2)
    except SectionZeroError:
        return
    assert rep["residual"] < 1e-6
    assert winding_area_check(s, loop, eps_zero=2e-2) == rep["residual"]
