"""Scans over the projectivized section space and the fibers of the first projection.

Each scanned section becomes a :class:`ModuliRecord` holding the section, its
zeros and discriminant, the tracer's certified cycles and the oracle's
independent estimate.  Reports are deterministic: record keys follow the
order of the scan specification and every record is serialized without
timing information (timings go to a separate sidecar file).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .bundle import PolynomialSection, is_on_veronese
from .conventions import DISCRIMINANT_BAND, Tolerances
from .errors import CertificationError, NothingToCompareError, SBSError
from .geometry import SU2, LoopSample, SpherePoint, ambient_to_w, ambient_to_z, chordal_distance, set_hausdorff
from .oracle import oracle_search
from .tracer import SpecialCycleCertificate, certify_loop, trace_fiber

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# sections


def normalize_section(coeffs: Sequence[complex] | PolynomialSection) -> PolynomialSection:
    """Representative of [s]: unit norm, leading nonzero coefficient positive real."""
    s = coeffs if isinstance(coeffs, PolynomialSection) else PolynomialSection.from_coeffs(coeffs)
    if not np.any(s.array != 0):
        raise ValueError("the zero section has no projective class")
    return s.normalized()


def _linear_factor(p: np.ndarray) -> np.ndarray:
    """Highest-first coefficients of a linear form vanishing at the unit vector ``p``."""
    if p[2] <= 0:  # |z| <= 1
        return np.array([1.0 + 0j, -complex(ambient_to_z(p))])
    return np.array([complex(ambient_to_w(p)), -1.0 + 0j])


def section_from_zeros(points: Iterable[np.ndarray | SpherePoint]) -> PolynomialSection:
    """The normalized section of degree len(points) vanishing exactly at ``points``."""
    poly = np.array([1.0 + 0j])
    n = 0
    for p in points:
        xyz = p.xyz() if isinstance(p, SpherePoint) else np.asarray(p, float)
        poly = np.convolve(poly, _linear_factor(xyz / np.linalg.norm(xyz)))
        n += 1
    return normalize_section(tuple(poly[::-1]))


def veronese_map(pair: Sequence[np.ndarray | SpherePoint]) -> PolynomialSection:
    """Degree-2 section with the given zero pair; an equal pair lands on the conic."""
    return section_from_zeros(pair)


def _uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ----------------------------------------------------------------------------
# scan specifications


@dataclass(frozen=True)
class ScanSpec:
    kind: str = "random"  # random | veronese | sections
    degree: int = 2
    count: int = 100
    seed: int = 0
    min_separation: float = 0.1
    sections: tuple = ()
    oracle_starts: int = 6
    run_oracle: bool = True

    def __post_init__(self):
        if self.kind not in ("random", "veronese", "sections"):
            raise ValueError(f"unknown scan kind {self.kind!r}")
        if self.kind == "veronese" and self.degree != 2:
            raise ValueError("veronese scans are defined for degree 2")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "count": self.count,
            "seed": self.seed,
            "min_separation": self.min_separation,
            "sections": [[[complex(a).real, complex(a).imag] for a in c] for c in self.sections],
            "oracle_starts": self.oracle_starts,
            "run_oracle": self.run_oracle,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScanSpec":
        secs = tuple(
            tuple(complex(*a) if isinstance(a, (list, tuple)) else complex(a) for a in c) for c in data.get("sections", ())
        )
        return cls(
            kind=data.get("kind", "random"),
            degree=int(data.get("degree", 2)),
            count=int(data.get("count", len(secs) or 100)),
            seed=int(data.get("seed", 0)),
            min_separation=float(data.get("min_separation", 0.1)),
            sections=secs,
            oracle_starts=int(data.get("oracle_starts", 6)),
            run_oracle=bool(data.get("run_oracle", True)),
        )

    def sections_list(self) -> list[tuple[str, PolynomialSection]]:
        """(key, section) pairs in scan order."""
        if self.kind == "sections":
            return [(f"s{i:05d}", normalize_section(c)) for i, c in enumerate(self.sections)]
        rng = np.random.default_rng(self.seed)
        out = []
        for i in range(self.count):
            if self.kind == "veronese":
                u = _uniform_sphere(rng, 1)[0]
                out.append((f"v{i:05d}", veronese_map([u, u])))
                continue
            while True:
                pts = _uniform_sphere(rng, self.degree)
                dist = chordal_distance(pts[:, None, :], pts[None, :, :])
                if self.degree < 2 or dist[np.triu_indices(self.degree, 1)].min() > self.min_separation:
                    break
            out.append((f"r{i:05d}", section_from_zeros(pts)))
        return out


# ----------------------------------------------------------------------------
# records


@dataclass(frozen=True, eq=False)
class ModuliRecord:
    key: str
    section: PolynomialSection
    zeros: list  # (SpherePoint, multiplicity)
    discriminant: float
    cycles: list  # SpecialCycleCertificate from the tracer
    fiber_size: int
    oracle_cycles: list = field(default_factory=list)  # certified oracle loops
    oracle_fiber_size: int = 0
    oracle_best_energy: float = float("nan")
    method_agreement: float | None = None
    in_band: bool = False
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)
    # the parsed line a record was loaded from; chart coordinates do not survive
    # a trip through R^3 bit for bit, so resumed records re-emit it verbatim
    source: dict | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        """Deterministic serialization; ``wall_time`` is deliberately left out."""
        if self.source is not None:
            return json.loads(json.dumps(self.source))
        return {
            "key": self.key,
            "section": self.section.to_dict(),
            "zeros": [{"chart": p.chart.value, "re": p.coord.real, "im": p.coord.imag, "multiplicity": int(m)} for p, m in self.zeros],
            "discriminant": self.discriminant,
            "in_band": self.in_band,
            "fiber_size": self.fiber_size,
            "oracle_fiber_size": self.oracle_fiber_size,
            "oracle_best_energy": self.oracle_best_energy,
            "method_agreement": self.method_agreement,
            "error": self.error,
            "cycles": [c.to_dict() for c in self.cycles],
            "oracle_cycles": [c.to_dict() for c in self.oracle_cycles],
        }

    @classmethod
    def from_dict(cls, data: dict, wall_time: float = 0.0) -> "ModuliRecord":
        from .geometry import Chart

        zeros = [(SpherePoint(Chart(z["chart"]), complex(z["re"], z["im"])), int(z["multiplicity"])) for z in data["zeros"]]
        return cls(
            key=data["key"],
            section=PolynomialSection.from_dict(data["section"]),
            zeros=zeros,
            discriminant=float(data["discriminant"]),
            cycles=[SpecialCycleCertificate.from_dict(c) for c in data["cycles"]],
            fiber_size=int(data["fiber_size"]),
            oracle_cycles=[SpecialCycleCertificate.from_dict(c) for c in data.get("oracle_cycles", [])],
            oracle_fiber_size=int(data.get("oracle_fiber_size", 0)),
            oracle_best_energy=float(data.get("oracle_best_energy", float("nan"))),
            method_agreement=data.get("method_agreement"),
            in_band=bool(data.get("in_band", False)),
            error=data.get("error"),
            wall_time=wall_time,
            source=json.loads(json.dumps(data)),
        )


def _record_seed(seed: int, key: str) -> int:
    return int(np.random.SeedSequence([seed, int(key[1:])]).generate_state(1)[0])


def compute_record(
    key: str,
    s: PolynomialSection,
    tol: Tolerances | None = None,
    oracle_starts: int = 6,
    seed: int = 0,
    run_oracle: bool = True,
) -> ModuliRecord:
    """Zeros, discriminant, tracer fiber and oracle fiber of one section."""
    tol = tol or Tolerances()
    t0 = time.perf_counter()
    s = normalize_section(s)
    disc = is_on_veronese(s)[1]
    in_band = disc < DISCRIMINANT_BAND
    errors = []
    try:
        cycles = trace_fiber(s, tol=tol).certificates
    except SBSError as exc:
        cycles = []
        errors.append(f"tracer: {exc}")
    oracle_cycles: list = []
    best = float("nan")
    if run_oracle:
        try:
            rep = oracle_search(s, oracle_starts, _record_seed(seed, key))
            best = rep.best_energy
            for lp in rep.loops:
                try:
                    cert = certify_loop(s, lp.to_loop(), provenance={"kind": "oracle"}, tol=tol)
                except (CertificationError, SBSError) as exc:
                    errors.append(f"oracle loop not certified: {exc}")
                    continue
                oracle_cycles.append(cert)
        except SBSError as exc:
            errors.append(f"oracle: {exc}")
    agreement = None
    if cycles and oracle_cycles:
        agreement = float(set_hausdorff([c.loop for c in cycles], [c.loop for c in oracle_cycles]))
    return ModuliRecord(
        key=key,
        section=s,
        zeros=list(s.zeros),
        discriminant=float(disc),
        cycles=cycles,
        fiber_size=len(cycles),
        oracle_cycles=oracle_cycles,
        oracle_fiber_size=len(oracle_cycles),
        oracle_best_energy=float(best),
        method_agreement=agreement,
        in_band=bool(in_band),
        error="; ".join(errors) or None,
        wall_time=time.perf_counter() - t0,
    )


def _record_job(args) -> ModuliRecord:
    key, s, tol, starts, seed, run_oracle = args
    try:
        return compute_record(key, s, tol, starts, seed, run_oracle)
    except Exception as exc:  # a failing section must never abort the scan
        log.exception("record %s failed", key)
        return ModuliRecord(key, s, [], float("nan"), [], 0, error=f"{type(exc).__name__}: {exc}")


# ----------------------------------------------------------------------------
# reports


@dataclass(frozen=True, eq=False)
class ScanReport:
    spec: ScanSpec
    tolerances: Tolerances
    records: list

    @property
    def histogram(self) -> dict:
        out: dict = {}
        for r in self.records:
            out[r.fiber_size] = out.get(r.fiber_size, 0) + 1
        return dict(sorted(out.items()))

    @property
    def oracle_histogram(self) -> dict:
        out: dict = {}
        for r in self.records:
            out[r.oracle_fiber_size] = out.get(r.oracle_fiber_size, 0) + 1
        return dict(sorted(out.items()))

    @property
    def proximity_curve(self) -> list:
        """(discriminant, tracer fiber size, oracle fiber size) sorted by discriminant."""
        pts = [(r.discriminant, r.fiber_size, r.oracle_fiber_size) for r in self.records]
        return sorted(pts, key=lambda t: (np.nan_to_num(t[0], nan=np.inf), t[1], t[2]))

    def summary(self) -> dict:
        agreements = [r.method_agreement for r in self.records if r.method_agreement is not None]
        return {
            "spec": self.spec.to_dict(),
            "tolerances": self.tolerances.to_dict(),
            "n_records": len(self.records),
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "oracle_histogram": {str(k): v for k, v in self.oracle_histogram.items()},
            "cardinality_agreement": sum(r.fiber_size == r.oracle_fiber_size for r in self.records),
            "max_method_agreement": max(agreements) if agreements else None,
            "discriminant_band": DISCRIMINANT_BAND,
            "empty_off_band": sum(r.fiber_size == 0 and not r.in_band for r in self.records),
            "failures": sum(r.error is not None for r in self.records),
            "proximity_curve": [list(t) for t in self.proximity_curve],
        }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=False) + "\n" for r in self.records)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "discriminant", "fiber_size", "oracle_fiber_size", "agreement"])
        for r in self.records:
            w.writerow([r.key, repr(r.discriminant), r.fiber_size, r.oracle_fiber_size, "" if r.method_agreement is None else repr(r.method_agreement)])
        return buf.getvalue()


def scan(
    spec: ScanSpec,
    tol: Tolerances | None = None,
    workers: int = 1,
    done: dict | None = None,
    on_record=None,
) -> ScanReport:
    """Compute every record of the scan spec; records in ``done`` (key -> record) are reused."""
    tol = tol or Tolerances()
    done = dict(done or {})
    todo = [
        (key, s, tol, spec.oracle_starts, spec.seed, spec.run_oracle)
        for key, s in spec.sections_list()
        if key not in done
    ]
    results = dict(done)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_record_job, todo):
                results[rec.key] = rec
                if on_record:
                    on_record(rec)
    else:
        for job in todo:
            rec = _record_job(job)
            results[rec.key] = rec
            if on_record:
                on_record(rec)
    keys = [k for k, _ in spec.sections_list()]
    return ScanReport(spec, tol, [results[k] for k in keys])


def load_records(path: Path) -> dict:
    out = {}
    if not path.exists():
        return out
    for line in path.read_text().splitlines():
        if line.strip():
            try:
                rec = ModuliRecord.from_dict(json.loads(line))
            except (ValueError, KeyError):  # a torn last line from an interrupted run
                continue
            out[rec.key] = rec
    return out


def run_scan_to_dir(spec: ScanSpec, out_dir: Path, tol: Tolerances | None = None, workers: int = 1) -> ScanReport:
    """Resumable scan writing records.jsonl, summary.json, summary.csv and timings.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    done = load_records(records_path)
    valid = {k for k, _ in spec.sections_list()}
    done = {k: v for k, v in done.items() if k in valid}
    timings_path = out_dir / "timings.json"
    timings = json.loads(timings_path.read_text()) if timings_path.exists() else {}

    with records_path.open("a") as fh:

        def append(rec: ModuliRecord):
            fh.write(json.dumps(rec.to_dict()) + "\n")
            fh.flush()
            timings[rec.key] = rec.wall_time

        report = scan(spec, tol, workers, done, on_record=append)
    # final single-writer rewrite in key order makes the file independent of history
    records_path.write_text(report.to_jsonl())
    (out_dir / "summary.json").write_text(json.dumps(report.summary(), indent=2) + "\n")
    (out_dir / "summary.csv").write_text(report.summary_csv())
    timings_path.write_text(json.dumps(dict(sorted(timings.items())), indent=2) + "\n")
    return report


# ----------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class ProbeResult:
    distances: list
    h: float
    truncated: bool
    constant: float  # max distance / h

    def to_dict(self) -> dict:
        return {"distances": self.distances, "h": self.h, "truncated": self.truncated, "constant": self.constant}


def _segment_min_discriminant(base: np.ndarray, direction: np.ndarray, h: float, k: int) -> float:
    """Smallest normalized discriminant on the path between steps k - 1 and k."""

    def disc(t):
        return is_on_veronese(PolynomialSection.from_coeffs(base + t * h * direction))[1]

    grid = np.linspace(k - 1, k, 17)
    vals = [disc(t) for t in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(disc, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(min(min(vals), res.fun))


def continuity_probe(
    s0: PolynomialSection,
    direction: Sequence[complex],
    steps: int = 10,
    h: float = 1e-2,
    tol: Tolerances | None = None,
    band: float = DISCRIMINANT_BAND,
) -> ProbeResult:
    """Hausdorff distances between the fibers of consecutive sections s0 + k h direction.

    The path is truncated (and flagged) as soon as a section enters the
    discriminant band or its fiber is not a single cycle.
    """
    base = normalize_section(s0).array
    direction = np.asarray(direction, complex)
    dists: list[float] = []
    prev = None
    truncated = False
    for k in range(steps + 1):
        s = normalize_section(tuple(base + k * h * direction))
        if k and _segment_min_discriminant(base, direction, h, k) < band:
            truncated = True
            break
        if is_on_veronese(s)[1] < band:
            truncated = True
            break
        cycles = trace_fiber(s, tol=tol).certificates
        if len(cycles) != 1:
            truncated = True
            break
        if prev is not None:
            dists.append(float(set_hausdorff([prev.loop], [cycles[0].loop])))
        prev = cycles[0]
    const = max(dists) / h if dists else 0.0
    return ProbeResult(dists, h, truncated, float(const))


def equivariance_check(s: PolynomialSection, rotation: SU2, tol: Tolerances | None = None) -> float:
    """Hausdorff distance between cycles(R s) and R(cycles(s))."""
    base = trace_fiber(s, tol=tol).certificates
    if not base:
        raise NothingToCompareError()
    moved = trace_fiber(s.rotated(rotation), tol=tol).certificates
    if not moved:
        return float("inf")
    return float(set_hausdorff([c.loop for c in moved], [rotation.apply_loop(c.loop) for c in base]))
