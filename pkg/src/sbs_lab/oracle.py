"""Tracer-free search for SBS cycles by minimizing a speciality functional.

A loop is a truncated Fourier series ``z(t) = sum_k c_k exp(i k t)`` in a
rotated stereographic chart.  Its energy is a sum of squared residuals

    J = w1 * sum_j (2 pi / M) * beta(T_j)^2 * |gamma'(t_j)|
      + w2 * (2 pi (A - n(A)))^2
      + guard

where ``beta(T)`` is Im(g dz) evaluated on the unit (round metric) tangent and
``|gamma'|`` the round speed, so the first term approximates the arclength
integral of beta(T)^2.  The second term is the squared holonomy phase defect,
measured against the integer n(A) in [1, d - 1] nearest to A, and ``guard`` keeps the enclosed area inside [1/4, d - 1/4] so the loop cannot
collapse to a point, where both other terms vanish trivially.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .bundle import PolynomialSection, g_local
from .conventions import EPSILON_ZERO
from .errors import NonEmbeddedLoopError
from .geometry import SU2, Chart, LoopSample, hausdorff, loop_is_embedded, resample_loop, z_to_ambient

N_MODES = 24
M_SAMPLES = 512
WEIGHTS = (1.0, 10.0)
SUCCESS_J = 1e-8
GUARD_WEIGHT = 1e3
BARRIER_J = 1e6
# loops reaching |z| > POLE_ZONE in the rotated chart are treated like the zero zone
POLE_ZONE = 1e2
# weight of the speed-uniformity penalty used while descending
GAUGE_WEIGHT = 1e-1


@lru_cache(maxsize=16)
def _basis(n_modes: int, m: int):
    k = np.fft.fftfreq(n_modes, 1.0 / n_modes)
    t = 2 * np.pi * np.arange(m) / m
    e = np.exp(1j * np.outer(t, k))
    return k, e, e * (1j * k)


@dataclass(frozen=True, eq=False)
class FourierLoop:
    """Loop z(t) in the chart Z of ``frame``; physical points are frame.apply_xyz(P(z))."""

    modes: np.ndarray  # fftfreq ordering
    frame: SU2 = field(default_factory=SU2.identity)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @classmethod
    def circle(cls, center: complex, radius: float, n_modes: int = N_MODES, frame: SU2 | None = None) -> "FourierLoop":
        modes = np.zeros(n_modes, complex)
        modes[0] = center
        modes[1] = radius
        return cls(modes, frame or SU2.identity())

    @classmethod
    def from_loop(cls, loop: LoopSample, frame: SU2 | None = None, n_modes: int = N_MODES) -> "FourierLoop":
        """Least-squares Fourier fit of a loop resampled at equal chord length."""
        frame = frame or SU2.identity()
        m = max(4 * n_modes, 256)
        pts = frame.inverse.apply_xyz(resample_loop(loop.normalized_orientation(), m).oriented_xyz)
        z = (pts[:, 0] + 1j * pts[:, 1]) / (1.0 - pts[:, 2])
        # the energy reads the area left of a counter-clockwise chart curve;
        # sum k |c_k|^2 is the signed flat area over pi
        coef = np.fft.fft(z) / m
        if np.sum(np.fft.fftfreq(m, 1.0 / m) * np.abs(coef) ** 2) < 0:
            coef = np.fft.fft(z[::-1]) / m
        k = np.fft.fftfreq(n_modes, 1.0 / n_modes).astype(int)
        return cls(coef[k % m], frame)

    def params(self) -> np.ndarray:
        return np.concatenate([self.modes.real, self.modes.imag])

    def with_params(self, x: np.ndarray) -> "FourierLoop":
        n = self.n_modes
        return FourierLoop(x[:n] + 1j * x[n:], self.frame)

    def z(self, m: int = M_SAMPLES):
        _, e, de = _basis(self.n_modes, m)
        return e @ self.modes, de @ self.modes

    def shifted(self, t0: float) -> "FourierLoop":
        """Same loop with the time origin moved to ``t0``."""
        k = np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes)
        return FourierLoop(self.modes * np.exp(1j * k * t0), self.frame)

    def refined(self, n_modes: int) -> "FourierLoop":
        k_old = np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes).astype(int)
        out = np.zeros(n_modes, complex)
        out[k_old % n_modes] = self.modes
        return FourierLoop(out, self.frame)

    def to_loop(self, m: int = 1024) -> LoopSample:
        z, _ = self.z(m)
        return LoopSample(self.frame.apply_xyz(z_to_ambient(z)))


@dataclass(frozen=True)
class EnergyTerms:
    total: float
    speciality: float
    bs: float
    guard: float
    area: float
    barrier: bool


def _chart_section(s: PolynomialSection, frame: SU2) -> PolynomialSection:
    return s.rotated(frame.inverse)


def _residuals(
    sp: PolynomialSection, loop: FourierLoop, weights, m: int, with_jac: bool, eps_zero: float, gauge: float = 0.0
):
    w1, w2 = weights
    d = sp.degree
    z, dz = loop.z(m)
    q = 1.0 + np.abs(z) ** 2
    if np.max(np.abs(z)) > POLE_ZONE:
        return None
    zeros = sp.zeros_xyz
    if len(zeros):
        pts = z_to_ambient(z)
        near = np.min(np.linalg.norm(pts[:, None, :] - zeros[None, :, :], axis=2))
        if near < 10 * eps_zero:
            return None
    g, a, b = g_local(sp, Chart.Z, z)
    beta = (g * dz).imag
    adz = np.abs(dz)
    speed = 2.0 * adz / q
    if not np.all(np.isfinite(beta)) or np.min(speed) <= 0:
        return None
    c1 = np.sqrt(w1 * 2 * np.pi / m)
    # beta(T)^2 * speed = beta(gamma')^2 / speed
    r_spec = c1 * beta / np.sqrt(speed)
    area = d / m * np.sum((np.conj(z) * dz).imag / q)
    # the nearest integer an SBS cycle can enclose; 0 and d are excluded, so
    # the BS term never pulls against the collapse guard
    frac = area - np.clip(np.round(area), 1, max(1, d - 1))
    r_bs = np.sqrt(w2) * 2 * np.pi * frac
    lo, hi = 0.25, d - 0.25
    gw = np.sqrt(GUARD_WEIGHT)
    r_guard = gw * (lo - area) if area < lo else gw * (area - hi) if area > hi else 0.0
    parts = [r_spec, [r_bs, r_guard]]
    if gauge > 0:
        cg = np.sqrt(gauge * 2 * np.pi / m)
        mean_speed = speed.mean()
        parts.append(cg * np.log(speed / mean_speed))
    r = np.concatenate(parts)
    if not with_jac:
        return r, area
    _, e, de = _basis(loop.n_modes, m)
    dzp = np.hstack([e, 1j * e])  # d z_j / d params
    ddzp = np.hstack([de, 1j * de])
    dg = a[:, None] * dzp + np.real(b)[:, None] * np.conj(dzp)
    dbeta = (dg * dz[:, None] + g[:, None] * ddzp).imag
    dadz = (np.conj(dz)[:, None] * ddzp).real / adz[:, None]
    dq = 2 * (np.conj(z)[:, None] * dzp).real
    dspeed = 2 * dadz / q[:, None] - 2 * adz[:, None] * dq / q[:, None] ** 2
    j_spec = c1 * (dbeta / np.sqrt(speed)[:, None] - 0.5 * beta[:, None] * speed[:, None] ** -1.5 * dspeed)
    num = (np.conj(z) * dz).imag
    dnum = (np.conj(dzp) * dz[:, None] + np.conj(z)[:, None] * ddzp).imag
    darea = d / m * np.sum(dnum / q[:, None] - num[:, None] * dq / q[:, None] ** 2, axis=0)
    j_bs = np.sqrt(w2) * 2 * np.pi * darea
    if area < lo:
        j_guard = -gw * darea
    elif area > hi:
        j_guard = gw * darea
    else:
        j_guard = np.zeros_like(darea)
    blocks = [j_spec, j_bs[None, :], j_guard[None, :]]
    if gauge > 0:
        blocks.append(cg * (dspeed / speed[:, None] - dspeed.mean(axis=0) / mean_speed))
    return r, area, np.vstack(blocks)


def energy_terms(
    s: PolynomialSection,
    loop: FourierLoop,
    weights: Sequence[float] = WEIGHTS,
    m: int = M_SAMPLES,
    eps_zero: float = EPSILON_ZERO,
) -> EnergyTerms:
    sp = _chart_section(s, loop.frame)
    out = _residuals(sp, loop, weights, m, False, eps_zero)
    if out is None:
        return EnergyTerms(BARRIER_J, BARRIER_J, 0.0, 0.0, float("nan"), True)
    r, area = out
    return EnergyTerms(
        float(r @ r), float(r[:-2] @ r[:-2]), float(r[-2] ** 2), float(r[-1] ** 2), float(area), False
    )


def speciality_energy(
    s: PolynomialSection,
    loop: FourierLoop,
    weights: Sequence[float] = WEIGHTS,
    m: int = M_SAMPLES,
    eps_zero: float = EPSILON_ZERO,
) -> float:
    """J(loop); a large finite barrier value when the loop touches the zero zone."""
    return energy_terms(s, loop, weights, m, eps_zero).total


def energy_gradient(
    s: PolynomialSection, loop: FourierLoop, weights: Sequence[float] = WEIGHTS, m: int = M_SAMPLES
) -> np.ndarray:
    """Gradient of J with respect to (Re modes, Im modes)."""
    sp = _chart_section(s, loop.frame)
    out = _residuals(sp, loop, weights, m, True, EPSILON_ZERO)
    if out is None:
        return np.zeros(2 * loop.n_modes)
    r, _, jac = out
    return 2 * jac.T @ r


@dataclass(frozen=True, eq=False)
class OptimizeOutcome:
    loop: FourierLoop
    energy: float
    flagged: bool
    log: list  # rows (iteration, J, gradient norm)


def optimize_loop_detailed(
    s: PolynomialSection,
    init: FourierLoop,
    weights: Sequence[float] = WEIGHTS,
    m: int = M_SAMPLES,
    gauge: float = GAUGE_WEIGHT,
    max_nfev: int = 300,
) -> OptimizeOutcome:
    """Levenberg-Marquardt descent on the residuals of J.

    J does not change when samples slide along the loop, nor when a stretch
    of the loop is traversed back and forth.  The first pass adds residuals
    sqrt(gauge) log(speed / mean speed), which pin the sliding freedom and make
    the zero-speed turning points of such folds infinitely expensive; the
    second pass minimizes J alone from there.  Each Jacobian evaluation adds
    a log row (iteration, J, |grad J|).
    """
    if not loop_is_embedded(init.to_loop(256)):
        raise NonEmbeddedLoopError("initial loop is not embedded")
    sp = _chart_section(s, init.frame)
    rows: list = []
    cache: dict = {}

    def resid(x, mu):
        key = (x.tobytes(), mu)
        if key not in cache:
            cache.clear()
            cache[key] = _residuals(sp, init.with_params(x), weights, m, True, EPSILON_ZERO, mu)
        return cache[key]

    def energy(x):
        out = resid(x, 0.0)
        return BARRIER_J if out is None else float(out[0] @ out[0])

    def descend(x, mu, nfev):
        n_res = m + 2 + (m if mu > 0 else 0)

        def lm_r(y):
            out = resid(y, mu)
            return out[0] if out is not None else np.full(n_res, 1e3)

        def lm_j(y):
            out = resid(y, mu)
            if out is None:
                return np.zeros((n_res, len(y)))
            plain = resid(y, 0.0)
            rows.append((len(rows) + 1, float(plain[0] @ plain[0]), float(np.linalg.norm(2 * plain[2].T @ plain[0]))))
            return resid(y, mu)[2]

        lm = least_squares(lm_r, x, jac=lm_j, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=nfev)
        return lm.x if energy(lm.x) <= energy(x) or mu > 0 else x

    x = init.params()
    if energy(x) < BARRIER_J:
        x = descend(x, gauge, max_nfev)
        x = descend(x, 0.0, max_nfev // 3)
    j_final = energy(x)
    return OptimizeOutcome(init.with_params(x), j_final, bool(j_final >= BARRIER_J), rows)


def optimize_loop(s: PolynomialSection, init: FourierLoop, **kw) -> tuple[FourierLoop, float]:
    out = optimize_loop_detailed(s, init, **kw)
    return out.loop, out.energy


def log_to_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "J", "gradient_norm"])
    for it, j, gn in rows:
        w.writerow([it, repr(float(j)), repr(float(gn))])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# multistart


def oracle_frame(s: PolynomialSection) -> SU2:
    """Rotation whose chart Z keeps the zeros of s away from the chart pole.

    For two distinct zeros the pole is placed on the axis through their
    difference, which puts the great circle of points equidistant from both
    on the unit circle of the chart.  A single zero direction is sent to the
    chart origin.
    """
    zeros = s.zeros_xyz_with_multiplicity
    if len(zeros) == 0:
        return SU2.identity()
    axis = zeros[0] - zeros[1:].mean(axis=0) if len(zeros) > 1 else -zeros[0]
    if np.linalg.norm(axis) < 1e-3:
        axis = -zeros[0]
    axis = axis / np.linalg.norm(axis)
    return SU2.taking([0.0, 0.0, 1.0], axis)


def _separates(z0: np.ndarray, center: complex, radius: float) -> bool:
    inside = np.abs(z0 - center) < radius
    return bool(inside.any() and (~inside).any())


def _initial_circles(sp: PolynomialSection, n_starts: int, rng: np.random.Generator):
    """Start circles in the oracle chart: the unit circle first, then random separating circles.

    In the oracle frame the unit circle is the great circle equidistant from
    the zeros (two zeros) or bounding half the area around them.  Near the
    discriminant the cycle threads the narrow gap between two close zeros,
    which random circles rarely reach.
    """
    zeros = [p.coord if p.chart is Chart.Z else np.inf for p, mult in sp.zeros for _ in range(mult)]
    z0 = np.array([z for z in zeros if np.isfinite(z)], complex)
    z_all = np.array(zeros, complex)
    out = [(0j, 1.0)] if n_starts > 0 else []
    tries = 0
    while len(out) < n_starts and tries < 200 * max(n_starts, 1):
        tries += 1
        center = complex(rng.normal(0, 0.25), rng.normal(0, 0.25))
        radius = float(np.exp(rng.normal(0.0, 0.4)))
        dist = np.abs(z0 - center) if len(z0) else np.array([np.inf])
        if len(z0) and np.min(np.abs(dist - radius)) < 0.05 * radius:
            continue
        if len(set(z_all.tolist())) > 1 and not _separates(z_all, center, radius):
            continue
        out.append((center, radius))
    while len(out) < n_starts:  # double zeros: nothing can separate, keep random circles
        out.append((complex(rng.normal(0, 0.25), rng.normal(0, 0.25)), float(np.exp(rng.normal(0.0, 0.4)))))
    return out


@dataclass(frozen=True, eq=False)
class OracleReport:
    loops: list  # FourierLoop with J < SUCCESS_J, deduplicated
    energies: list
    best_energy: float
    runs: list  # (center, radius, J, flagged) per start


def oracle_search(
    s: PolynomialSection,
    n_starts: int = 20,
    seed: int = 0,
    weights: Sequence[float] = WEIGHTS,
    n_modes: int = N_MODES,
    dedup_tol: float = 1e-3,
    stop_after: int | None = None,
) -> OracleReport:
    """Multistart minimization; ``stop_after`` ends early after that many successes."""
    rng = np.random.default_rng(seed)
    frame = oracle_frame(s)
    sp = _chart_section(s, frame)
    loops: list[FourierLoop] = []
    energies: list[float] = []
    samples: list[LoopSample] = []
    runs = []
    best = np.inf
    successes = 0
    for center, radius in _initial_circles(sp, n_starts, rng):
        init = FourierLoop.circle(center, radius, n_modes, frame)
        out = optimize_loop_detailed(s, init, weights)
        if SUCCESS_J <= out.energy < 1e-5 and not out.flagged:
            try:
                out = optimize_loop_detailed(s, out.loop.refined(2 * n_modes), weights)
            except NonEmbeddedLoopError:
                pass
        runs.append((center, radius, out.energy, out.flagged))
        best = min(best, out.energy)
        if out.energy >= SUCCESS_J or out.flagged:
            continue
        # a genuine minimizer is resolved by the quadrature; re-evaluate on a finer grid
        if speciality_energy(s, out.loop, weights, m=4 * M_SAMPLES) >= SUCCESS_J:
            continue
        successes += 1
        sample = out.loop.to_loop()
        if loop_is_embedded(sample) and not any(hausdorff(sample, other) < dedup_tol for other in samples):
            loops.append(out.loop)
            energies.append(out.energy)
            samples.append(sample)
        if stop_after is not None and successes >= stop_after:
            break
    return OracleReport(loops, energies, float(best), runs)


def oracle_find_special(s: PolynomialSection, n_starts: int = 20, seed: int = 0, **kw) -> list[FourierLoop]:
    """Loops with J < 1e-8 found from ``n_starts`` separating circles."""
    return oracle_search(s, n_starts, seed, **kw).loops
