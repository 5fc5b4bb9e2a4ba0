"""Parallel transport of the Chern connection along loops.

A frame coefficient ``v`` (so the transported vector is ``v e_chart``) obeys

    dv/dt = -theta(c'(t)) v = d conj(c) c' / (1 + |c|^2) v

in the active chart.  Crossing from chart Z to chart W multiplies ``v`` by
``z^{-d}`` (``e_Z = w^d e_W``), and symmetrically back.  The holonomy of a
positively oriented loop is ``exp(SIGMA * 2 pi i * Area(left))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .bundle import PolynomialSection, PrequantumData, h_norm
from .conventions import ATOL, BS_TOL, CHART_SWITCH, EPSILON_ZERO, RTOL, SIGMA, SIGMA_W
from .errors import NotBohrSommerfeldError, SBSError, SectionZeroError
from .geometry import (
    Chart,
    LoopCurve,
    LoopSample,
    Region,
    chart_velocity,
    dense_points,
    distance_to_polyline,
    enclosed_area,
    from_ambient,
    loop_is_embedded,
    side_of_point,
)
from .errors import NonEmbeddedLoopError


@dataclass(frozen=True, eq=False)
class TransportResult:
    holonomy: complex
    phase_defect: float
    norm_drift: float
    # frame coefficients at the samples, traversal order, each in its canonical chart
    sigma_samples: np.ndarray

    @property
    def phase(self) -> float:
        return float(np.angle(self.holonomy))

    def to_dict(self) -> dict:
        return {
            "holonomy": [self.holonomy.real, self.holonomy.imag],
            "phase_defect": self.phase_defect,
            "norm_drift": self.norm_drift,
            "sigma_samples": [[v.real, v.imag] for v in self.sigma_samples],
        }


@dataclass(frozen=True, eq=False)
class AlphaTrace:
    alpha: np.ndarray
    arg_deviation: float
    winding: int
    min_modulus: float
    total_turning: float = field(default=0.0, repr=False)
    holonomy: complex = field(default=1.0, repr=False)  # of the transport that built the flat frame

    def to_dict(self) -> dict:
        return {
            "alpha": [[a.real, a.imag] for a in self.alpha],
            "arg_deviation": self.arg_deviation,
            "winding": self.winding,
            "min_modulus": self.min_modulus,
        }


# ----------------------------------------------------------------------------
# plaquettes


def _transport_segment(
    degree: int, fun, t0: float, t1: float, v0: complex, rtol: float, atol: float, t_eval=None, max_step: float = np.inf
):
    """Integrate dv/dt = d conj(c) c' / (1+|c|^2) v where ``fun(t) -> (c, c')``."""

    def rhs(t, v):
        c, dc = fun(t)
        return degree * np.conj(c) * dc / (1.0 + abs(c) ** 2) * v

    sol = solve_ivp(
        rhs, (t0, t1), np.array([v0], dtype=complex), method="RK45", rtol=rtol, atol=atol, t_eval=t_eval, max_step=max_step
    )
    if not sol.success:  # pragma: no cover - RK45 only fails on non-finite input
        raise SBSError(f"transport integrator failed: {sol.message}")
    return sol


def plaquette_holonomy(degree: int, center: complex, eps: float, chart: Chart = Chart.Z, rtol: float = 1e-12):
    """Holonomy of the positively oriented square of side ``eps`` centred at ``center``.

    The metric weight and connection form have the same expression in both
    charts, so ``chart`` only names where ``center`` lives.  Returns
    (holonomy, omega(center) * eps^2).
    """
    h = eps / 2
    corners = [center + h * (-1 - 1j), center + h * (1 - 1j), center + h * (1 + 1j), center + h * (-1 + 1j)]
    v = 1.0 + 0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        sol = _transport_segment(degree, lambda t, a=a, b=b: (a + t * (b - a), b - a), 0.0, 1.0, v, rtol, 1e-14)
        v = complex(sol.y[0, -1])
    area = float(PrequantumData(degree).omega_density(center)) * eps**2
    return v, area


def plaquette_residual(degree: int, center: complex, eps: float, chart: Chart = Chart.Z) -> float:
    hol, area = plaquette_holonomy(degree, center, eps, chart)
    return float(abs(hol - np.exp(SIGMA * 2j * np.pi * area)))


# ----------------------------------------------------------------------------
# loops


def _chart_schedule(curve: LoopCurve, per_interval: int = 16):
    """Chart switches along the curve with hysteresis at |coord| = CHART_SWITCH."""
    tau = np.linspace(0.0, curve.period, per_interval * (len(curve.knots) - 1) + 1)
    p = curve.position(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        zabs = np.abs((p[:, 0] + 1j * p[:, 1]) / (1.0 - p[:, 2]))
    chart = Chart.Z if zabs[0] <= 1.0 else Chart.W
    pieces = []
    start = 0.0
    for k in range(1, len(tau)):
        r = zabs[k] if chart is Chart.Z else 1.0 / zabs[k]
        if not r > CHART_SWITCH:
            continue

        def excess(t, chart=chart):
            q = curve.position(t)
            c = np.abs((q[0] + 1j * q[1]) / (1.0 - q[2])) if chart is Chart.Z else np.abs((q[0] - 1j * q[1]) / (1.0 + q[2]))
            return c - CHART_SWITCH

        t_switch = brentq(excess, tau[k - 1], tau[k], xtol=1e-15) if excess(tau[k - 1]) < 0 else tau[k - 1]
        pieces.append((start, t_switch, chart))
        start = t_switch
        chart = Chart.W if chart is Chart.Z else Chart.Z
    pieces.append((start, curve.period, chart))
    return pieces


def _transport_curve(degree: int, curve: LoopCurve, v0: complex = 1.0, rtol: float = RTOL, per_interval: int = 1):
    """Transport along the whole curve.

    Returns parameters, points, coefficients in each point's canonical chart,
    the holonomy and the maximal relative drift of |v|_h.
    """
    pieces = _chart_schedule(curve)
    n_int = len(curve.knots) - 1
    taus = np.linspace(0.0, curve.period, per_interval * n_int, endpoint=False)
    if per_interval == 1:
        taus = curve.knots[:-1].copy()
    start_chart = pieces[0][2]
    p0 = curve.position(0.0)
    c0 = complex(_coord(p0, start_chart))
    v = complex(v0)
    norm0 = abs(v) * (1 + abs(c0) ** 2) ** (-degree / 2)
    # the spline velocity is only C^1 across knots, where the RK45 error
    # estimate is unreliable; half a knot interval per step restores it
    max_step = 0.5 * float(np.median(np.diff(curve.knots)))
    coeffs = np.empty(len(taus), dtype=complex)
    drift = 0.0
    for t0, t1, chart in pieces:

        def fun(t, chart=chart):
            p, dp = curve.position_velocity(t)
            return chart_velocity(p, dp, chart)

        sel = np.flatnonzero((taus >= t0) & (taus < t1))
        te = taus[sel]
        inner = te[te > t0]
        sol = _transport_segment(
            degree, fun, t0, t1, v, rtol, ATOL * max(1.0, abs(v)), t_eval=np.append(inner, t1), max_step=max_step
        )
        if len(sel):
            vals = list(sol.y[0, :-1])
            if len(inner) < len(te):
                vals.insert(0, v)
            q = curve.position(te)
            c = _coord(q, chart)
            norms = np.abs(vals) * (1 + np.abs(c) ** 2) ** (-degree / 2)
            drift = max(drift, float(np.max(np.abs(norms / norm0 - 1.0))))
            coeffs[sel] = _to_canonical(np.array(vals), q, chart, degree)
        v = complex(sol.y[0, -1])
        p_end = curve.position(t1)
        c_end = complex(_coord(p_end, chart))
        drift = max(drift, abs(abs(v) * (1 + abs(c_end) ** 2) ** (-degree / 2) / norm0 - 1.0))
        if t1 < curve.period:
            v = v * c_end ** (-degree)
    end_chart = pieces[-1][2]
    if end_chart is not start_chart:
        v = v * complex(_coord(p0, end_chart)) ** (-degree)
    if not np.isfinite(v):
        raise SBSError("transport left the admissible charts")
    ratio = v / complex(v0)
    hol = ratio / abs(ratio)
    return taus, curve.position(taus), coeffs, hol, drift


def _coord(p, chart: Chart):
    if Chart(chart) is Chart.Z:
        return (p[..., 0] + 1j * p[..., 1]) / (1.0 - p[..., 2])
    return (p[..., 0] - 1j * p[..., 1]) / (1.0 + p[..., 2])


def _to_canonical(vals: np.ndarray, pts: np.ndarray, chart: Chart, degree: int) -> np.ndarray:
    charts, _ = from_ambient(pts)
    c = _coord(pts, chart)
    with np.errstate(divide="ignore", invalid="ignore"):
        switched = vals * c ** (-degree)
    return np.where(charts == Chart(chart).value, vals, switched)


def parallel_transport(degree: int, loop: LoopSample, v0: complex = 1.0, rtol: float = RTOL) -> TransportResult:
    curve = loop.curve()
    _, _, coeffs, hol, drift = _transport_curve(degree, curve, v0, rtol)
    return TransportResult(complex(hol), float(abs(np.angle(hol))), float(drift), coeffs)


def is_bohr_sommerfeld(degree: int, loop: LoopSample, tol: float = BS_TOL) -> tuple[bool, float]:
    if not loop_is_embedded(loop):
        raise NonEmbeddedLoopError("BS test needs an embedded loop")
    res = parallel_transport(degree, loop)
    return bool(res.phase_defect < tol), res.phase_defect


def _base_index(pts: np.ndarray) -> int:
    with np.errstate(divide="ignore", invalid="ignore"):
        zabs = np.abs((pts[:, 0] + 1j * pts[:, 1]) / (1.0 - pts[:, 2]))
    ok = np.flatnonzero(zabs <= CHART_SWITCH)
    return int(ok[0]) if len(ok) else 0


def _flat_frame(degree: int, curve: LoopCurve, base_phase: float, per_interval: int = 1, rtol: float = RTOL):
    """Unit-norm flat frame with argument ``base_phase`` at the base sample (chart Z)."""
    taus, pts, coeffs, hol, drift = _transport_curve(degree, curve, 1.0, rtol, per_interval)
    k0 = _base_index(pts)
    charts, coords = from_ambient(pts)
    vz = coeffs[k0]
    z0 = complex(_coord(pts[k0], Chart.Z))
    if charts[k0] == Chart.W.value:
        vz = vz * coords[k0] ** (-degree)
    scale = np.exp(1j * base_phase) * (1 + abs(z0) ** 2) ** (degree / 2) / vz
    return pts, coeffs * scale, hol, drift


def covariant_constant_section(
    degree: int, loop: LoopSample, tol: float = BS_TOL, base_phase: float = 0.0
) -> np.ndarray:
    """The flat unit section over a BS loop as frame coefficients at the samples."""
    curve = loop.curve()
    _, sigma, hol, _ = _flat_frame(degree, curve, base_phase)
    if abs(np.angle(hol)) >= tol:
        raise NotBohrSommerfeldError()
    return sigma


def _circular_deviation(alpha: np.ndarray) -> float:
    u = alpha / np.abs(alpha)
    mean = u.mean()
    if abs(mean) < 1e-12:
        return float(np.pi)
    return float(np.max(np.abs(np.angle(u / (mean / abs(mean))))))


def alpha_trace(
    s: PolynomialSection,
    loop: LoopSample,
    bs_tol: float = BS_TOL,
    eps_zero: float = EPSILON_ZERO,
    require_bs: bool = True,
    base_phase: float = 0.0,
    rtol: float = RTOL,
) -> AlphaTrace:
    """alpha(t_i) = s(gamma(t_i)) / sigma(t_i) along the loop in traversal order."""
    if len(s.zeros_xyz):
        dist = distance_to_polyline(s.zeros_xyz, dense_points(loop))
        if dist.min() < eps_zero:
            raise SectionZeroError("section zero on cycle")
    curve = loop.curve()
    per = 1
    while True:
        pts, sigma, hol, _ = _flat_frame(s.degree, curve, base_phase, per, rtol)
        if require_bs and abs(np.angle(hol)) >= bs_tol:
            raise NotBohrSommerfeldError()
        charts, coords = from_ambient(pts)
        fvals = np.array([s.local(Chart(ch), c)[0] for ch, c in zip(charts, coords)])
        alpha = fvals / sigma
        closing = alpha[0] / hol
        steps = np.angle(np.concatenate([alpha[1:], [closing]]) / alpha)
        if np.max(np.abs(steps)) < np.pi / 3 or per >= 16:
            break
        per *= 4
    total = float(np.sum(steps))
    sel = slice(None, None, per)
    norms = np.abs(alpha)
    return AlphaTrace(
        alpha=alpha[sel],
        arg_deviation=_circular_deviation(alpha),
        winding=int(np.round(total / (2 * np.pi))),
        min_modulus=float(norms.min()),
        total_turning=total,
        holonomy=complex(hol),
    )


def zeros_on_left(s: PolynomialSection, loop: LoopSample) -> int:
    m = 0
    for pt, mult in s.zeros:
        if side_of_point(loop, pt) == "left":
            m += mult
    return m


def winding_area_report(s: PolynomialSection, loop: LoopSample, **kw) -> dict:
    trace = alpha_trace(s, loop, **kw)
    area = enclosed_area(Region(loop, "left"), s.degree)
    m = zeros_on_left(s, loop)
    residual = abs(trace.winding - SIGMA_W * (m - area))
    return {"winding": trace.winding, "zeros_left": m, "area_left": area, "residual": float(residual), "trace": trace}


def winding_area_check(s: PolynomialSection, loop: LoopSample, **kw) -> float:
    """|winding(alpha) - SIGMA_W (m(left) - Area(left))|."""
    return winding_area_report(s, loop, **kw)["residual"]
