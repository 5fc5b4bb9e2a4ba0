"""Closed leaves of the singular foliation ker(beta), beta = Im(g dz).

Leaves of ker(beta) are gradient lines of u = log|s|_h, because the kernel of
Im(g dz) is spanned by conj(g), which is the gradient of u in a conformal
chart.  Away from {g = 0} a leaf is therefore monotone in u and cannot close
up, so closed leaves are either whole components of {g = 0} or chains of
separatrices joining critical points of u.  The tracer finds both kinds and
hands every candidate to :func:`certify_loop`, which only uses the geometry and
transport modules.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import minimize_scalar

from .bundle import (
    FoliationSingularity,
    PolynomialSection,
    SingularityKind,
    g_local,
    g_zeros,
    h_norm,
)
from .conventions import CERT_SAMPLES, EPSILON_ZERO, Tolerances
from .errors import (
    CertificationError,
    CorrectorDivergenceError,
    DegenerateSingularityError,
    NoSeedsError,
    SBSError,
)
from .geometry import (
    Chart,
    LoopSample,
    Region,
    SpherePoint,
    dense_points,
    distance_to_polyline,
    enclosed_area,
    from_ambient,
    hausdorff,
    loop_is_embedded,
    resample_loop,
    side_of_point,
    tangent_to_ambient,
)
from .transport import alpha_trace

log = logging.getLogger(__name__)

R_STOP = 2e-4
START_OFFSET = 1e-6
MAX_STEPS = 10**6
JUNCTION_TOL_DEG = 2.0
MONOTONE_G_TOL = 1e-4


class EndEvent(str, Enum):
    reached_singularity = "reached_singularity"
    left_domain = "left_domain"
    hit_section_zero_zone = "hit_section_zero_zone"
    closed_onto_start = "closed_onto_start"
    step_limit = "step_limit"


@dataclass(frozen=True, eq=False)
class SeparatrixPath:
    points: np.ndarray
    tangents: np.ndarray
    start_singularity: int | None
    end_event: EndEvent
    end_singularity: int | None = None
    ascending: bool = True

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def to_dict(self) -> dict:
        return {
            "start_singularity": self.start_singularity,
            "end_event": self.end_event.value,
            "end_singularity": self.end_singularity,
            "ascending": self.ascending,
            "points": self.points.tolist(),
        }


@dataclass(frozen=True)
class LocalType:
    """Linearization of the gradient field of u at an isolated critical point."""

    tag: str  # "saddle" or "node"
    eigenvalues: tuple[float, float]
    outgoing: tuple  # ambient unit tangents along which u increases away from the point
    incoming: tuple  # ambient unit tangents of leaves arriving while u increases


@dataclass(frozen=True, eq=False)
class SpecialCycleCertificate:
    loop: LoopSample
    arg_deviation: float
    phase_defect: float
    area: float
    winding: int
    separates: dict
    junction_angles: list
    extreme_g: float = 0.0
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "loop": self.loop.to_dict(),
            "arg_deviation": self.arg_deviation,
            "phase_defect": self.phase_defect,
            "area": self.area,
            "winding": self.winding,
            "separates": {str(k): v for k, v in self.separates.items()},
            "junction_angles": list(self.junction_angles),
            "extreme_g": self.extreme_g,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpecialCycleCertificate":
        return cls(
            loop=LoopSample.from_dict(data["loop"]),
            arg_deviation=float(data["arg_deviation"]),
            phase_defect=float(data["phase_defect"]),
            area=float(data["area"]),
            winding=int(data["winding"]),
            separates={int(k): v for k, v in data["separates"].items()},
            junction_angles=[float(a) for a in data["junction_angles"]],
            extreme_g=float(data.get("extreme_g", 0.0)),
            provenance=dict(data.get("provenance", {})),
        )


@dataclass(frozen=True, eq=False)
class FiberTrace:
    """Everything the tracer produced for one section."""

    certificates: list
    singularities: list
    paths: list
    rejected: list  # (provenance, reason)


# ----------------------------------------------------------------------------
# pointwise helpers in R^3


def _g_at(s: PolynomialSection, p: np.ndarray):
    charts, coords = from_ambient(p[None, :])
    ch = Chart(charts[0])
    c = complex(coords[0])
    g, a, b = g_local(s, ch, c)
    return ch, c, complex(g), complex(a), float(np.real(b))


def _chart_dir_to_ambient(ch: Chart, c: complex, v: complex) -> np.ndarray:
    t = tangent_to_ambient(ch, c, v)
    return t / np.linalg.norm(t)


def _gradient_dir(s: PolynomialSection, p: np.ndarray) -> np.ndarray:
    ch, c, g, _, _ = _g_at(s, p)
    return _chart_dir_to_ambient(ch, c, np.conj(g))


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points ``p`` (k, 3) to the segment [a, b]."""
    ab = b - a
    den = float(ab @ ab)
    if den == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    t = np.clip((p - a) @ ab / den, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=-1)


# ----------------------------------------------------------------------------
# local analysis


def classify_singularity(s: PolynomialSection, sing: FoliationSingularity, rel_tol: float = 1e-6) -> LocalType:
    if SingularityKind(sing.kind) is SingularityKind.curve_of_zeros:
        raise DegenerateSingularityError()
    pt = sing.position
    _, a, b = g_local(s, pt.chart, pt.coord)
    a, b = complex(a), float(np.real(b))
    if abs(abs(a) - abs(b)) <= rel_tol * (abs(a) + abs(b)):
        raise DegenerateSingularityError()
    hess = np.array([[a.real + b, -a.imag], [-a.imag, -a.real + b]])
    lam, vec = np.linalg.eigh(hess)
    dirs = [_chart_dir_to_ambient(pt.chart, pt.coord, complex(v[0], v[1])) for v in vec.T]
    if lam[0] < 0 < lam[1]:
        unstable, stable = dirs[1], dirs[0]
        return LocalType("saddle", (float(lam[0]), float(lam[1])), (unstable, -unstable), (stable, -stable))
    # maximum: the slow direction (eigenvalue nearer to zero) is listed first
    slow, fast = dirs[1], dirs[0]
    return LocalType("node", (float(lam[0]), float(lam[1])), (), (slow, -slow, fast, -fast))


# ----------------------------------------------------------------------------
# gradient-line integration


def _on_zero_curve(s: PolynomialSection, p: np.ndarray) -> bool:
    _, _, g, a, b = _g_at(s, p)
    return abs(g) < 1e-9 and abs(abs(a) - abs(b)) <= 1e-6 * (abs(a) + abs(b))


def trace_separatrix(
    s: PolynomialSection,
    start: SpherePoint | np.ndarray,
    direction: np.ndarray,
    ascending: bool | None = None,
    targets: Sequence[np.ndarray] | None = None,
    start_id: int | None = None,
    r_stop: float = R_STOP,
    eps_zero: float = EPSILON_ZERO,
    max_steps: int = MAX_STEPS,
    rtol: float = 1e-10,
) -> SeparatrixPath:
    """Follow the leaf of ker(beta) leaving ``start`` along ``direction``.

    The leaf is integrated as a unit-speed gradient line of u (ascending or
    descending), which keeps its orientation coherent by construction.
    """
    p0 = start.xyz() if isinstance(start, SpherePoint) else np.asarray(start, float)
    p0 = p0 / np.linalg.norm(p0)
    direction = np.asarray(direction, float)
    direction = direction - (direction @ p0) * p0
    direction /= np.linalg.norm(direction)

    if _on_zero_curve(s, p0):
        loop = trace_zero_curve(s, p0, direction=direction)
        pts = loop.xyz if isinstance(loop, LoopSample) else loop.points
        event = EndEvent.closed_onto_start if isinstance(loop, LoopSample) else EndEvent.left_domain
        tang = np.gradient(pts, axis=0)
        tang /= np.linalg.norm(tang, axis=1, keepdims=True)
        return SeparatrixPath(pts, tang, start_id, event, None, True)

    zeros = s.zeros_xyz
    targets = np.zeros((0, 3)) if targets is None else np.asarray(targets, float).reshape(-1, 3)
    first = p0 + START_OFFSET * direction
    first /= np.linalg.norm(first)
    if ascending is None:
        ch, c, g, _, _ = _g_at(s, first)
        v = np.conj(g)
        ascending = bool(_chart_dir_to_ambient(ch, c, v) @ direction > 0)
    sign = 1.0 if ascending else -1.0

    def rhs(_t, y):
        return sign * _gradient_dir(s, y / np.linalg.norm(y))

    pts = [p0, first]
    tangents = [direction, rhs(0.0, first)]
    if len(zeros) and np.min(np.linalg.norm(zeros - first, axis=1)) < eps_zero:
        return SeparatrixPath(np.array(pts), np.array(tangents), start_id, EndEvent.hit_section_zero_zone, None, ascending)

    solver = RK45(rhs, 0.0, first, t_bound=40.0, rtol=rtol, atol=rtol * 1e-2, max_step=0.05, first_step=START_OFFSET)
    moved_away = False
    event = EndEvent.step_limit
    end_id = None
    for _ in range(max_steps):
        prev = pts[-1]
        try:
            msg = solver.step()
        except SBSError:
            event = EndEvent.left_domain
            break
        if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
            event = EndEvent.left_domain
            break
        p = solver.y / np.linalg.norm(solver.y)
        pts.append(p)
        tangents.append(rhs(0.0, p))
        if not moved_away and np.linalg.norm(p - p0) > 10 * r_stop:
            moved_away = True
        if len(targets):
            dist = _segment_distance(targets, prev, p)
            if start_id is not None and not moved_away:
                dist[start_id] = np.inf
            hit = int(np.argmin(dist))
            if dist[hit] < r_stop:
                event, end_id = EndEvent.reached_singularity, hit
                break
        if start_id is None and moved_away and _segment_distance(p0[None, :], prev, p)[0] < r_stop:
            event = EndEvent.closed_onto_start
            break
        if len(zeros) and np.min(_segment_distance(zeros, prev, p)) < eps_zero:
            event = EndEvent.hit_section_zero_zone
            break
        if solver.status == "finished":
            event = EndEvent.step_limit
            break
        # converged onto a critical point that is not in the target list
        if abs(_g_at(s, p)[2]) < 1e-8:
            event = EndEvent.reached_singularity
            break
    else:
        event = EndEvent.step_limit
    return SeparatrixPath(np.array(pts), np.array(tangents), start_id, event, end_id, ascending)


# ----------------------------------------------------------------------------
# continuation of {g = 0}


def _real_jacobian(a: complex, b: float) -> np.ndarray:
    gx = a + b
    gy = 1j * (a - b)
    return np.array([[gx.real, gy.real], [gx.imag, gy.imag]])


def _zero_curve_tangent(s: PolynomialSection, p: np.ndarray) -> np.ndarray:
    ch, c, _, a, b = _g_at(s, p)
    _, _, vt = np.linalg.svd(_real_jacobian(a, b))
    v = vt[-1]
    return _chart_dir_to_ambient(ch, c, complex(v[0], v[1]))


def _correct(s: PolynomialSection, q: np.ndarray, tol: float = 1e-13, iters: int = 25):
    charts, coords = from_ambient(q[None, :])
    ch = Chart(charts[0])
    c = complex(coords[0])
    for _ in range(iters):
        g, a, b = g_local(s, ch, c)
        g = complex(g)
        if abs(g) < tol:
            break
        step, *_ = np.linalg.lstsq(_real_jacobian(complex(a), float(np.real(b))), -np.array([g.real, g.imag]), rcond=1e-10)
        c = c + complex(step[0], step[1])
        if not np.isfinite(c):
            return None
    g = complex(g_local(s, ch, c)[0])
    if not abs(g) < 1e-10:
        return None
    return SpherePoint(ch, c).xyz()


def _hermite_gap(p0, t0, p1, t1, target) -> float:
    """Distance from ``target`` to the cubic Hermite arc between two curve points."""
    h = np.linalg.norm(p1 - p0)

    def dist(u):
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        c = h00 * p0 + h10 * h * t0 + h01 * p1 + h11 * h * t1
        return float(np.linalg.norm(c / np.linalg.norm(c) - target))

    res = minimize_scalar(dist, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


def trace_zero_curve(
    s: PolynomialSection,
    seed: SpherePoint | np.ndarray,
    step: float = 1e-2,
    direction: np.ndarray | None = None,
    max_steps: int = 20000,
    close_tol: float = 1e-6,
) -> LoopSample | SeparatrixPath:
    """Predictor-corrector continuation of a component of {g = 0} through ``seed``.

    Returns a closed :class:`LoopSample` when the curve closes within
    ``close_tol``, otherwise the open arc as a :class:`SeparatrixPath`.
    """
    p = seed.xyz() if isinstance(seed, SpherePoint) else np.asarray(seed, float)
    p = _correct(s, p / np.linalg.norm(p))
    if p is None:
        raise CorrectorDivergenceError("seed is not on a curve of zeros of g", np.zeros((0, 3)))
    start = p
    t = _zero_curve_tangent(s, p)
    if direction is not None and t @ direction < 0:
        t = -t
    pts, tans = [p], [t]
    travelled = 0.0
    for _ in range(max_steps):
        h = step
        for _attempt in range(4):
            q = p + h * t
            q = _correct(s, q / np.linalg.norm(q))
            if q is not None and np.linalg.norm(q - p) < 2 * h:
                break
            h /= 2
        else:
            raise CorrectorDivergenceError("corrector diverged", np.array(pts))
        tq = _zero_curve_tangent(s, q)
        if tq @ t < 0:
            tq = -tq
        travelled += np.linalg.norm(q - p)
        if travelled > 3 * step:
            ahead_p = (start - p) @ t > 0
            behind_q = (start - q) @ tq < 0
            if ahead_p and behind_q and np.linalg.norm(start - p) < 2 * step:
                gap = _hermite_gap(p, t, q, tq, start)
                if gap < close_tol:
                    return LoopSample(np.array(pts))
        pts.append(q)
        tans.append(tq)
        p, t = q, tq
    arc = np.array(pts)
    return SeparatrixPath(arc, np.array(tans), None, EndEvent.step_limit)


# ----------------------------------------------------------------------------
# certification


def _refined_extreme_g(s: PolynomialSection, loop: LoopSample) -> float:
    """|g| at the refined max and min of |s|_h along the loop."""
    curve = loop.curve()
    knots = curve.knots[:-1]

    def hn(tau):
        p = curve.position(tau)
        charts, coords = from_ambient(np.atleast_2d(p))
        return float(h_norm(s, Chart(charts[0]), coords[0]))

    vals = np.array([hn(t) for t in knots])
    worst = 0.0
    n = len(knots)
    for idx, sgn in ((int(np.argmax(vals)), -1.0), (int(np.argmin(vals)), 1.0)):
        lo = knots[idx - 1] if idx > 0 else knots[-1] - curve.period
        hi = knots[idx + 1] if idx + 1 < n else curve.period
        res = minimize_scalar(lambda t: sgn * hn(t % curve.period), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        p = curve.position(res.x % curve.period)
        worst = max(worst, abs(_g_at(s, p / np.linalg.norm(p))[2]))
    return worst


def certify_loop(
    s: PolynomialSection,
    loop: LoopSample,
    junction_angles: Sequence[float] = (),
    provenance: dict | None = None,
    n_samples: int = CERT_SAMPLES,
    tol: Tolerances | None = None,
) -> SpecialCycleCertificate:
    """Independent checks of a candidate; raises CertificationError on failure."""
    tol = tol or Tolerances()
    eps_zero = tol.epsilon_zero
    loop = resample_loop(loop, n_samples)
    if not loop_is_embedded(loop):
        raise CertificationError("loop not embedded")
    zeros = s.zeros_xyz
    if len(zeros) and distance_to_polyline(zeros, dense_points(loop)).min() <= eps_zero:
        raise CertificationError("loop enters the zero zone of s")
    # one transport serves both the BS test and the flat frame that alpha is measured against
    trace = alpha_trace(s, loop, bs_tol=tol.bs_tol, eps_zero=eps_zero, require_bs=False, rtol=tol.rtol)
    phase_defect = float(abs(np.angle(trace.holonomy)))
    if not phase_defect < tol.bs_tol:
        raise CertificationError(f"phase defect {phase_defect:.3e}")
    if not trace.arg_deviation < tol.arg_tol:
        raise CertificationError(f"arg deviation {trace.arg_deviation:.3e}")
    if trace.winding != 0:
        raise CertificationError(f"winding {trace.winding}")
    area = enclosed_area(Region(loop, "left"), s.degree)
    if not abs(area - round(area)) < tol.area_tol:
        raise CertificationError(f"area {area:.9f} not integral")
    separates = {i: side_of_point(loop, z) for i, z in enumerate(zeros)}
    if s.degree == 2 and len(set(separates.values())) < 2:
        raise CertificationError("zeros not separated")
    extreme_g = _refined_extreme_g(s, loop)
    if not extreme_g < MONOTONE_G_TOL:
        raise CertificationError(f"|s|_h extremes off the singular set (|g| = {extreme_g:.2e})")
    return SpecialCycleCertificate(
        loop=loop,
        arg_deviation=trace.arg_deviation,
        phase_defect=phase_defect,
        area=float(area),
        winding=trace.winding,
        separates=separates,
        junction_angles=[float(a) for a in junction_angles],
        extreme_g=float(extreme_g),
        provenance=dict(provenance or {}),
    )


# ----------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class _Edge:
    a: int
    b: int
    dir_a: np.ndarray  # direction of the edge leaving vertex a
    dir_b: np.ndarray  # direction of the edge leaving vertex b (towards a)
    points: np.ndarray  # from a to b, vertices excluded
    path_id: int


def _angle_deg(u: np.ndarray, v: np.ndarray, at: np.ndarray) -> float:
    """Angle between u and -v in the tangent plane at ``at``."""
    u = u - (u @ at) * at
    v = v - (v @ at) * at
    cosang = -(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))


def _edge_from_path(path: SeparatrixPath, vertices: np.ndarray, path_id: int) -> _Edge | None:
    if path.end_event is not EndEvent.reached_singularity or path.end_singularity is None:
        return None
    a, b = path.start_singularity, path.end_singularity
    pts = path.points[1:]
    dir_a = path.tangents[0]
    dir_b = pts[-1] - vertices[b]
    dir_b /= np.linalg.norm(dir_b)
    return _Edge(a, b, dir_a, dir_b, pts, path_id)


def _find_cycles(edges: list[_Edge], vertices: np.ndarray, tol_deg: float, max_len: int = 8):
    """Closed chains of edges that pass straight through every vertex."""
    half: dict[int, list[tuple[int, bool]]] = {}
    for k, e in enumerate(edges):
        half.setdefault(e.a, []).append((k, True))
        half.setdefault(e.b, []).append((k, False))
    found: list[tuple] = []
    seen: set = set()

    def leave_dir(k, forward):
        return edges[k].dir_a if forward else edges[k].dir_b

    def arrive(k, forward):
        e = edges[k]
        return (e.b, e.dir_b) if forward else (e.a, e.dir_a)

    def dfs(chain, angles):
        k0, f0 = chain[0]
        v, d_in = arrive(*chain[-1])
        v0 = edges[k0].a if f0 else edges[k0].b
        if v == v0:
            ang = _angle_deg(leave_dir(k0, f0), d_in, vertices[v])
            if ang <= tol_deg:
                key = frozenset(k for k, _ in chain)
                if key not in seen:
                    seen.add(key)
                    found.append((list(chain), angles + [ang]))
                return
        if len(chain) >= max_len:
            return
        used = {k for k, _ in chain}
        for k, fwd in half.get(v, []):
            if k in used:
                continue
            ang = _angle_deg(leave_dir(k, fwd), d_in, vertices[v])
            if ang <= tol_deg:
                dfs(chain + [(k, fwd)], angles + [ang])

    for k in range(len(edges)):
        dfs([(k, True)], [])
    return found


def _chain_points(chain, edges: list[_Edge], vertices: np.ndarray) -> np.ndarray:
    pts = []
    for k, fwd in chain:
        e = edges[k]
        start = e.a if fwd else e.b
        pts.append(vertices[start][None, :])
        pts.append(e.points if fwd else e.points[::-1])
    out = np.vstack(pts)
    # drop consecutive near-duplicates left over at the junctions
    keep = np.concatenate([[True], np.linalg.norm(np.diff(out, axis=0), axis=1) > 1e-12])
    return out[keep]


def _singularities(s: PolynomialSection, extra_seeds=(), grid: int = 40) -> list[FoliationSingularity]:
    try:
        return g_zeros(s, grid=grid, extra_seeds=extra_seeds)
    except NoSeedsError:
        pass
    ring = []
    for z in s.zeros_xyz:
        e1 = np.cross(z, [1.0, 0.0, 0.0])
        if np.linalg.norm(e1) < 0.5:
            e1 = np.cross(z, [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(z, e1)
        for t in np.linspace(0, 2 * np.pi, 32, endpoint=False):
            ring.append(np.cos(0.3) * z + np.sin(0.3) * (np.cos(t) * e1 + np.sin(t) * e2))
    try:
        return g_zeros(s, grid=2 * grid, extra_seeds=list(extra_seeds) + ring)
    except NoSeedsError:
        return []


def trace_fiber(
    s: PolynomialSection,
    singularities: Sequence[FoliationSingularity] | None = None,
    junction_tol: float = JUNCTION_TOL_DEG,
    r_stop: float = R_STOP,
    tol: Tolerances | None = None,
) -> FiberTrace:
    tol = tol or Tolerances()
    sings = list(singularities) if singularities is not None else _singularities(s)
    paths: list[SeparatrixPath] = []
    rejected: list = []
    candidates: list[tuple[LoopSample, list, dict]] = []

    # (a) closed components of {g = 0}
    curve_loops: list[LoopSample] = []
    for i, sg in enumerate(sings):
        if SingularityKind(sg.kind) is not SingularityKind.curve_of_zeros:
            continue
        if any(distance_to_polyline(sg.xyz[None, :], lp.xyz)[0] < 1e-3 for lp in curve_loops):
            continue
        try:
            res = trace_zero_curve(s, sg.xyz)
        except CorrectorDivergenceError as exc:
            rejected.append(({"seed": i, "kind": "zero_curve"}, str(exc)))
            continue
        if isinstance(res, LoopSample):
            curve_loops.append(res)
            candidates.append((res, [], {"seed": i, "kind": "zero_curve"}))
        else:
            rejected.append(({"seed": i, "kind": "zero_curve"}, "zero curve did not close"))

    # (b) separatrix connections between isolated critical points
    iso = [i for i, sg in enumerate(sings) if SingularityKind(sg.kind) is not SingularityKind.curve_of_zeros]
    vertices = np.array([sg.xyz for sg in sings]) if sings else np.zeros((0, 3))
    targets = vertices[iso] if iso else np.zeros((0, 3))
    local_index = {g: k for k, g in enumerate(iso)}

    def run(i, direction, ascending, stop):
        path = trace_separatrix(
            s, sings[i].xyz, direction, ascending=ascending, targets=targets, start_id=local_index[i], r_stop=stop
        )
        end = iso[path.end_singularity] if path.end_singularity is not None else None
        return SeparatrixPath(path.points, path.tangents, i, path.end_event, end, path.ascending)

    arms: list[tuple[int, np.ndarray, bool]] = []
    for i in iso:
        try:
            lt = classify_singularity(s, sings[i])
        except DegenerateSingularityError:
            rejected.append(({"seed": i, "kind": "separatrix"}, "degenerate singularity"))
            continue
        if lt.tag != "saddle":
            continue
        arms += [(i, d, True) for d in lt.outgoing] + [(i, d, False) for d in lt.incoming]

    edges: list[_Edge] = []
    for i, d, asc in arms:
        path = run(i, d, asc, r_stop)
        paths.append(path)
        if path.end_event is EndEvent.step_limit:
            log.warning("separatrix from singularity %d hit the step limit; discarded", i)
        e = _edge_from_path(path, vertices, len(paths) - 1)
        if e is not None and e.a != e.b:
            edges.append(e)

    for chain, angles in _find_cycles(edges, vertices, junction_tol):
        pts = _chain_points(chain, edges, vertices)
        prov = {"kind": "separatrix_chain", "trace_ids": [edges[k].path_id for k, _ in chain], "seed": edges[chain[0][0]].a}
        candidates.append((LoopSample(pts), angles, prov))

    certificates: list[SpecialCycleCertificate] = []
    for loop, angles, prov in candidates:
        try:
            cert = certify_loop(s, loop, angles, prov, tol=tol)
        except (CertificationError, SBSError) as exc:
            rejected.append((prov, str(exc)))
            continue
        if any(hausdorff(cert.loop, c.loop) < tol.hausdorff_tol for c in certificates):
            continue
        certificates.append(cert)
    return FiberTrace(certificates, sings, paths, rejected)


def find_special_cycles(s: PolynomialSection, **kw) -> list[SpecialCycleCertificate]:
    """Certified SBS cycles of ``s`` found by the tracer (possibly none)."""
    return trace_fiber(s, **kw).certificates


def retrace_near(
    s: PolynomialSection, loop: LoopSample, radius: float = 0.2, tol: Tolerances | None = None
) -> list[SpecialCycleCertificate]:
    """Re-run the tracer seeded only from the samples of a (perturbed) loop.

    Critical points of u are searched by Newton iteration started at the loop
    samples; those within ``radius`` of the loop seed the separatrix search.
    """
    seeds = loop.xyz[:: max(1, loop.n // 64)]
    try:
        sings = g_zeros(s, grid=0, extra_seeds=seeds)
    except NoSeedsError:
        return []
    near = [sg for sg in sings if distance_to_polyline(sg.xyz[None, :], loop.xyz)[0] < radius]
    certs = trace_fiber(s, singularities=near, tol=tol).certificates
    return sorted(certs, key=lambda c: hausdorff(c.loop, loop))
