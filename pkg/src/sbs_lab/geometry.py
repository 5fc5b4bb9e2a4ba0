"""Charts, loops and symplectic area on the Riemann sphere.

Points are held either as chart coordinates (``Z``: z, ``W``: w = 1/z) or as
unit vectors in R^3.  The stereographic convention is projection from the
north pole, so z = 0 is the south pole (0, 0, -1) and z = infinity the north
pole::

    P(z) = (2 Re z, 2 Im z, |z|^2 - 1) / (1 + |z|^2)

The symplectic form is normalized to total area ``d`` (the bundle degree),

    omega = (d / pi) dx dy / (1 + |z|^2)^2,

with primitive ``lambda = (d / 2 pi) Im(conj(z) dz) / (1 + |z|^2)`` in chart Z.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .conventions import AREA_TOL, CHART_SWITCH
from .errors import (
    ChartPoleError,
    DegenerateLoopError,
    NonEmbeddedLoopError,
    UndersampledLoopError,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class Chart(str, Enum):
    Z = "Z"
    W = "W"


@dataclass(frozen=True)
class SpherePoint:
    """A point of CP^1 as a chart id plus complex coordinate."""

    chart: Chart
    coord: complex

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "coord", complex(self.coord))

    @property
    def admissible(self) -> bool:
        return abs(self.coord) <= CHART_SWITCH

    def canonical(self) -> "SpherePoint":
        """Re-express in the other chart when the coordinate is too large."""
        if self.admissible:
            return self
        return chart_transition(self)

    def xyz(self) -> np.ndarray:
        return to_ambient(self.chart, self.coord)

    @classmethod
    def from_xyz(cls, p: Sequence[float]) -> "SpherePoint":
        charts, coords = from_ambient(np.asarray(p, float)[None, :])
        return cls(Chart(charts[0]), complex(coords[0]))

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return cls(Chart.W, 0j)


def chart_transition(p: SpherePoint) -> SpherePoint:
    if p.coord == 0:
        raise ChartPoleError()
    other = Chart.W if p.chart is Chart.Z else Chart.Z
    return SpherePoint(other, 1.0 / p.coord)


# ----------------------------------------------------------------------------
# stereographic maps (vectorized)


def to_ambient(chart, coord) -> np.ndarray:
    """Unit vectors for chart coordinates; ``chart`` is a scalar or array."""
    c = np.asarray(coord, dtype=complex)
    q = 1.0 + np.abs(c) ** 2
    x = 2 * c.real / q
    y = 2 * c.imag / q
    h = (np.abs(c) ** 2 - 1.0) / q
    w_mask = _w_mask(chart, c.shape)
    # chart W: P(w) = (2 Re w, -2 Im w, 1 - |w|^2) / (1 + |w|^2)
    y = np.where(w_mask, -y, y)
    h = np.where(w_mask, -h, h)
    return np.stack([x, y, h], axis=-1)


def _w_mask(chart, shape) -> np.ndarray:
    if isinstance(chart, (str, Chart)):
        return np.full(shape, Chart(chart) is Chart.W)
    return np.array([Chart(ch) is Chart.W for ch in np.ravel(chart)]).reshape(shape)


def z_to_ambient(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    q = 1.0 + np.abs(z) ** 2
    return np.stack([2 * z.real / q, 2 * z.imag / q, (np.abs(z) ** 2 - 1.0) / q], axis=-1)


def w_to_ambient(w) -> np.ndarray:
    p = z_to_ambient(w)
    p[..., 1:] *= -1
    return p


def from_ambient(p: np.ndarray):
    """Canonical chart (Z on the southern hemisphere) and coordinates."""
    p = np.atleast_2d(p)
    south = p[:, 2] <= 0
    z = (p[:, 0] + 1j * p[:, 1]) / np.where(south, 1.0 - p[:, 2], 1.0)
    w = (p[:, 0] - 1j * p[:, 1]) / np.where(south, 1.0, 1.0 + p[:, 2])
    charts = np.where(south, "Z", "W")
    return charts, np.where(south, z, w)


def ambient_to_z(p: np.ndarray) -> np.ndarray:
    return (p[..., 0] + 1j * p[..., 1]) / (1.0 - p[..., 2])


def ambient_to_w(p: np.ndarray) -> np.ndarray:
    return (p[..., 0] - 1j * p[..., 1]) / (1.0 + p[..., 2])


def chart_coords(p: np.ndarray, chart: Chart) -> np.ndarray:
    return ambient_to_z(p) if Chart(chart) is Chart.Z else ambient_to_w(p)


def chart_velocity(p: np.ndarray, dp: np.ndarray, chart: Chart):
    """Chart coordinate and its derivative along a curve with velocity ``dp``."""
    if Chart(chart) is Chart.Z:
        den = 1.0 - p[..., 2]
        num = p[..., 0] + 1j * p[..., 1]
        dnum = dp[..., 0] + 1j * dp[..., 1]
        return num / den, dnum / den + num * dp[..., 2] / den**2
    den = 1.0 + p[..., 2]
    num = p[..., 0] - 1j * p[..., 1]
    dnum = dp[..., 0] - 1j * dp[..., 1]
    return num / den, dnum / den - num * dp[..., 2] / den**2


def tangent_to_ambient(chart: Chart, coord, v) -> np.ndarray:
    """Push a chart tangent vector ``v`` (complex) at ``coord`` forward to R^3."""
    c = np.asarray(coord, dtype=complex)
    v = np.asarray(v, dtype=complex)
    x, y = c.real, c.imag
    q = 1.0 + x * x + y * y
    vx, vy = v.real, v.imag
    dX = (2 / q - 4 * x * x / q**2) * vx - 4 * x * y / q**2 * vy
    dY = -4 * x * y / q**2 * vx + (2 / q - 4 * y * y / q**2) * vy
    dH = 4 * x / q**2 * vx + 4 * y / q**2 * vy
    if Chart(chart) is Chart.W:
        dY, dH = -dY, -dH
    return np.stack([dX, dY, dH], axis=-1)


def ambient_to_tangent(chart: Chart, p: np.ndarray, t: np.ndarray) -> np.ndarray:
    return chart_velocity(p, t, chart)[1]


def chordal_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)


def chordal_distance_z(z1: complex, z2: complex) -> float:
    return float(2 * abs(z1 - z2) / np.sqrt((1 + abs(z1) ** 2) * (1 + abs(z2) ** 2)))


def round_metric_factor(c) -> np.ndarray:
    """Conformal factor of the unit-sphere metric, ds = rho |dc|."""
    return 2.0 / (1.0 + np.abs(c) ** 2)


# ----------------------------------------------------------------------------
# SU(2) acting on the sphere


@dataclass(frozen=True)
class SU2:
    """The Moebius map z -> (a z + b) / (-conj(b) z + conj(a)), |a|^2 + |b|^2 = 1."""

    a: complex
    b: complex

    def __post_init__(self):
        n = np.hypot(abs(self.a), abs(self.b))
        object.__setattr__(self, "a", complex(self.a) / n)
        object.__setattr__(self, "b", complex(self.b) / n)

    @classmethod
    def identity(cls) -> "SU2":
        return cls(1.0, 0.0)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SU2":
        q = rng.normal(size=4)
        return cls(q[0] + 1j * q[1], q[2] + 1j * q[3])

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float]) -> "SU2":
        rv = np.asarray(rotvec, float)
        phi = float(np.linalg.norm(rv))
        if phi < 1e-300:
            return cls.identity()
        nx, ny, nz = rv / phi
        c, s = np.cos(phi / 2), np.sin(phi / 2)
        # cos(phi/2) + i sin(phi/2) (nx sx - ny sy + nz sz) in this stereographic convention
        return cls(c + 1j * s * nz, 1j * s * nx - s * ny)

    @classmethod
    def taking(cls, u: Sequence[float], v: Sequence[float]) -> "SU2":
        """A rotation taking the unit vector ``u`` to ``v``."""
        u = np.asarray(u, float) / np.linalg.norm(u)
        v = np.asarray(v, float) / np.linalg.norm(v)
        axis = np.cross(u, v)
        sn = np.linalg.norm(axis)
        cs = float(np.dot(u, v))
        if sn < 1e-15:
            if cs > 0:
                return cls.identity()
            perp = np.cross(u, [1.0, 0.0, 0.0])
            if np.linalg.norm(perp) < 1e-8:
                perp = np.cross(u, [0.0, 1.0, 0.0])
            return cls.from_rotvec(np.pi * perp / np.linalg.norm(perp))
        return cls.from_rotvec(axis / sn * np.arctan2(sn, cs))

    @classmethod
    def from_matrix(cls, rmat: np.ndarray) -> "SU2":
        return cls.from_rotvec(Rotation.from_matrix(rmat).as_rotvec())

    @property
    def inverse(self) -> "SU2":
        return SU2(np.conj(self.a), -self.b)

    def compose(self, other: "SU2") -> "SU2":
        """self after other."""
        m = self.unitary @ other.unitary
        return SU2(m[0, 0], m[0, 1])

    @property
    def unitary(self) -> np.ndarray:
        return np.array([[self.a, self.b], [-np.conj(self.b), np.conj(self.a)]])

    @property
    def matrix(self) -> np.ndarray:
        """The SO(3) rotation of the unit sphere induced by the Moebius map."""
        cols = [self._apply_homog(np.array([[1.0, 1.0]])), self._apply_homog(np.array([[1j, 1.0]]))]
        south = self._apply_homog(np.array([[0.0, 1.0]]))
        return np.column_stack([cols[0][0], cols[1][0], -south[0]])

    def _apply_homog(self, xi: np.ndarray) -> np.ndarray:
        zeta = xi @ self.unitary.T
        z0, z1 = zeta[:, 0], zeta[:, 1]
        n = np.abs(z0) ** 2 + np.abs(z1) ** 2
        prod = z0 * np.conj(z1)
        return np.stack([2 * prod.real / n, 2 * prod.imag / n, (np.abs(z0) ** 2 - np.abs(z1) ** 2) / n], axis=-1)

    def apply_xyz(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p) @ self.matrix.T

    def apply(self, p: SpherePoint) -> SpherePoint:
        return SpherePoint.from_xyz(self.apply_xyz(p.xyz()))

    def apply_loop(self, loop: "LoopSample") -> "LoopSample":
        return LoopSample(self.apply_xyz(loop.xyz), loop.orientation)


# ----------------------------------------------------------------------------
# loops


@dataclass(frozen=True, eq=False)
class LoopSample:
    """An oriented closed sampled curve; the last sample connects to the first.

    ``xyz`` holds the samples as unit vectors in storage order.  With
    ``orientation == "-"`` the loop is traversed in reverse storage order.
    """

    xyz: np.ndarray
    orientation: str = "+"

    def __post_init__(self):
        p = np.array(self.xyz, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3 or len(p) < 3:
            raise DegenerateLoopError("a loop needs at least three samples in R^3")
        p /= np.linalg.norm(p, axis=1, keepdims=True)
        p.setflags(write=False)
        object.__setattr__(self, "xyz", p)
        if self.orientation not in ("+", "-"):
            raise ValueError("orientation must be '+' or '-'")

    @classmethod
    def from_points(cls, points: Iterable[SpherePoint], orientation: str = "+") -> "LoopSample":
        return cls(np.array([p.xyz() for p in points]), orientation)

    @classmethod
    def from_z(cls, z, orientation: str = "+") -> "LoopSample":
        return cls(z_to_ambient(np.asarray(z, complex)), orientation)

    @property
    def n(self) -> int:
        return len(self.xyz)

    @property
    def points(self) -> list[SpherePoint]:
        charts, coords = from_ambient(self.xyz)
        return [SpherePoint(Chart(c), complex(v)) for c, v in zip(charts, coords)]

    @property
    def oriented_xyz(self) -> np.ndarray:
        return self.xyz if self.orientation == "+" else self.xyz[::-1]

    def reversed(self) -> "LoopSample":
        return LoopSample(self.xyz, "-" if self.orientation == "+" else "+")

    def normalized_orientation(self) -> "LoopSample":
        """Same oriented curve with storage order matching traversal."""
        return LoopSample(self.oriented_xyz.copy(), "+")

    @property
    def gaps(self) -> np.ndarray:
        return np.linalg.norm(np.roll(self.xyz, -1, axis=0) - self.xyz, axis=1)

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    def curve(self) -> "LoopCurve":
        return LoopCurve(self.oriented_xyz)

    # exchange formats
    def to_dict(self) -> dict:
        return {
            "orientation": self.orientation,
            "points": [{"chart": p.chart.value, "re": p.coord.real, "im": p.coord.imag} for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LoopSample":
        pts = [SpherePoint(Chart(r["chart"]), complex(r["re"], r["im"])) for r in data["points"]]
        return cls.from_points(pts, data.get("orientation", "+"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LoopSample":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chart", "re", "im"])
        for p in self.points:
            w.writerow([p.chart.value, repr(p.coord.real), repr(p.coord.imag)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, orientation: str = "+") -> "LoopSample":
        rows = list(csv.DictReader(io.StringIO(text)))
        pts = [SpherePoint(Chart(r["chart"]), complex(float(r["re"]), float(r["im"]))) for r in rows]
        return cls.from_points(pts, orientation)


class LoopCurve:
    """Periodic cubic interpolant of oriented samples, projected to the sphere.

    The parameter is cumulative chordal length of the samples; the knots are
    the samples themselves.  Every loop computation (area, transport, side
    tests) runs on this one continuous curve.
    """

    def __init__(self, xyz: np.ndarray):
        xyz = np.asarray(xyz, float)
        chords = np.linalg.norm(np.roll(xyz, -1, axis=0) - xyz, axis=1)
        if chords.min() <= 0:
            raise DegenerateLoopError("consecutive samples coincide")
        self.knots = np.concatenate([[0.0], np.cumsum(chords)])
        self.period = float(self.knots[-1])
        if self.period < 1e-12:
            raise DegenerateLoopError("loop length below epsilon")
        self.samples = xyz
        self._spline = CubicSpline(self.knots, np.vstack([xyz, xyz[:1]]), bc_type="periodic")
        self._dspline = self._spline.derivative()

    def position(self, tau) -> np.ndarray:
        s = self._spline(np.mod(tau, self.period))
        return s / np.linalg.norm(s, axis=-1, keepdims=True)

    def position_velocity(self, tau):
        t = np.mod(tau, self.period)
        s = self._spline(t)
        ds = self._dspline(t)
        r = np.linalg.norm(s, axis=-1, keepdims=True)
        p = s / r
        v = (ds - p * np.sum(p * ds, axis=-1, keepdims=True)) / r
        return p, v

    def quadrature(self, subdivide: int = 1):
        """Gauss-Legendre nodes and weights on every knot interval."""
        edges = self.knots
        if subdivide > 1:
            edges = np.interp(np.arange(len(edges) - 1, step=1 / subdivide), np.arange(len(edges)), edges)
            edges = np.append(edges, self.period)
        lo, hi = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)
        tau = (lo + hi)[:, None] / 2 + half[:, None] * _GL_NODES[None, :]
        wts = half[:, None] * _GL_WEIGHTS[None, :]
        return tau, wts


@dataclass(frozen=True)
class Region:
    boundary: LoopSample
    side: str = "left"

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def complement(self) -> "Region":
        return Region(self.boundary, "right" if self.side == "left" else "left")


def _chart_primitive_integral(curve: LoopCurve, degree: int) -> float:
    """Loop integral of the chart-Z primitive, W-segments handled via chart W.

    On chart-W intervals lambda_Z = lambda_W + (d / 2 pi) d arg z, and the
    arg term is integrated exactly from the unwrapped arg w.
    """
    tau, wts = curve.quadrature()
    p, v = curve.position_velocity(tau)
    lo = curve.position(curve.knots[:-1])
    hi = curve.position(curve.knots[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        z, dz = chart_velocity(p, v, Chart.Z)
        w, dw = chart_velocity(p, v, Chart.W)
    # per interval, the chart with the smaller coordinates
    use_w = np.nan_to_num(np.max(np.abs(z), axis=1), nan=np.inf) > np.nan_to_num(
        np.max(np.abs(w), axis=1), nan=np.inf
    )
    lam_z = np.where(use_w[:, None], 0.0, np.imag(np.conj(z) * dz) / (1 + np.abs(z) ** 2))
    lam_w = np.where(use_w[:, None], np.imag(np.conj(w) * dw) / (1 + np.abs(w) ** 2), 0.0)
    total = np.sum(wts * (np.nan_to_num(lam_z) + np.nan_to_num(lam_w)))
    # continuous change of arg w over each W interval
    idx = np.flatnonzero(use_w)
    if len(idx):
        wseq = np.concatenate([ambient_to_w(lo[idx])[:, None], w[idx], ambient_to_w(hi[idx])[:, None]], axis=1)
        args = np.unwrap(np.angle(wseq), axis=1)
        total -= np.sum(args[:, -1] - args[:, 0])
    return degree / (2 * np.pi) * float(total)


def pole_primitive_integral(loop: LoopSample | LoopCurve, pole: np.ndarray, degree: int = 1) -> float:
    """Loop integral of the primitive of omega that is singular only at ``pole``.

    lambda_q = (d / 4 pi) q . (P x dP) / (1 - q . P).  The result equals
    Area(left) - d * [pole on the left].
    """
    curve = loop if isinstance(loop, LoopCurve) else loop.curve()
    q = np.asarray(pole, float)
    q = q / np.linalg.norm(q)
    sub = 1
    near = float(np.min(1.0 - curve.samples @ q))
    h = float(np.max(np.diff(curve.knots)))
    # refine when the pole sits within a few intervals of the curve
    while sub < 4096 and near < (4 * h / sub) ** 2:
        sub *= 4
    tau, wts = curve.quadrature(subdivide=sub)
    p, v = curve.position_velocity(tau)
    num = np.einsum("k,...k->...", q, np.cross(p, v))
    den = 1.0 - p @ q
    return degree / (4 * np.pi) * float(np.sum(wts * num / den))


def _left_area(loop: LoopSample, degree: int) -> float:
    curve = loop.curve()
    return float(np.mod(_chart_primitive_integral(curve, degree), degree))


def enclosed_area(region: Region, degree: int, tol: float = AREA_TOL) -> float:
    """Symplectic area of one side of an embedded loop, in [0, degree]."""
    loop = region.boundary
    if not loop_is_embedded(loop):
        raise NonEmbeddedLoopError("boundary is not embedded")
    left = _left_area(loop, degree)
    if loop.n >= 32:
        coarse = LoopSample(loop.oriented_xyz[::2], "+")
        err = abs(_wrap_mod(left - _left_area(coarse, degree), degree)) / 15.0
        if err > tol:
            raise UndersampledLoopError(f"estimated quadrature error {err:.2e} above tolerance {tol:.1e}")
    return left if region.side == "left" else degree - left


def _wrap_mod(x: float, m: float) -> float:
    return (x + m / 2) % m - m / 2


def side_of_point(loop: LoopSample, point: np.ndarray | SpherePoint) -> str:
    """'left' or 'right' of the oriented loop."""
    q = point.xyz() if isinstance(point, SpherePoint) else np.asarray(point, float)
    curve = loop.curve()
    left = float(np.mod(_chart_primitive_integral(curve, 1), 1.0))
    raw = pole_primitive_integral(curve, q, 1)
    return "left" if round(left - raw) == 1 else "right"


# ----------------------------------------------------------------------------
# resampling, embeddedness, distances


def resample_loop(loop: LoopSample, n: int, max_iter: int = 60) -> LoopSample:
    """Equal-chord resampling of the periodic cubic interpolant.

    The first sample is kept.  A loop whose chords are already equal is
    returned unchanged (up to round-off), so the operation is idempotent.
    """
    if n < 16:
        raise ValueError("resample_loop needs n >= 16")
    curve = LoopCurve(loop.xyz)
    # dense arclength estimate for the starting guess
    fine = np.linspace(0.0, curve.period, 32 * len(curve.knots) + 1)
    pf = curve.position(fine)
    sf = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pf, axis=0), axis=1))])
    tau = np.interp(np.linspace(0.0, sf[-1], n + 1)[:-1], sf, fine)
    for _ in range(max_iter):
        pts = curve.position(tau)
        chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        spread = (chords.max() - chords.min()) / chords.mean()
        if spread < 1e-13:
            break
        cum = np.concatenate([[0.0], np.cumsum(chords)])
        tau_ext = np.concatenate([tau, [curve.period]])
        tau = np.interp(np.linspace(0.0, cum[-1], n + 1)[:-1], cum, tau_ext)
    pts = curve.position(tau)
    pts[0] = loop.xyz[0]
    return LoopSample(pts, loop.orientation)


def loop_is_embedded(loop: LoopSample) -> bool:
    """No repeated samples and no two non-adjacent great-circle segments meet."""
    p = loop.xyz
    n = len(p)
    q = np.roll(p, -1, axis=0)
    seg_len = np.linalg.norm(q - p, axis=1)
    if seg_len.min() < 1e-13:
        return False
    tree = cKDTree(p)
    if tree.query_pairs(1e-10):
        return False
    mid = 0.5 * (p + q)
    pairs = cKDTree(mid).query_pairs(float(seg_len.max()) * 1.0001, output_type="ndarray")
    if len(pairs) == 0:
        return True
    i, j = pairs[:, 0], pairs[:, 1]
    gap = np.abs(i - j)
    keep = (gap != 1) & (gap != n - 1)
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return True
    a, b, c, d = p[i], q[i], p[j], q[j]
    n1 = np.cross(a, b)
    n2 = np.cross(c, d)
    sc, sd = np.sum(n1 * c, axis=1), np.sum(n1 * d, axis=1)
    sa, sb = np.sum(n2 * a, axis=1), np.sum(n2 * b, axis=1)
    hit = (sc * sd <= 0) & (sa * sb <= 0) & (np.sum(a * c, axis=1) > 0)
    return not bool(np.any(hit))


def dense_points(loop: LoopSample, per_interval: int = 8) -> np.ndarray:
    curve = loop.curve()
    t = np.linspace(0.0, curve.period, per_interval * (len(curve.knots) - 1), endpoint=False)
    return curve.position(t)


def distance_to_polyline(points: np.ndarray, poly: np.ndarray, k: int = 4) -> np.ndarray:
    """Chordal distance from each point to a closed polyline in R^3."""
    m = len(poly)
    nxt = np.roll(poly, -1, axis=0)
    k = min(k, m)
    _, idx = cKDTree(poly).query(points, k=k)
    idx = np.atleast_2d(idx.T).T if k > 1 else idx[:, None]
    best = np.full(len(points), np.inf)
    for seg in np.concatenate([idx, (idx - 1) % m], axis=1).T:
        a, b = poly[seg], nxt[seg]
        ab = b - a
        t = np.clip(np.sum((points - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        dist = np.linalg.norm(points - (a + t[:, None] * ab), axis=1)
        best = np.minimum(best, dist)
    return best


def hausdorff(loop_a: LoopSample, loop_b: LoopSample) -> float:
    """Chordal Hausdorff distance between two loops (as point sets)."""
    pa, pb = dense_points(loop_a), dense_points(loop_b)
    return float(max(distance_to_polyline(pa, pb).max(), distance_to_polyline(pb, pa).max()))


def distance_to_circle(points: np.ndarray, axis: Sequence[float], height: float) -> np.ndarray:
    """Chordal distance from points to the circle {P : P . axis = height}."""
    e = np.asarray(axis, float) / np.linalg.norm(axis)
    theta_p = np.arccos(np.clip(np.asarray(points) @ e, -1.0, 1.0))
    theta_c = np.arccos(np.clip(height, -1.0, 1.0))
    return 2 * np.sin(np.abs(theta_p - theta_c) / 2)


def set_hausdorff(loops_a: Sequence[LoopSample], loops_b: Sequence[LoopSample]) -> float:
    """Hausdorff distance between finite sets of loops (matched by nearest)."""
    if not loops_a and not loops_b:
        return 0.0
    if not loops_a or not loops_b:
        return float("inf")
    dist = np.array([[hausdorff(a, b) for b in loops_b] for a in loops_a])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


# ----------------------------------------------------------------------------
# loop constructors


def circle_loop(radius: float, n: int, center: complex = 0.0, orientation: str = "+") -> LoopSample:
    """Circle |z - center| = radius in chart Z, positively oriented in z."""
    t = 2 * np.pi * np.arange(n) / n
    return LoopSample.from_z(center + radius * np.exp(1j * t), orientation)


def small_circle(axis: Sequence[float], height: float, n: int) -> LoopSample:
    """Circle {P . axis = height} whose left side is the cap containing ``axis``.

    Chart Z carries the complex orientation, which is the inward one on the
    unit sphere, so the circle runs clockwise when seen from the tip of ``axis``.
    """
    e = np.asarray(axis, float) / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(e, helper)
    u /= np.linalg.norm(u)
    v = np.cross(u, e)
    t = 2 * np.pi * np.arange(n) / n
    r = np.sqrt(max(1.0 - height * height, 0.0))
    pts = height * e + r * (np.cos(t)[:, None] * u + np.sin(t)[:, None] * v)
    return LoopSample(pts)


def great_circle(axis: Sequence[float], n: int) -> LoopSample:
    return small_circle(axis, 0.0, n)


