"""Holomorphic sections of O(d) with the Chern connection of the standard metric.

In chart Z a section is ``f(z) e_Z`` with ``|e_Z|_h^2 = (1 + |z|^2)^{-d}``; in
chart W it is ``f~(w) e_W`` with ``f~(w) = w^d f(1/w)`` and the same metric
weight in ``w``.  The connection form is ``theta = -d conj(z) dz / (1 + |z|^2)``
and the logarithmic derivative of a section is ``nabla s / s = g dz`` with

    g = f'/f - d conj(z) / (1 + |z|^2).

``Re(g dz) = d log|s|_h`` and ``beta = Im(g dz)``: curves annihilated by beta
are exactly the curves along which the proportionality coefficient of ``s``
against a flat frame keeps a constant argument.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .conventions import EPSILON_ZERO
from .errors import NoSeedsError, SectionZeroError
from .geometry import (
    SU2,
    Chart,
    SpherePoint,
    chordal_distance,
    from_ambient,
    to_ambient,
)


@dataclass(frozen=True)
class PolynomialSection:
    """Degree-d section, ``coeffs`` = (a_0, ..., a_d) of f(z) = sum a_k z^k."""

    degree: int
    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(a) for a in self.coeffs)
        if self.degree < 1 or len(c) != self.degree + 1:
            raise ValueError(f"degree {self.degree} needs {self.degree + 1} coefficients, got {len(c)}")
        if not any(c):
            raise ValueError("the zero section has no projective class")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[complex]) -> "PolynomialSection":
        return cls(len(coeffs) - 1, tuple(coeffs))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    def poly(self, chart: Chart) -> np.ndarray:
        """Highest-first coefficients of the local representative."""
        a = self.array
        return a[::-1] if Chart(chart) is Chart.Z else a

    @cached_property
    def _derivs(self):
        out = {}
        for ch in Chart:
            p = self.poly(ch)
            out[ch] = (p, np.polyder(p) if len(p) > 1 else np.zeros(1), np.polyder(p, 2) if len(p) > 2 else np.zeros(1))
        return out

    def local(self, chart: Chart, c):
        """f, f', f'' of the chart representative at ``c``."""
        p, p1, p2 = self._derivs[Chart(chart)]
        return np.polyval(p, c), np.polyval(p1, c), np.polyval(p2, c)

    @cached_property
    def zeros(self) -> list:
        return section_zeros(self)

    @cached_property
    def zeros_xyz(self) -> np.ndarray:
        pts = [p.xyz() for p, m in self.zeros]
        return np.array(pts).reshape(-1, 3)

    @cached_property
    def zeros_xyz_with_multiplicity(self) -> np.ndarray:
        pts = [p.xyz() for p, m in self.zeros for _ in range(m)]
        return np.array(pts).reshape(-1, 3)

    def scaled(self, c: complex) -> "PolynomialSection":
        return PolynomialSection(self.degree, tuple(c * a for a in self.coeffs))

    def normalized(self) -> "PolynomialSection":
        """Unit coefficient norm, leading nonzero coefficient positive real."""
        a = self.array
        a = a / np.linalg.norm(a)
        nz = np.flatnonzero(np.abs(a) > 1e-14)
        lead = a[nz[-1]]
        a = a * (abs(lead) / lead)
        a[nz[-1]] = abs(a[nz[-1]])
        a = a + 0.0  # clear negative zeros
        return PolynomialSection(self.degree, tuple(a))

    def rotated(self, u: SU2) -> "PolynomialSection":
        """Push-forward by the SU(2) bundle action; zeros move to ``u(zeros)``."""
        return rotate_section(self, u)

    def to_dict(self) -> dict:
        s = self.normalized()
        return {"degree": s.degree, "coeffs": [[a.real, a.imag] for a in s.coeffs]}

    @classmethod
    def from_dict(cls, data: dict) -> "PolynomialSection":
        return cls(int(data["degree"]), tuple(complex(re, im) for re, im in data["coeffs"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PolynomialSection":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PrequantumData:
    """The pair (L, a): O(d) with metric weight and Chern connection."""

    degree: int

    def metric_weight(self, c) -> np.ndarray:
        return (1.0 + np.abs(c) ** 2) ** (-self.degree)

    def connection_form(self, c, dc) -> np.ndarray:
        """theta evaluated on the chart tangent ``dc``; same form in both charts."""
        return -self.degree * np.conj(c) * dc / (1.0 + np.abs(c) ** 2)

    def curvature_density(self, c) -> np.ndarray:
        """F = density * dx^dy; equals -2 pi i omega."""
        return -2j * self.degree / (1.0 + np.abs(c) ** 2) ** 2

    def omega_density(self, c) -> np.ndarray:
        return self.degree / np.pi / (1.0 + np.abs(c) ** 2) ** 2

    @staticmethod
    def transition_factor(point: SpherePoint, degree: int) -> complex:
        """Multiplier taking a frame coefficient from ``point.chart`` to the other chart."""
        return complex(point.coord) ** (-degree)


class SingularityKind(str, Enum):
    isolated = "isolated"
    curve_of_zeros = "curve_of_zeros"
    near_section_zero = "near_section_zero"


@dataclass(frozen=True)
class FoliationSingularity:
    position: SpherePoint
    g_residual: float
    kind: SingularityKind
    linearization: np.ndarray = field(compare=False)

    @property
    def xyz(self) -> np.ndarray:
        return self.position.xyz()


# ----------------------------------------------------------------------------
# pointwise quantities


def _check_off_zeros(s: PolynomialSection, p: SpherePoint, eps: float) -> None:
    if len(s.zeros_xyz) and chordal_distance(s.zeros_xyz, p.xyz()).min() < eps:
        raise SectionZeroError()


def evaluate_section(s: PolynomialSection, p: SpherePoint) -> complex:
    return complex(s.local(p.chart, p.coord)[0])


def h_norm(s: PolynomialSection, chart: Chart, c) -> np.ndarray:
    f = s.local(chart, c)[0]
    return np.abs(f) * (1.0 + np.abs(c) ** 2) ** (-s.degree / 2)


def section_h_norm(s: PolynomialSection, p: SpherePoint) -> float:
    return float(h_norm(s, p.chart, p.coord))


def g_local(s: PolynomialSection, chart: Chart, c):
    """g and its Wirtinger derivatives A = dg/dc, B = dg/dconj(c) (B real)."""
    c = np.asarray(c, dtype=complex)
    f, f1, f2 = s.local(chart, c)
    q = 1.0 + np.abs(c) ** 2
    d = s.degree
    with np.errstate(divide="ignore", invalid="ignore"):
        r = f1 / f
        g = r - d * np.conj(c) / q
        a = f2 / f - r * r + d * np.conj(c) ** 2 / q**2
    b = -d / q**2
    return g, a, b


def log_derivative_g(s: PolynomialSection, p: SpherePoint, eps_zero: float = EPSILON_ZERO) -> complex:
    _check_off_zeros(s, p, eps_zero)
    return complex(g_local(s, p.chart, p.coord)[0])


def beta_covector(s: PolynomialSection, p: SpherePoint, eps_zero: float = EPSILON_ZERO) -> tuple[float, float]:
    """Components of beta = Im(g dz) on (dx, dy): (Im g, Re g)."""
    g = log_derivative_g(s, p, eps_zero)
    return (g.imag, g.real)


def hessian_log_norm(s: PolynomialSection, chart: Chart, c) -> np.ndarray:
    """Real Hessian of log|s|_h in chart coordinates, rows of d(Re g, -Im g)."""
    _, a, b = g_local(s, chart, c)
    a = complex(a)
    b = float(np.real(b))
    return np.array([[a.real + b, -a.imag], [-a.imag, -a.real + b]])


# ----------------------------------------------------------------------------
# zeros and the discriminant


def _refine_root(p: np.ndarray, z0: complex, mult: int, iters: int = 30) -> complex:
    q = np.polyder(p, mult - 1) if mult > 1 else p
    dq = np.polyder(q)
    z = complex(z0)
    for _ in range(iters):
        fz = np.polyval(q, z)
        dz = np.polyval(dq, z)
        if dz == 0:
            break
        step = fz / dz
        z -= step
        if abs(step) <= 1e-17 * max(1.0, abs(z)):
            break
    return z


def section_zeros(s: PolynomialSection, cluster: float = 1e-6) -> list:
    """All zeros on CP^1 as (SpherePoint, multiplicity); multiplicities sum to d."""
    a = s.array
    scale = np.linalg.norm(a)
    nz = np.flatnonzero(np.abs(a) > 1e-14 * scale)
    top = int(nz[-1])
    out = []
    inf_mult = s.degree - top
    roots = np.roots(a[: top + 1][::-1]) if top > 0 else np.array([])
    pts = to_ambient(Chart.Z, roots) if len(roots) else np.zeros((0, 3))
    used = np.zeros(len(roots), bool)
    for i in range(len(roots)):
        if used[i]:
            continue
        close = (~used) & (chordal_distance(pts, pts[i]) < cluster)
        used |= close
        m = int(close.sum())
        z0 = complex(np.mean(roots[close]))
        if abs(z0) <= 1.0:
            z = _refine_root(s.poly(Chart.Z), z0, m)
            out.append((SpherePoint(Chart.Z, z), m))
        else:
            w = _refine_root(s.poly(Chart.W), 1.0 / z0, m)
            out.append((SpherePoint(Chart.W, w), m))
    if inf_mult:
        out.append((SpherePoint.infinity(), inf_mult))
    return out


def _sylvester(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m, n = len(p) - 1, len(q) - 1
    size = m + n
    mat = np.zeros((size, size), dtype=complex)
    for i in range(n):
        mat[i, i : i + m + 1] = p
    for i in range(m):
        mat[n + i, i : i + n + 1] = q
    return mat


def is_on_veronese(s: PolynomialSection, tol: float = 1e-12) -> tuple[bool, float]:
    """Whether s has a multiple zero on CP^1, with the normalized discriminant.

    d = 2 uses |a1^2 - 4 a0 a2| / sum |a_k|^2.  Other degrees use the resultant
    of the two partial derivatives of the binary form, which vanishes exactly
    on multiple zeros including the one at infinity.
    """
    a = s.array
    norm2 = float(np.sum(np.abs(a) ** 2))
    d = s.degree
    if d == 1:
        return False, 1.0
    if d == 2:
        disc = abs(a[1] ** 2 - 4 * a[0] * a[2]) / norm2
    else:
        k = np.arange(d + 1)
        # F(x, y) = sum a_k x^k y^(d-k), highest power of x first
        fx = (k * a)[1:][::-1]
        fy = ((d - k) * a)[:-1][::-1]
        disc = abs(np.linalg.det(_sylvester(fx, fy))) / norm2 ** (d - 1)
    return bool(disc < tol), float(disc)


def rotate_section(s: PolynomialSection, u: SU2) -> PolynomialSection:
    """(u.s)(z) = (conj(b) z + a)^d f((conj(a) z - b) / (conj(b) z + a))."""
    d = s.degree
    num = np.array([np.conj(u.a), -u.b])  # highest first
    den = np.array([np.conj(u.b), u.a])
    total = np.zeros(d + 1, dtype=complex)
    for k, ak in enumerate(s.coeffs):
        if ak == 0:
            continue
        term = np.array([1.0 + 0j])
        for _ in range(k):
            term = np.polymul(term, num)
        for _ in range(d - k):
            term = np.polymul(term, den)
        total += ak * np.pad(term, (d + 1 - len(term), 0))
    return PolynomialSection(d, tuple(total[::-1]))


# ----------------------------------------------------------------------------
# critical points of log|s|_h


def _newton_g(s: PolynomialSection, chart: Chart, c: np.ndarray, iters: int = 80):
    c = c.astype(complex).copy()
    alive = np.ones(len(c), bool)
    for _ in range(iters):
        g, a, b = g_local(s, chart, c)
        jac = np.empty((len(c), 2, 2))
        gx = a + b
        gy = 1j * (a - b)
        jac[:, 0, 0], jac[:, 0, 1] = gx.real, gy.real
        jac[:, 1, 0], jac[:, 1, 1] = gx.imag, gy.imag
        rhs = -np.stack([g.real, g.imag], axis=-1)
        bad = ~np.isfinite(rhs).all(axis=1) | ~np.isfinite(jac).all(axis=(1, 2))
        alive &= ~bad
        jac[bad] = np.eye(2)
        rhs[bad] = 0.0
        step = np.einsum("nij,nj->ni", np.linalg.pinv(jac, rcond=1e-10), rhs)
        dz = step[:, 0] + 1j * step[:, 1]
        lim = 0.25 * (1.0 + np.abs(c))
        big = np.abs(dz) > lim
        dz[big] *= lim[big] / np.abs(dz[big])
        c = c + np.where(alive, dz, 0.0)
        alive &= np.abs(c) < 3.0
    g, a, b = g_local(s, chart, c)
    return c, np.abs(g), np.asarray(a), np.asarray(b) * np.ones(len(c)), alive


def _dedup(points: np.ndarray, radius: float) -> list[int]:
    """Greedy first-come thinning: indices of points with no kept point within ``radius``."""
    points = np.asarray(points, float)
    if not len(points):
        return []
    tree = cKDTree(points)
    dropped = np.zeros(len(points), bool)
    keep: list[int] = []
    for i in range(len(points)):
        if dropped[i]:
            continue
        keep.append(i)
        dropped[tree.query_ball_point(points[i], radius)] = True
    return keep


def g_zeros(
    s: PolynomialSection,
    grid: int = 40,
    eps_zero: float = EPSILON_ZERO,
    tol: float = 1e-9,
    extra_seeds: Sequence[np.ndarray] = (),
) -> list[FoliationSingularity]:
    """Zeros of g (critical points of log|s|_h) by multistart Newton in both charts.

    Degenerate zeros (rank-one Jacobian) that show up at eight or more distinct
    places are reported as representatives of a curve of zeros.
    """
    ticks = np.linspace(-1.5, 1.5, grid)
    xx, yy = np.meshgrid(ticks, ticks)
    seeds = (xx + 1j * yy).ravel()
    seeds = seeds[np.abs(seeds) <= 1.5]
    cands, resid, degen = [], [], []
    zeros = s.zeros_xyz
    starts = [(ch, seeds) for ch in Chart] if grid else []
    # two close zeros trap a saddle in a basin far smaller than the grid spacing;
    # their midpoint is the natural Newton start
    mids = [zeros[i] + zeros[j] for i in range(len(zeros)) for j in range(i)]
    mids = [m / np.linalg.norm(m) for m in mids if np.linalg.norm(m) > 1e-6]
    extra_seeds = [*np.asarray(extra_seeds, float).reshape(-1, 3), *mids]
    if len(extra_seeds):
        ex = np.asarray(extra_seeds, float).reshape(-1, 3)
        charts, coords = from_ambient(ex)
        for ch in Chart:
            sel = charts == ch.value
            if sel.any():
                starts.append((ch, coords[sel]))
    for ch, st in starts:
        if not len(st):
            continue
        c, res, a, b, alive = _newton_g(s, ch, st)
        ok = alive & (res < tol) & (np.abs(c) <= 1.6)
        if not ok.any():
            continue
        pts = to_ambient(ch, c[ok])
        if len(zeros):
            far = np.min(np.linalg.norm(pts[:, None, :] - zeros[None, :, :], axis=2), axis=1) > 10 * eps_zero
            pts = pts[far]
            sel = np.flatnonzero(ok)[far]
        else:
            sel = np.flatnonzero(ok)
        aa, bb = np.abs(a[sel]), np.abs(b[sel])
        cands.append(pts)
        resid.append(res[sel])
        degen.append(np.abs(aa - bb) / (aa + bb) < 1e-6)
    if not cands:
        raise NoSeedsError()
    pts = np.vstack(cands)
    resid = np.concatenate(resid)
    degen = np.concatenate(degen)

    out: list[FoliationSingularity] = []
    dpts = pts[degen]
    curve_reps = _dedup(dpts, 1e-6) if len(dpts) else []
    is_curve = len(curve_reps) >= 8
    if is_curve:
        reps = [curve_reps[i] for i in _dedup(dpts[curve_reps], 0.05)]
        for i in reps:
            out.append(_make_singularity(s, dpts[i], SingularityKind.curve_of_zeros))
        iso_pts = pts[~degen]
    else:
        iso_pts = pts
    for i in _dedup(iso_pts, 1e-6):
        p = _polish(s, iso_pts[i])
        kind = SingularityKind.isolated
        if len(zeros) and chordal_distance(zeros, p).min() < 1e-2:
            kind = SingularityKind.near_section_zero
        out.append(_make_singularity(s, p, kind))
    # polishing can merge near-duplicates
    keep = _dedup(np.array([o.xyz for o in out]), 1e-6) if out else []
    out = [out[i] for i in keep]
    if not out:
        raise NoSeedsError()
    return out


def _polish(s: PolynomialSection, p: np.ndarray) -> np.ndarray:
    charts, coords = from_ambient(p[None, :])
    ch = Chart(charts[0])
    c, *_ = _newton_g(s, ch, coords, iters=8)
    return to_ambient(ch, c)[0]


def _make_singularity(s: PolynomialSection, p: np.ndarray, kind: SingularityKind) -> FoliationSingularity:
    pt = SpherePoint.from_xyz(p)
    g = complex(g_local(s, pt.chart, pt.coord)[0])
    return FoliationSingularity(pt, abs(g), kind, hessian_log_norm(s, pt.chart, pt.coord))


def curvature_check(degree: int, p: SpherePoint | complex, eps: float = 1e-2) -> float:
    """|hol(plaquette) - exp(SIGMA 2 pi i omega(p) eps^2)| for a square centred at p."""
    from .transport import plaquette_residual

    if isinstance(p, SpherePoint):
        chart, c = p.chart, p.coord
    else:
        chart, c = Chart.Z, complex(p)
    return plaquette_residual(degree, c, eps, chart)
