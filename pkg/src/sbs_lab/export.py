"""JSON and SVG output.

Pictures use the stereographic projection from the point antipodal to the
centroid of the zeros of ``s``.  The zeros then sit near the origin of the
drawing, and cycles separating them stay in frame.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bundle import PolynomialSection, g_zeros
from .errors import NoSeedsError
from .geometry import LoopSample, SU2

SVG_SIZE = 480
MAX_EXTENT = 12.0


def dumps(obj) -> str:
    """Deterministic JSON text (insertion-ordered keys, trailing newline)."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def view_rotation(s: PolynomialSection) -> SU2:
    """Rotation taking the centroid direction of Z(s) to the south pole z = 0."""
    zeros = s.zeros_xyz_with_multiplicity
    if len(zeros) == 0:
        return SU2.identity()
    c = zeros.mean(axis=0)
    if np.linalg.norm(c) < 1e-9:
        c = zeros[0]
    return SU2.taking(c, [0.0, 0.0, -1.0])


def project(xyz: np.ndarray, rot: SU2) -> np.ndarray:
    p = rot.apply_xyz(np.atleast_2d(xyz))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (p[:, 0] + 1j * p[:, 1]) / (1.0 - p[:, 2])


def _runs(z: np.ndarray, extent: float) -> list[np.ndarray]:
    """Split a closed polyline into the maximal runs inside |z| <= extent."""
    z = np.append(z, z[:1])
    inside = np.isfinite(z) & (np.abs(z) <= extent)
    runs, cur = [], []
    for zi, ok in zip(z, inside):
        if ok:
            cur.append(zi)
        elif cur:
            runs.append(np.array(cur))
            cur = []
    if cur:
        runs.append(np.array(cur))
    if len(runs) > 1 and inside[0] and inside[-1]:
        runs[0] = np.concatenate([runs.pop(), runs[0]])
    return [r for r in runs if len(r) > 1]


def render_svg(
    s: PolynomialSection,
    cycles: Iterable[LoopSample],
    singular_points: np.ndarray | None = None,
    title: str = "",
    size: int = SVG_SIZE,
) -> str:
    """SVG with zeros of s (black disks), zeros of g (red crosses) and cycles (blue)."""
    rot = view_rotation(s)
    cycles = list(cycles)
    if singular_points is None:
        try:
            singular_points = np.array([sg.xyz for sg in g_zeros(s)])
        except NoSeedsError:
            singular_points = np.zeros((0, 3))
    zs = project(s.zeros_xyz, rot) if len(s.zeros_xyz) else np.zeros(0, complex)
    gs = project(singular_points, rot) if len(singular_points) else np.zeros(0, complex)
    reach = [np.abs(zs[np.isfinite(zs)]), np.abs(gs[np.isfinite(gs)])]
    for lp in cycles:
        zc = project(lp.xyz, rot)
        reach.append(np.abs(zc[np.isfinite(zc)]))
    finite = np.concatenate([r for r in reach if len(r)] or [np.ones(1)])
    extent = float(np.clip(1.2 * np.quantile(finite, 0.9), 1.5, MAX_EXTENT))
    scale = size / (2 * extent)

    def xy(z: complex) -> str:
        return f"{(z.real + extent) * scale:.2f},{(extent - z.imag) * scale:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    # unit circle of the view chart: the great circle orthogonal to the view axis
    out.append(
        f'<circle cx="{size / 2:.2f}" cy="{size / 2:.2f}" r="{scale:.2f}" fill="none" stroke="#bbbbbb" stroke-dasharray="4,4"/>'
    )
    for lp in cycles:
        for run in _runs(project(lp.xyz, rot), extent):
            pts = " ".join(xy(z) for z in run)
            out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4fbf" stroke-width="1.5"/>')
    for z in gs:
        if np.isfinite(z) and abs(z) <= extent:
            x, y = (float(t) for t in xy(z).split(","))
            out.append(f'<path d="M{x - 4:.2f},{y - 4:.2f}L{x + 4:.2f},{y + 4:.2f}M{x - 4:.2f},{y + 4:.2f}L{x + 4:.2f},{y - 4:.2f}" stroke="#c02020"/>')
    for z in zs:
        if np.isfinite(z) and abs(z) <= extent:
            x, y = xy(z).split(",")
            out.append(f'<circle cx="{x}" cy="{y}" r="4" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str | Path, s: PolynomialSection, cycles: Sequence[LoopSample], **kw) -> None:
    Path(path).write_text(render_svg(s, cycles, **kw))
