from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _support import random_star_curve, sample, solid_angle_left_area, stereo
from sbs_lab.errors import ChartPoleError, DegenerateLoopError, NonEmbeddedLoopError, UndersampledLoopError
from sbs_lab.geometry import (
    SU2,
    Chart,
    LoopSample,
    Region,
    SpherePoint,
    chart_transition,
    circle_loop,
    enclosed_area,
    great_circle,
    hausdorff,
    loop_is_embedded,
    resample_loop,
    side_of_point,
)

complexes = st.complex_numbers(min_magnitude=0.05, max_magnitude=20, allow_nan=False, allow_infinity=False)


# ----------------------------------------------------------------------------
# charts


@pytest.mark.parametrize(
    "chart, coord, other, expected",
    [(Chart.Z, 2 + 0j, Chart.W, 0.5 + 0j), (Chart.Z, 1j, Chart.W, -1j), (Chart.W, 0.25 + 0j, Chart.Z, 4 + 0j)],
)
def test_chart_transition_examples(chart, coord, other, expected):
    q = chart_transition(SpherePoint(chart, coord))
    assert q.chart is other
    assert abs(q.coord - expected) < 1e-15


def test_chart_transition_pole():
    with pytest.raises(ChartPoleError, match="pole of transition"):
        chart_transition(SpherePoint(Chart.Z, 0j))


@given(complexes)
def test_chart_transition_involution(c):
    p = SpherePoint(Chart.Z, c)
    back = chart_transition(chart_transition(p))
    assert back.chart is Chart.Z
    assert abs(back.coord - c) <= 1e-12 * max(1.0, abs(c))


@given(complexes, st.sampled_from([Chart.Z, Chart.W]))
def test_both_charts_name_the_same_point(c, chart):
    p = SpherePoint(chart, c)
    assert np.allclose(p.xyz(), chart_transition(p).xyz(), atol=1e-12)
    assert p.canonical().admissible


def test_stereographic_convention():
    # projection from the north pole; z = 0 is the south pole
    assert np.allclose(SpherePoint(Chart.Z, 0j).xyz(), [0, 0, -1])
    assert np.allclose(SpherePoint.infinity().xyz(), [0, 0, 1])
    assert np.allclose(SpherePoint(Chart.Z, 1j).xyz(), [0, 1, 0])


# ----------------------------------------------------------------------------
# areas


@pytest.mark.parametrize("radius, expected", [(1.0, 1.0), (1 / np.sqrt(3), 0.5), (2.0, 1.6)])
def test_enclosed_area_examples(radius, expected):
    assert enclosed_area(Region(circle_loop(radius, 512), "left"), 2) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("radius", [0.2, 0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("degree", [1, 2, 4])
def test_circle_area_closed_form(radius, degree):
    area = enclosed_area(Region(circle_loop(radius, 512), "left"), degree)
    assert abs(area - degree * radius**2 / (1 + radius**2)) < 1e-8


def test_area_against_solid_angle_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        curve = random_star_curve(rng)
        loop = LoopSample(sample(curve, 400))
        ref = solid_angle_left_area(sample(curve, 200_000), 2)
        assert abs(enclosed_area(Region(loop, "left"), 2) - ref) < 1e-8


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 5]))
def test_sides_partition_total_area(seed, degree):
    loop = LoopSample(sample(random_star_curve(np.random.default_rng(seed)), 400))
    left = enclosed_area(Region(loop, "left"), degree)
    right = enclosed_area(Region(loop, "right"), degree)
    assert abs(left + right - degree) < 1e-8
    # reversing the orientation swaps the two values
    assert abs(enclosed_area(Region(loop.reversed(), "left"), degree) - right) < 1e-8


def test_area_of_loop_through_both_charts():
    # a great circle through both poles lives in both charts
    loop = great_circle([1.0, 0.0, 0.0], 512)
    assert enclosed_area(Region(loop, "left"), 2) == pytest.approx(1.0, abs=1e-10)
    assert side_of_point(loop, np.array([1.0, 0.0, 0.0])) == "left"


def test_area_errors():
    eight = np.exp(2j * np.pi * np.arange(200) / 200)
    fig8 = LoopSample.from_z(0.5 * np.sin(2 * np.angle(eight)) + 1j * np.sin(np.angle(eight)))
    with pytest.raises(NonEmbeddedLoopError):
        enclosed_area(Region(fig8, "left"), 2)


def test_undersampled_boundary_is_detected():
    t = 2 * np.pi * np.arange(48) / 48
    loop = LoopSample.from_z((0.8 + 0.25 * np.cos(7 * t)) * np.exp(1j * t))
    assert loop_is_embedded(loop)
    with pytest.raises(UndersampledLoopError):
        enclosed_area(Region(loop, "left"), 2)


def test_side_of_point():
    loop = circle_loop(1.0, 256)
    assert side_of_point(loop, SpherePoint(Chart.Z, 0j)) == "left"
    assert side_of_point(loop, SpherePoint.infinity()) == "right"
    assert side_of_point(loop.reversed(), SpherePoint(Chart.Z, 0j)) == "right"


# ----------------------------------------------------------------------------
# resampling and embeddedness


def test_resample_unit_circle():
    out = resample_loop(circle_loop(1.0, 64), 128)
    assert out.n == 128
    radii = np.array([abs(p.coord) for p in out.points])  # 1/|z| = |z| on the unit circle, whichever chart
    assert np.max(np.abs(radii - 1)) < 1e-6


def test_resample_idempotent():
    rng = np.random.default_rng(3)
    loop = resample_loop(LoopSample(sample(random_star_curve(rng), 300)), 300)
    again = resample_loop(loop, loop.n)
    assert np.max(np.linalg.norm(again.xyz - loop.xyz, axis=1)) < 1e-9


def test_resample_ellipse_gap_ratio():
    t = 2 * np.pi * np.arange(90) / 90
    loop = LoopSample.from_z(1.2 * np.cos(t) + 0.3j * np.sin(t))
    gaps = resample_loop(loop, 256).gaps
    assert gaps.max() / gaps.min() < 1.05


def test_resample_preserves_orientation_and_embedding():
    loop = circle_loop(0.7, 80, orientation="-")
    out = resample_loop(loop, 160)
    assert out.orientation == "-"
    assert loop_is_embedded(out)
    assert enclosed_area(Region(out, "left"), 2) == pytest.approx(enclosed_area(Region(loop, "left"), 2), abs=1e-6)


def test_resample_errors():
    with pytest.raises(ValueError):
        resample_loop(circle_loop(1.0, 64), 8)
    with pytest.raises(DegenerateLoopError):
        LoopSample(np.zeros((2, 3)) + [0, 0, 1])


def test_embeddedness_examples():
    t = 2 * np.pi * np.arange(200) / 200
    assert loop_is_embedded(circle_loop(1.0, 200))
    assert not loop_is_embedded(LoopSample.from_z(0.6 * np.sin(2 * t) + 0.9j * np.sin(t)))
    z = np.exp(1j * t)
    z[50] = z[120]
    assert not loop_is_embedded(LoopSample.from_z(z))


@given(st.integers(0, 2**32 - 1))
def test_rotations_preserve_area_and_embedding(seed):
    rng = np.random.default_rng(seed)
    loop = LoopSample(sample(random_star_curve(rng), 300))
    rot = SU2.random(rng)
    moved = rot.apply_loop(loop)
    assert loop_is_embedded(moved)
    assert abs(enclosed_area(Region(moved, "left"), 2) - enclosed_area(Region(loop, "left"), 2)) < 1e-8


def test_su2_mobius_matches_rotation():
    rng = np.random.default_rng(5)
    u = SU2.random(rng)
    z = complex(*rng.normal(size=2))
    moved = (u.a * z + u.b) / (-np.conj(u.b) * z + np.conj(u.a))
    assert np.allclose(u.apply_xyz(stereo(z)), stereo(moved), atol=1e-12)
    assert np.allclose(u.matrix @ u.matrix.T, np.eye(3), atol=1e-12)
    assert np.allclose(u.compose(u.inverse).matrix, np.eye(3), atol=1e-12)


def test_hausdorff_of_concentric_circles():
    a, b = circle_loop(1.0, 256), circle_loop(1.1, 256)
    # chordal distance between the parallels |z| = 1 and |z| = 1.1
    ref = np.linalg.norm(stereo(1.0) - stereo(1.1))
    assert hausdorff(a, b) == pytest.approx(ref, rel=1e-4)


# ----------------------------------------------------------------------------
# exchange formats


def test_loop_json_and_csv_round_trip():
    loop = circle_loop(1.4, 32, center=0.2j, orientation="-")
    data = json.loads(loop.to_json())
    assert data["orientation"] == "-"
    assert {"chart", "re", "im"} <= set(data["points"][0])
    back = LoopSample.from_json(loop.to_json())
    assert back.orientation == "-"
    assert np.allclose(back.xyz, loop.xyz, atol=1e-14)
    csv = loop.to_csv()
    assert csv.splitlines()[0] == "chart,re,im"
    assert np.allclose(LoopSample.from_csv(csv, "-").xyz, loop.xyz, atol=1e-14)
    assert all(p.admissible for p in loop.points)
