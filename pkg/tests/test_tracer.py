from __future__ import annotations

import json

import numpy as np
import pytest

from sbs_lab.bundle import PolynomialSection, SingularityKind, g_local, g_zeros
from sbs_lab.conventions import Tolerances
from sbs_lab.errors import CertificationError, DegenerateSingularityError
from sbs_lab.geometry import (
    SU2,
    Chart,
    LoopSample,
    SpherePoint,
    ambient_to_tangent,
    circle_loop,
    distance_to_circle,
    from_ambient,
    hausdorff,
    side_of_point,
    tangent_to_ambient,
)
from sbs_lab.tracer import (
    EndEvent,
    SeparatrixPath,
    SpecialCycleCertificate,
    certify_loop,
    classify_singularity,
    find_special_cycles,
    trace_fiber,
    trace_separatrix,
    trace_zero_curve,
)
from sbs_lab.transport import alpha_trace, parallel_transport

S_Z = PolynomialSection.from_coeffs([0, 1, 0])
S_ZZ = PolynomialSection.from_coeffs([0, 0, 1])
S_PM = PolynomialSection.from_coeffs([-1, 0, 1])
S_ZZ1 = PolynomialSection.from_coeffs([0, -1, 1])
EQUATOR = circle_loop(1.0, 512)


def isolated(s):
    return [sg for sg in g_zeros(s) if SingularityKind(sg.kind) is SingularityKind.isolated]


def fd_gradient_jacobian(s, chart, c, h=1e-6):
    """Finite-difference Jacobian of (Re g, -Im g), the gradient of log|s|_h."""

    def grad(z):
        g = complex(g_local(s, chart, z)[0])
        return np.array([g.real, -g.imag])

    return np.column_stack([(grad(c + h) - grad(c - h)) / (2 * h), (grad(c + 1j * h) - grad(c - 1j * h)) / (2 * h)])


def unit_dir(chart, c, v):
    t = tangent_to_ambient(chart, c, v)
    return t / np.linalg.norm(t)


def same_line(u, v, tol):
    return min(np.linalg.norm(u - v), np.linalg.norm(u + v)) < tol


# ----------------------------------------------------------------------------
# local structure


def test_classify_isolated_singularities_against_fd_linearization():
    sings = isolated(S_ZZ1)
    assert sings
    for sg in sings:
        lt = classify_singularity(S_ZZ1, sg)
        assert len(lt.outgoing) + len(lt.incoming) >= 2
        jac = fd_gradient_jacobian(S_ZZ1, sg.position.chart, sg.position.coord)
        lam, vec = np.linalg.eigh(0.5 * (jac + jac.T))
        assert np.allclose(sorted(lt.eigenvalues), lam, rtol=1e-5, atol=1e-6)
        if lt.tag == "saddle":
            unstable = unit_dir(sg.position.chart, sg.position.coord, complex(*vec[:, 1]))
            assert same_line(lt.outgoing[0], unstable, 1e-5)


def test_classify_curve_point_is_degenerate():
    sg = g_zeros(S_Z)[0]
    with pytest.raises(DegenerateSingularityError, match="degenerate singularity"):
        classify_singularity(S_Z, sg)


def test_classify_is_equivariant():
    rot = SU2.random(np.random.default_rng(8))
    moved = S_ZZ1.rotated(rot)
    for sg in isolated(S_ZZ1):
        lt = classify_singularity(S_ZZ1, sg)
        if lt.tag != "saddle":
            continue
        target = rot.apply_xyz(sg.xyz)
        match = min(isolated(moved), key=lambda q: np.linalg.norm(q.xyz - target))
        lt2 = classify_singularity(moved, match)
        assert same_line(rot.apply_xyz(lt.outgoing[0]), lt2.outgoing[0], 1e-5)


# ----------------------------------------------------------------------------
# leaves


def assert_tangent_to_kernel(s, path: SeparatrixPath):
    charts, coords = from_ambient(path.points)
    for ch, c, p, t in zip(charts, coords, path.points, path.tangents):
        g = complex(g_local(s, Chart(ch), c)[0])
        v = complex(ambient_to_tangent(Chart(ch), p, t))
        if abs(g) > 1e-6 and abs(v) > 0:
            assert abs((g * v).imag) / abs(g * v) < 1e-6


def test_trace_from_imaginary_axis_follows_great_circle():
    start = SpherePoint(Chart.Z, 0.0 + 0.01j)
    path = trace_separatrix(S_PM, start, np.array([0.0, 1.0, 0.0]))
    assert path.end_event is EndEvent.closed_onto_start
    assert np.max(np.abs(path.points[:, 0])) < 1e-6  # the plane x = 0 is Re z = 0
    assert np.max(np.abs(np.linalg.norm(path.points, axis=1) - 1)) < 1e-9


def test_trace_from_isolated_singularity_is_finite():
    sings = isolated(S_ZZ1)
    targets = np.array([sg.xyz for sg in sings])
    for k, sg in enumerate(sings):
        lt = classify_singularity(S_ZZ1, sg)
        for d in lt.outgoing:
            path = trace_separatrix(S_ZZ1, sg.xyz, d, ascending=True, targets=targets, start_id=k)
            assert path.end_event in (EndEvent.reached_singularity, EndEvent.hit_section_zero_zone, EndEvent.left_domain)
            assert 0 < path.length < 10
            assert_tangent_to_kernel(S_ZZ1, path)


def test_trace_on_unit_circle_closes():
    path = trace_separatrix(S_Z, SpherePoint(Chart.Z, 1.0), np.array([0.0, 1.0, 0.0]))
    assert path.end_event is EndEvent.closed_onto_start
    assert np.max(distance_to_circle(path.points, [0, 0, 1], 0.0)) < 1e-6
    assert hausdorff(LoopSample(path.points[:-1]), EQUATOR) < 1e-4


def test_separatrix_tangency_on_generic_section():
    s = PolynomialSection.from_coeffs([0.3 - 0.2j, 1.0 + 0.4j, -0.7 + 0.1j])
    fiber = trace_fiber(s)
    assert fiber.paths
    for path in fiber.paths:
        assert_tangent_to_kernel(s, path)
        assert path.end_event is not EndEvent.step_limit


@pytest.mark.parametrize("s, height_axis", [(S_Z, [0, 0, 1]), (S_PM, [1, 0, 0])])
def test_zero_curve_continuation(s, height_axis):
    loop = trace_zero_curve(s, g_zeros(s)[0].xyz)
    assert isinstance(loop, LoopSample)
    assert np.max(distance_to_circle(loop.xyz, height_axis, 0.0)) < 1e-6
    assert np.max(np.abs(g_local(s, Chart.Z, from_ambient(loop.xyz)[1])[0][from_ambient(loop.xyz)[0] == "Z"])) < 1e-9


def test_zero_curve_of_rotated_section():
    rot = SU2.random(np.random.default_rng(21))
    s = S_Z.rotated(rot)
    loop = trace_zero_curve(s, rot.apply_xyz(EQUATOR.xyz[0]))
    assert isinstance(loop, LoopSample)
    assert hausdorff(loop, rot.apply_loop(EQUATOR)) < 1e-6


# ----------------------------------------------------------------------------
# fibers


def test_fiber_of_worked_point():
    certs = find_special_cycles(S_Z)
    assert len(certs) == 1
    assert np.max(distance_to_circle(certs[0].loop.xyz, [0, 0, 1], 0.0)) < 1e-6


def test_fiber_of_double_zero_is_empty():
    assert find_special_cycles(S_ZZ) == []


def test_fiber_of_real_pair():
    certs = find_special_cycles(S_PM)
    assert len(certs) == 1
    assert np.max(distance_to_circle(certs[0].loop.xyz, [1, 0, 0], 0.0)) < 1e-6


def test_fiber_through_separatrix_chain():
    certs = find_special_cycles(S_ZZ1)
    assert len(certs) == 1
    assert certs[0].provenance["kind"] == "separatrix_chain"
    assert all(a <= 2.0 for a in certs[0].junction_angles)


def _check_certificate(s, cert: SpecialCycleCertificate):
    assert cert.arg_deviation < 1e-5
    assert cert.phase_defect < 1e-6
    assert abs(cert.area - round(cert.area)) < 1e-6
    assert cert.winding == 0
    assert cert.extreme_g < 1e-4
    if s.degree == 2:
        sides = {side_of_point(cert.loop, z) for z in s.zeros_xyz}
        assert sides == {"left", "right"}
    # re-derived from raw data by the transport module alone
    assert parallel_transport(s.degree, cert.loop).phase_defect < 1e-6
    # a loop of constant arg alpha, traced without assuming BS, has trivial holonomy
    free = alpha_trace(s, cert.loop, require_bs=False)
    assert free.arg_deviation < 1e-5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_sections_have_one_certified_cycle(seed):
    rng = np.random.default_rng(seed)
    s = PolynomialSection.from_coeffs(rng.normal(size=3) + 1j * rng.normal(size=3))
    certs = find_special_cycles(s)
    assert len(certs) == 1
    _check_certificate(s, certs[0])


def test_degree_four_circle():
    s = PolynomialSection(4, (0, 1, 0, 0, 0))
    certs = find_special_cycles(s)
    assert certs
    for c in certs:
        _check_certificate(s, c)
    # |z|^2 = k / (d - k) with k = 1
    assert any(np.max(distance_to_circle(c.loop.xyz, [0, 0, 1], (1 / 3 - 1) / (1 / 3 + 1))) < 1e-6 for c in certs)


def test_cycles_are_equivariant():
    rng = np.random.default_rng(5)
    s = PolynomialSection.from_coeffs(rng.normal(size=3) + 1j * rng.normal(size=3))
    rot = SU2.random(rng)
    a = find_special_cycles(s)
    b = find_special_cycles(s.rotated(rot))
    assert len(a) == len(b) == 1
    assert hausdorff(rot.apply_loop(a[0].loop), b[0].loop) < 1e-3


# ----------------------------------------------------------------------------
# certification


def test_certify_rejects():
    with pytest.raises(CertificationError):
        certify_loop(S_Z, circle_loop(2.0, 256))  # not BS
    with pytest.raises(CertificationError):
        certify_loop(S_ZZ, EQUATOR)  # winding
    other = SU2.from_rotvec([0.3, 0.0, 0.0]).apply_loop(EQUATOR)
    with pytest.raises(CertificationError):
        certify_loop(S_Z, other)  # BS but arg alpha not constant


def test_certify_respects_tolerances():
    cert = certify_loop(S_Z, EQUATOR)
    with pytest.raises(CertificationError):
        certify_loop(S_Z, EQUATOR, tol=Tolerances(arg_tol=cert.arg_deviation / 10 + 1e-300))


def test_certificate_json_round_trip():
    cert = find_special_cycles(S_Z)[0]
    data = json.loads(json.dumps(cert.to_dict()))
    for key in ("loop", "arg_deviation", "phase_defect", "area", "winding", "separates", "junction_angles", "provenance"):
        assert key in data
    back = SpecialCycleCertificate.from_dict(data)
    assert hausdorff(back.loop, cert.loop) < 1e-12
    assert back.winding == cert.winding and back.area == cert.area
