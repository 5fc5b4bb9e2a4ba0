"""Frozen sign conventions and default tolerances.

The curvature of the Chern connection and the orientation of loops admit two
sign choices each.  ``SIGMA`` relates holonomy to enclosed area,

    hol(loop) = exp(SIGMA * 2*pi*i * Area(left of loop)),

and ``SIGMA_W`` relates the winding of the proportionality coefficient to the
zero count and area on the left side,

    winding(alpha) = SIGMA_W * (m(left) - Area(left)).

Both were fixed once by :func:`calibrate_sigma` and :func:`calibrate_sigma_w`;
the test suite re-runs the experiments and checks they still agree.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

SIGMA = +1
SIGMA_W = +1

# integrator relative tolerance for parallel transport and tracing
RTOL = 1e-10
ATOL = 1e-12

BS_TOL = 1e-6
ARG_TOL = 1e-5
AREA_TOL = 1e-6
HAUSDORFF_TOL = 1e-4
# exclusion radius (chordal) around zeros of the section
EPSILON_ZERO = 1e-4
CHART_SWITCH = 1.5
# samples used when a loop is certified
CERT_SAMPLES = 1024
# normalized discriminant below which empty fibers are expected
DISCRIMINANT_BAND = 1e-3


@dataclass(frozen=True)
class Tolerances:
    """Tolerances that identify an experiment; all must be positive."""

    rtol: float = RTOL
    bs_tol: float = BS_TOL
    arg_tol: float = ARG_TOL
    area_tol: float = AREA_TOL
    hausdorff_tol: float = HAUSDORFF_TOL
    epsilon_zero: float = EPSILON_ZERO

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (isinstance(value, (int, float)) and value > 0):
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_sigma(degree: int = 2, eps: float = 1e-2) -> int:
    """Sign of the holonomy phase of a small positively oriented plaquette."""
    import numpy as np

    from .transport import plaquette_holonomy

    hol, area = plaquette_holonomy(degree, 0.0 + 0.0j, eps)
    return int(np.sign(np.angle(hol) / area))


def calibrate_sigma_w() -> int:
    """Winding of alpha for s = z**2 on the positively oriented equator."""
    from .bundle import PolynomialSection
    from .geometry import circle_loop
    from .transport import alpha_trace

    s = PolynomialSection(2, (0, 0, 1))
    trace = alpha_trace(s, circle_loop(1.0, 512))
    # left side of the equator: both zeros, area 1
    return int(trace.winding // (2 - 1))
