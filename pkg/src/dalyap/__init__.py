"""Lyapunov-function estimates of the domain of attraction of a stable fixed point
of a polynomial discrete map."""

from .estimator import (
    GridEstimate,
    OrbitOutcome,
    boundary_probe,
    classify_point,
    compare,
    extract_sublevel,
    rasterize,
    translate_region,
)
from .lyapunov import (
    LyapunovSeries,
    OrbitConfig,
    OrbitSumValue,
    decrement_residual,
    orbit_sum,
    series_eval,
    series_solve,
)
from .mapmodel import (
    Orbit,
    PolyMap,
    eval_map,
    iterate,
    jacobian_at_zero,
    load_map,
    nonlinear_part,
    shift_fixed_point,
)
from .polyalg import Poly, compose, norm_squared_poly
from .spectral import (
    SpectralInfo,
    assemble_spectral_info,
    capture_radius,
    growth_constant,
    solve_stein,
    spectral_radius,
)

__version__ = "0.1.0"
