"""kdslab: numerical laboratory for linear waves on Kerr-de Sitter black holes.

The package provides exact Kerr-de Sitter geometry in horizon-penetrating
coordinates, the energy-current/red-shift machinery, a time-domain solver for
the scalar wave equation on the extended domain, a resonance (quasinormal
mode) solver for the separated stationary operator, and diagnostics that
cross-validate the exponential decay of waves toward the late-time constant.
"""

__version__ = "0.1.0"

from .spacetime import (  # noqa: F401
    BOYER_LINDQUIST,
    KERR_STAR,
    BlackHoleParams,
    CausalClass,
    ChartTransition,
    HorizonGeometry,
    Metric4,
    NotAdmissible,
    NotProportional,
    OutOfChart,
    SingularMetric,
    SpacetimePoint,
    ZeroVector,
    causal_character,
    christoffel,
    delta_r,
    ergosphere_indicator,
    evolution_transition,
    find_horizons,
    inverse_metric,
    metric_bl,
    metric_star,
    sqrt_det,
    surface_gravity,
    transition_functions,
)
