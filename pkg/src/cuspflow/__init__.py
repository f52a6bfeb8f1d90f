"""cuspflow: spectral and dynamical toolkit for hyperbolic cusp geodesic flow.

Subpackages
-----------
geometry
    Cusp models, phase points, cotangent norms, the exact invariant splitting.
flow
    Closed-form geodesic flow, the level-2 congruence quotient, Liouville
    sampling, correlation functions and truncated Laplace transforms.
"""

from . import errors, flow, geometry
from .errors import (
    ConfigurationError,
    ContourOnRootError,
    DomainError,
    InvalidEnclosureError,
    NearSingularError,
    NonterminationError,
    PoleError,
    ToleranceError,
    UnsupportedDimensionError,
    ValidationError,
)
from .flow import (
    BumpObservable,
    CorrelationRecord,
    FlowState,
    QuotientSurface,
    correlate,
    estimate_area,
    flow_cusp_exact,
    flow_quotient,
    hyperbolic_distance,
    laplace_tail_bound,
    laplace_transform,
    sample_liouville,
)
from .geometry import (
    CotangentVector,
    CuspModel,
    PhasePoint,
    SplittingFrame,
    apply_local_isometry,
    cotangent_norm,
    direction_angle,
    invariant_splitting,
    splitting_frame_at,
)

__version__ = "0.1.0"
