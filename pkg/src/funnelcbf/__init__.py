"""Model-free control barrier functions derived from funnel control."""

from funnelcbf.errors import (
    DivergenceError,
    DomainError,
    MetricsError,
    StructuralAssumptionError,
)
from funnelcbf.funnel import (
    BarrierPoint,
    FunnelBoundary,
    ReferenceSignal,
    barrier_gradient_output,
    barrier_point,
    barrier_time_derivative,
    barrier_value,
    in_safe_set,
    validate_funnel,
)
from funnelcbf.control import (
    CandidateControlSet,
    GainInterval,
    candidate_set,
    funnel_feedback,
    safety_filter,
    saturated_candidate_set,
    set_contains,
)

__version__ = "0.1.0"
