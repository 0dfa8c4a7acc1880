"""CBF safety filters for control-affine systems, with multi-CBF synthesis
and sampled-data safety bounds."""

from .core import (
    GRAVITY,
    BarrierStack,
    ClassKe,
    ControlAffineSystem,
    PolytopicInputSet,
    QuadraticBarrier,
    chebyshev,
    eval_barrier,
    grad_barrier,
    lie_derivatives,
    make_double_integrator,
    make_planar_quadrotor,
    max_input_norm,
    support_function,
)
from .filter import (
    AffineInputConstraint,
    CertifyResult,
    certify,
    constraint_form,
    epsilon_bar,
    epsilon_threshold,
    find_inactive_on_level_set,
    inactivity_map,
    is_filter_inactive,
)
from .sampled import (
    SampledDataConstants,
    closed_loop_lipschitz,
    deviation_bound,
    estimate_sup_norms,
    max_sampling_time,
    required_tightening,
    worst_case_deviation,
)
from .sim import (
    ConstantPolicy,
    Metrics,
    PdTrackingPolicy,
    Trajectory,
    compute_metrics,
    simulate,
    unsafe_threshold_input,
)
from .synthesis import (
    BarrierParamBox,
    SynthesisConfig,
    SynthesisResult,
    activity_check,
    containment_check,
    feasibility_check,
    synthesize,
    volume_estimate,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
