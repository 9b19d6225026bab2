"""Constant and step-function control synthesis for continuous-time
Hopfield-type recurrent networks, plus the experiment harness that
measures endpoint errors of the different synthesis strategies."""

from .errors import (
    Divergence,
    IntegrationBudgetExceeded,
    NumericsError,
    RankDeficient,
    SingularSystem,
    TargetOffChart,
)
from .flow import (
    FlowResult,
    IntegratorConfig,
    StepSchedule,
    flow_backward,
    flow_forward,
    flow_jacobian_fd,
    simulate_controlled,
)
from .model import (
    Activation,
    ContractionMargins,
    NetworkModel,
    activation_eval,
    canonical_input_matrix,
    contraction_margins,
    drift,
    drift_jacobian,
    linear_activation,
    load_model,
    mindy_activation,
    save_model,
    tanh_activation,
)
from .synthesis import (
    METHOD_BACKWARD,
    METHOD_FORWARD,
    METHOD_LINEAR,
    METHOD_LINEARIZED,
    GramianControl,
    ReachableSetChart,
    SynthesisRequest,
    SynthesisResult,
    gramian_control_linear,
    reachable_chart,
    reachable_control,
    spectral_condition,
    synthesize,
    synthesize_backward,
    synthesize_forward,
    synthesize_linear,
    synthesize_linearized,
)

__version__ = "0.1.0"
