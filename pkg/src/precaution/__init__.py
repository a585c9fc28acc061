"""Two-stage decision analysis under learning.

Computes second-stage values as support functions of payoff sets, the value
of information under signals of different informativeness, optimal
first-stage decisions, and geometric / first-order certificates for the
convexity in the belief of payoff differences — the property that decides
whether better future information lowers the optimal decision today.
"""

__version__ = "0.1.0"

from .decision_core import (
    BoxFeasible,
    DecisionModel,
    FiniteFeasible,
    MonotonicityVerdict,
    OptResult,
    PrecautionReport,
    SolverConfig,
    delta_value,
    second_stage_value,
    monotonicity_scan,
    optimize_first,
    payoff_set,
    precautionary_compare,
    signal_value,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    DomainViolation,
    EmptyStarDifference,
    InfeasibleFirstDecision,
    NoCertificate,
    PrecautionError,
    PriorMismatch,
    StateMismatch,
    ZeroMarginal,
)
from .model_zoo import (
    Crra,
    Exp,
    FamilySpec,
    FocCertificate,
    LogFn,
    Power,
    Quadratic,
    build_model,
    foc_certificate,
    scaling_identity_check,
)
from .prob import (
    Dist,
    Garbling,
    JointSignalModel,
    StateSpace,
    TestReport,
    blackwell_sample_test,
    dump_joint_model,
    full_info,
    garble,
    informativeness_gap,
    load_joint_model,
    no_info,
    posterior,
    prior_of,
    sample_simplex,
)
from .support_geometry import (
    CertificateReport,
    ConvexityVerdict,
    PayoffSet,
    convexity_probe,
    decomposition_certificate,
    maximal_elements,
    minkowski_sum,
    star_difference,
    support_value,
    support_values,
)
