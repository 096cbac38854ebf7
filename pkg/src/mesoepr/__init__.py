"""Quantify delta-scopic EPR steering and certify boson content from the Duan parameter."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    BinnedInferenceRegressor,
    BinningPolicy,
    InferenceStats,
    JointDistribution,
    SampleRecord,
    Setting,
    build_joint,
    conditional_moments,
    delta_inflated_variance,
    inference_stats,
)
from .fock import (  # noqa: E402
    CertificationResult,
    DuanCertifier,
    FockVector,
    certify,
    dl_bound,
    duan_fock,
    min_duan_over_support,
    nbar_lower_bound,
    tmss_fock,
)
from .gaussian import (  # noqa: E402
    GaussianTwoModeState,
    apply_loss,
    duan_analytic,
    epsilon_analytic,
    inference_variance_analytic,
    two_mode_squeezed,
    vacuum,
)
from .steering import (  # noqa: E402
    DeltaLRParams,
    SchwingerConfig,
    SteeringEstimator,
    SteeringReport,
    critical_delta,
    delta_j,
    epsilon,
    epsilon_delta_gaussian,
    epsilon_delta_general,
    schwinger_normalize,
    threshold_epsilon,
)

__all__ = [
    "__version__",
    "BinnedInferenceRegressor",
    "BinningPolicy",
    "InferenceStats",
    "JointDistribution",
    "SampleRecord",
    "Setting",
    "build_joint",
    "conditional_moments",
    "delta_inflated_variance",
    "inference_stats",
    "CertificationResult",
    "DuanCertifier",
    "FockVector",
    "certify",
    "dl_bound",
    "duan_fock",
    "min_duan_over_support",
    "nbar_lower_bound",
    "tmss_fock",
    "GaussianTwoModeState",
    "apply_loss",
    "duan_analytic",
    "epsilon_analytic",
    "inference_variance_analytic",
    "two_mode_squeezed",
    "vacuum",
    "DeltaLRParams",
    "SchwingerConfig",
    "SteeringEstimator",
    "SteeringReport",
    "critical_delta",
    "delta_j",
    "epsilon",
    "epsilon_delta_gaussian",
    "epsilon_delta_general",
    "schwinger_normalize",
    "threshold_epsilon",
]
