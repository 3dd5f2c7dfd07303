from .errors import (
    AlgebraicLoopError,
    ConsistencyError,
    IllPosedNetworkError,
    InvalidTransferError,
    InvalidUsageError,
    NetVarianceError,
    NoExcitationMarginError,
    OptimizationError,
    PoleOnUnitCircleError,
    PredictorUnstableError,
    UnidentifiableError,
    UnstableFilterError,
)
from .experiment import (
    ExperimentConfig,
    ResultBundle,
    SetupConfig,
    SweepConfig,
    export_plotdata,
    reproduce_case_study,
    run_montecarlo,
)
from .formats import format_network, load_network, parse_config, parse_network
from .identify import (
    BJStructure,
    FitResult,
    InputOrders,
    PEMOptions,
    fit_pem,
    gradient,
    gradient_covariance,
    module_response_covariance,
    param_covariance,
    predict,
    residual_whiteness,
)
from .immersion import (
    ImmersedNetwork,
    PredictorSet,
    check_consistency_conditions,
    enumerate_valid_predictor_sets,
    grid_spectral_factor,
    immerse,
    immersed_noise_spectrum,
)
from .lti import NoiseShape, Polynomial, RationalTransfer, noise_spectrum, tf_add, tf_mul
from .network import (
    Excitation,
    FrequencyGrid,
    NetworkModel,
    SignalRecord,
    SignalResponses,
    analytic_cross_spectrum,
)
from .variance import (
    ConditionCurve,
    CovarianceCurve,
    CurveLabel,
    SpectralBlock,
    asymptotic_cov_full,
    asymptotic_cov_immersed,
    build_spectral_block,
    comparison_condition,
    d_optimality_compare,
    e_optimality_compare,
    sample_covariance,
    schur_complement,
    transfer_covariance_matrix,
    welch_cross_spectrum,
)

name = "netvariance"
