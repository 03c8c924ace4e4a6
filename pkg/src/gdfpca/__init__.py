"""Graph-aware dynamic functional principal component analysis.

Estimation of frequency-domain covariance structure for multivariate
functional time series, sparse inverse eigen-matrices via a joint graphical
Lasso, Whittle-likelihood score extraction, and curve reconstruction.
"""

from .errors import (
    ConfigError,
    CSVParseError,
    DataError,
    DegeneratePrecisionError,
    GDFPCAError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
    NumericalError,
    PhaseAlignmentError,
    SolverError,
)
from .fpca import (
    METHODS,
    ComponentBlock,
    FitConfig,
    FitResult,
    MissingGraphError,
    TruncationConfig,
    fit,
    fit_all,
    nmse,
    nmse_profile,
    select_K,
)
from .funcdata import (
    FreqGrid,
    MFTSObservations,
    SmoothedMFTS,
    TimeGrid,
    WhittakerSmoother,
    inner_product,
    load_csv,
    presmooth_curve,
    presmooth_panel,
    save_csv,
)
from .graphical import (
    ADMMConfig,
    GraphEstimate,
    PrecisionSet,
    aic_select,
    constrained_mle,
    constrained_precisions,
    estimate_graph,
    estimate_precisions,
    joint_glasso,
    partial_mutual_info,
    partial_spectrum,
    threshold_graph,
)
from .scores import (
    ScoreArray,
    WhittleCache,
    conditional_objective,
    extract_scores,
    integrate_scores,
    reconstruct,
    reconstruct_centered,
    static_scores,
    whittle_loglik,
)
from .simulate import GroundTruth, SimConfig, generate
from .spectral import (
    EigenMatrixSet,
    EigenSystem,
    FunctionalFilterSet,
    SpectralConfig,
    StaticEigenbasis,
    align_phases,
    compute_filters,
    eigendecompose_kernel,
    eigenmatrices,
    estimate_eigensystem,
    lag_window_kernel,
    pooled_autocov,
    static_eigenbasis,
)

__version__ = "0.1.0"
