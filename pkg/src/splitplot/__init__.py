"""Quadratic-form inference for high-dimensional split-plot designs."""

__version__ = "0.1.0"

from .design import (
    DataSet,
    Design,
    EffectDecomposition,
    HypothesisSpec,
    ProjectionPair,
    build_projection,
    canonical_hypothesis,
    decompose_effects,
    validate_design,
)
from .engine import (
    QFMoments,
    TestResult,
    kf_quantile,
    q_statistic,
    qf_moments,
    run_test,
    w_estimated,
    w_standardized,
)
from .estimators import (
    GramCache,
    TraceEstimates,
    a1,
    a2,
    c1_exact,
    c1_subsampled,
    estimate_traces,
    f_hat,
    gram,
    subsample_sizes,
)
from .exceptions import (
    DegenerateError,
    InfeasibleDesignError,
    SplitPlotError,
    TermCapExceeded,
)
from .kron import (
    BetaSpectrum,
    CovarianceModel,
    TraceSet,
    centering_matrix,
    eta,
    f_p_exact,
    spectrum_tvt,
    trace_powers,
)
from .limits import (
    RegimeReport,
    approximation_error,
    classify_regime,
    mixture_quantile,
    sample_mixture,
)
from .simulation import (
    REFERENCE_SAMPLE_SIZES,
    SimConfig,
    SimResult,
    alternative_mean,
    ar_covariance,
    estimate_rejection_rate,
    reference_sample_sizes,
    power_curve,
    sample_dataset,
    simulate_w_tilde,
)
