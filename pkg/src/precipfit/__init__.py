"""Daily precipitation amount modeling.

Five candidate models (exponential, Gamma, Weibull, mixed exponential, and
the mixed Gamma-Weibull), two estimation routes (maximum likelihood and the
moment-constrained mixture grid search), and likelihood-ratio model
selection against the full-model ML fit with an AIC fallback.
"""

from .distributions import (
    Family,
    MgwParams,
    Moments,
    PdfShape,
    classify_pdf_shape,
    gamma_skewness,
    gamma_skewness_to_alpha,
    log_likelihood,
    mgw_logpdf,
    mgw_moments,
    mgw_pdf,
    sample_mgw,
    weibull_skewness,
    weibull_skewness_to_k,
)
from .estimators import (
    CvLessThanOneError,
    Degeneracy,
    EstimationError,
    Fit,
    FitFailure,
    InnerEmResult,
    Method,
    MixtureGridSpec,
    MlConfig,
    NoAdmissibleCandidateError,
    NonIdentifiableError,
    PriorFits,
    StepLeavesDomainError,
    beta_star_roots,
    compute_prior_fits,
    fit_exponential_ml,
    fit_gamma_ml,
    fit_mgw_ml,
    fit_mixed_exponential_em,
    fit_weibull_ml,
    mgw_em_inner,
    mgw_gradient_step,
    mgw_initial_sets,
    mgw_score,
    mixture_estimate_mgw,
)
from .pipeline import (
    CALIBRATION_END,
    CALIBRATION_START,
    OFFSET_MM,
    WET_THRESHOLD_MM,
    DailyRecord,
    MalformedRecordError,
    SampleSummary,
    ShiftedModel,
    ingest,
    read_csv,
    restore_location,
    summarize,
)
from .selection import (
    CANDIDATE_KEYS,
    MGW_ML_KEY,
    LrtStatus,
    LrtVerdict,
    SelectionReport,
    SelectionRule,
    aic,
    degrees_of_freedom,
    display_label,
    free_parameter_count,
    lrt,
    run_lrts,
    select_model,
)
from .special import chi_square_sf, digamma, log_gamma, regularized_gamma_q, trigamma

__version__ = "0.1.0"
