"""Response-surface modelling of competition outcomes."""

from .glm import (
    BINOMIAL,
    GAUSSIAN,
    GaussianGLM,
    GlmFit,
    LogisticGLM,
    fit_linear,
    fit_logistic,
    irls_logistic,
    is_separated,
)
from .selection import LRTResult, SelectionResult, default_pool, likelihood_ratio_test, select_model
from .surfaces import (
    DifferenceSurface,
    Surface,
    bonferroni,
    default_grid,
    difference_surface,
    make_grid,
    predict_surface,
    probability_of_agreement,
    significance_bucket,
)
from .terms import DesignMatrix, Term, TermSpec, as_frame

__all__ = [
    "BINOMIAL",
    "GAUSSIAN",
    "DesignMatrix",
    "DifferenceSurface",
    "GaussianGLM",
    "GlmFit",
    "LRTResult",
    "LogisticGLM",
    "SelectionResult",
    "Surface",
    "Term",
    "TermSpec",
    "as_frame",
    "bonferroni",
    "default_grid",
    "default_pool",
    "difference_surface",
    "fit_linear",
    "fit_logistic",
    "irls_logistic",
    "is_separated",
    "likelihood_ratio_test",
    "make_grid",
    "predict_surface",
    "probability_of_agreement",
    "select_model",
    "significance_bucket",
]
