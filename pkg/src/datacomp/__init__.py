"""Host, score, and analyse a designed data competition for source detection."""

from .config import CompetitionConfig
from .design import (
    Hole,
    Interval,
    PriorCurve,
    SplitAssignment,
    SplitConfig,
    SplitReport,
    assign_splits,
    check_split_invariants,
    d_optimal_logistic_points,
    interesting_band,
    randomize_test_order,
    weighted_sample_without_replacement,
)
from .domain import (
    NO_SOURCE,
    FactorDef,
    FactorSpace,
    OutcomeClass,
    OutcomeRecord,
    PredictionEntry,
    RunRecord,
    SourceCatalog,
    Split,
    Submission,
    classify_outcome,
    classify_submission,
    select_test_runs,
    validate_submission,
)
from .exceptions import (
    CompetitionError,
    ConvergenceError,
    InfeasibleDesignError,
    MalformedPredictionError,
    NumericalError,
    SeparationError,
    SingularDesignError,
    SubmissionRejected,
    SubmissionValidationError,
    ValidationError,
)
from .scoring import (
    Leaderboard,
    ScoreWeights,
    SubmissionPolicy,
    flip_point,
    generate_mock_submissions,
    score_run,
    score_submission,
    update_leaderboard,
    weight_robustness,
)

__version__ = "0.1.0"

__all__ = [
    "NO_SOURCE",
    "CompetitionConfig",
    "CompetitionError",
    "ConvergenceError",
    "FactorDef",
    "FactorSpace",
    "Hole",
    "InfeasibleDesignError",
    "Interval",
    "Leaderboard",
    "MalformedPredictionError",
    "NumericalError",
    "OutcomeClass",
    "OutcomeRecord",
    "PredictionEntry",
    "PriorCurve",
    "RunRecord",
    "ScoreWeights",
    "SeparationError",
    "SingularDesignError",
    "SourceCatalog",
    "Split",
    "SplitAssignment",
    "SplitConfig",
    "SplitReport",
    "Submission",
    "SubmissionPolicy",
    "SubmissionRejected",
    "SubmissionValidationError",
    "ValidationError",
    "assign_splits",
    "check_split_invariants",
    "classify_outcome",
    "classify_submission",
    "d_optimal_logistic_points",
    "flip_point",
    "generate_mock_submissions",
    "interesting_band",
    "randomize_test_order",
    "score_run",
    "score_submission",
    "select_test_runs",
    "update_leaderboard",
    "validate_submission",
    "weight_robustness",
    "weighted_sample_without_replacement",
]
