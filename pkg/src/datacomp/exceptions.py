"""Exception hierarchy. Each family maps onto one CLI exit code."""


class CompetitionError(Exception):
    exit_code = 1


class ValidationError(CompetitionError, ValueError):
    """Input failed a structural check (exit code 1)."""

    exit_code = 1


class MalformedPredictionError(ValidationError):
    pass


class SubmissionValidationError(ValidationError):
    """Collects every problem found in a submission, keyed by run_id."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{run_id}: {reason}" for run_id, reason in self.violations]
        super().__init__(
            f"{len(self.violations)} submission problem(s):\n  " + "\n  ".join(lines)
        )


class SubmissionRejected(CompetitionError):
    """A valid submission refused by the leaderboard policy."""

    exit_code = 1


class InfeasibleDesignError(CompetitionError):
    exit_code = 2

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding


class NumericalError(CompetitionError, ArithmeticError):
    exit_code = 3


class SingularDesignError(NumericalError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class SeparationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
