"""Exception hierarchy shared by every module."""


class BayesPredError(Exception):
    """Base class for all library errors."""


class ConfigurationError(BayesPredError, ValueError):
    """Invalid parameters, mismatched spaces or malformed measures."""


class UnsupportedOperationError(BayesPredError, TypeError):
    """The operation is not defined on this kind of sample space."""


class DomainError(BayesPredError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConditioningError(BayesPredError, ArithmeticError):
    """Attempt to condition on an event of zero predictive probability."""


class RuleUpdateError(BayesPredError):
    """A rule update failed while folding or simulating a chain.

    ``step`` is the 0-based index of the observation that failed.
    """

    def __init__(self, step, cause):
        super().__init__(f"update failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


class ReplicateError(BayesPredError):
    """A Monte Carlo replicate failed; ``replicate`` is its 0-based index."""

    def __init__(self, replicate, cause):
        super().__init__(f"replicate {replicate} failed: {cause}")
        self.replicate = replicate
        self.cause = cause
