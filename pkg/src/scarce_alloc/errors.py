"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class ConfigError(ValidationError):
    """Malformed or invalid experiment configuration."""


class UndefinedMetricError(ValidationError):
    """A metric is undefined for the supplied data (e.g. single-class AUROC)."""


class FitError(RuntimeError):
    def __init__(self, message, best_auroc=None):
        super().__init__(message)
        self.best_auroc = best_auroc


class InstanceTooLargeError(ValidationError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(RuntimeError):
    """Budgets cannot be met by any policy."""


class ImpossibleObservationError(ValidationError):
    """Observation has zero probability under the current belief."""


class CapacityCappedWarning(UserWarning):
    pass


class AurocBelowTargetWarning(UserWarning):
    pass
