"""
shrinkt exceptions

Every error raised by the library derives from ShrinktError so callers can
catch the whole family; the CLI maps the subclasses onto exit codes.
"""


class ShrinktError(Exception):
    """Base class for all shrinkt errors."""


class DomainError(ShrinktError, ValueError):
    """Argument outside the domain of a special function or distribution."""


class EstimationError(ShrinktError):
    """Hyperparameters cannot be estimated from the supplied variances."""


class LikelihoodError(ShrinktError):
    """Likelihood evaluation failed (NaN input or an all-zero row)."""


class NegligibleComponentError(ShrinktError):
    """A truncated-t segment carries no representable probability mass."""


class DataError(ShrinktError, ValueError):
    """Input file or table is malformed."""


class ConfigError(ShrinktError, ValueError):
    """Run configuration is invalid."""


class AcceptanceError(ShrinktError):
    """Bench results fail one or more acceptance thresholds."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures) or "acceptance check failed")
