"""Exception types shared across the package."""


class SdeKoopmanError(Exception):
    """Base class for all package-specific errors."""


class EvaluationError(SdeKoopmanError):
    """A model function (drift, diffusion, ...) produced a non-finite value."""


class EigenstructureError(SdeKoopmanError):
    """The selected eigenvalue is complex or its eigenvector is unreliable."""


class AssemblyError(SdeKoopmanError):
    """A collocation matrix entry came out non-finite."""


class SingularSystemError(SdeKoopmanError):
    """A dense linear solve failed; carries a condition-number estimate."""

    def __init__(self, message, condition_estimate=float("inf")):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class ConfigError(SdeKoopmanError):
    """Invalid run configuration or command-line input."""


class QueryFileError(ConfigError):
    """Malformed query-point file; carries the offending line number."""

    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
