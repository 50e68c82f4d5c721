"""Exception types raised across the package."""


class SplitPlotError(ValueError):
    """Base class for input and feasibility errors."""


class DegenerateError(SplitPlotError):
    """A matrix, factor or estimate is degenerate (zero where it must not be)."""


class InfeasibleDesignError(SplitPlotError):
    """The group sizes do not support a requested estimator."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class TermCapExceeded(SplitPlotError):
    """Exact enumeration would exceed the configured term budget."""
