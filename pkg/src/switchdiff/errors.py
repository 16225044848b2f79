"""Exception hierarchy shared by all modules."""


class SwitchDiffError(Exception):
    pass


class DomainError(SwitchDiffError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(SwitchDiffError, ArithmeticError):
    """A non-finite value reached a place that requires a finite one."""


class KernelInconsistencyError(SwitchDiffError):
    """Partial sums of an intensity kernel disagree with its declared total."""


class ParameterError(SwitchDiffError, ValueError):
    pass


class DegenerateEstimateError(SwitchDiffError):
    """Every Monte Carlo sample was excluded."""


class ScenarioError(SwitchDiffError):
    """Malformed scenario file or command line."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
