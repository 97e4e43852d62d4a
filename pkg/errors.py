"""
Exception hierarchy shared by every module of the laboratory.

The CLI maps any LabError to exit code 2; negative verdicts are not exceptions.
"""


class LabError(Exception):
    """Base class for all configuration, parsing and evaluation failures."""


class ExpressionSyntaxError(LabError):
    """Malformed expression text. `position` is 1-based; len(text) + 1 means end of input."""

    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class VariableError(ExpressionSyntaxError):
    """Variable index out of range or variable from the wrong set."""


class EvaluationDomainError(LabError):
    """
    An operation left its mathematical domain (log of a non-positive number,
    division by zero, 0 to a negative power, overflow, ...).

    Args:
        message: What went wrong
        node_text: Printed form of the offending sub-expression
        index: Position of the first offending element for vectorized evaluation
    """

    def __init__(self, message, node_text, index=None):
        self.node_text = node_text
        self.index = index
        super().__init__(f"{message} in '{node_text}'")


class ParameterError(LabError):
    """A numeric parameter violates its invariant (s, a, beta, tolerance, grid, domain)."""


class PreconditionError(LabError):
    """A hypothesis of a check does not hold on the sampled points."""


class SampleEvaluationError(LabError):
    """Evaluation failed inside a sweep; carries the offending sample."""

    def __init__(self, cause, sample):
        self.cause = cause
        self.sample = sample
        super().__init__(f"{cause} (sample {sample})")


class OptimizationError(LabError):
    """Every start of the solver failed."""

    def __init__(self, message, traces):
        self.traces = traces
        super().__init__(message)


class ConfigError(LabError):
    """The run configuration is malformed or references unknown names."""
