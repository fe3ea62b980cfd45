"""Exception types shared across the package.

Grouped by how the command line maps them to exit codes: usage problems
(bad flags, malformed config) exit 1, data problems (unreadable CSV,
inconsistent splits) exit 2, numerical failures (non-finite values during
integration, forward passes or training) exit 3.
"""


class UsageError(ValueError):
    """Bad command-line usage or malformed configuration."""


class DataError(ValueError):
    """Problem with an input data file (CSV parse, split mismatch, ...)."""


class ShapeError(ValueError):
    """Tensor operands with incompatible shapes."""


class DomainError(ValueError):
    """Operand outside the mathematical domain of an operation."""


class ParameterError(ValueError):
    """Invalid model hyperparameter (non-positive decay, zero widths, ...)."""


class GraphError(RuntimeError):
    """Misuse of the computation graph (non-scalar loss, repeated backward)."""


class ForwardError(RuntimeError):
    """Non-finite values produced during a forward pass.

    Carries the index of the offending layer.
    """

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


class TrainingError(RuntimeError):
    """Non-finite loss or gradient during optimization.

    Carries the iteration index and the trace collected up to the failure.
    """

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class IntegrationError(RuntimeError):
    """Non-finite state during numerical integration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
