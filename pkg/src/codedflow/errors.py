"""Exception types raised across the library."""


class CodedFlowError(Exception):
    """Base class for all library-specific errors."""


class CyclicTopologyError(CodedFlowError):
    """Raised when an operation requires an acyclic network but finds a cycle."""


class SingularIFError(CodedFlowError):
    """Raised when (I - F) is numerically singular (condition estimate above 1e12)."""


class SparsityViolation(CodedFlowError):
    """Raised when a coding coefficient sits outside the pattern the topology allows."""


class UnknownEdge(CodedFlowError):
    """Raised when an edge index does not exist in the topology."""


class EmptySupport(CodedFlowError):
    """Raised when a discrete input distribution has no support points."""


class DensityUnderflow(CodedFlowError):
    """Raised when a log-density falls below the representable floor (< -700)."""


class SingularSystemMatrix(CodedFlowError):
    """Raised when the end-to-end transfer matrix cannot be inverted reliably."""


class CostGuardError(CodedFlowError):
    """Raised when a request would exceed the configured quadrature/sampling cost guards."""


class StepTooSmallError(CodedFlowError):
    """Raised when a finite-difference step is dominated by Monte-Carlo noise."""


class ConfigError(CodedFlowError):
    """Raised on malformed or inconsistent run configuration text."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column
