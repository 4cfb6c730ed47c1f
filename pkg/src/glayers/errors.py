"""Exception hierarchy shared across the toolkit."""


class GlayersError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(GlayersError):
    """Operands have incompatible shapes."""


class DomainError(GlayersError):
    """Argument outside the mathematical domain of the operation."""


class BracketError(GlayersError):
    """Root/minimum bracket is invalid (no sign change, or degenerate)."""


class EvaluationError(GlayersError):
    """A user-supplied callable returned a non-finite value."""


class ConvergenceError(GlayersError):
    """Iteration budget exhausted before reaching tolerance.

    Carries the best iterate seen so far in ``best`` when available.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SolverError(GlayersError):
    """An embedded scalar solve failed (e.g. optimum pinned at a bracket edge)."""


class DegeneracyError(GlayersError):
    """Gradient is undefined, e.g. (near-)repeated eigenvalues in an eigendecomposition."""


class VarianceError(GlayersError):
    """Input is constant (zero variance) where a spread is required."""


class PartitionError(GlayersError):
    """Patch dimensions do not tile the tensor exactly."""


class RankError(GlayersError):
    """Too few samples for the requested matrix operation (N < D)."""


class NumericError(GlayersError):
    """Non-finite intermediate value or ill-conditioned linear algebra."""


class TapeError(GlayersError):
    """A variable was used with a tape it does not belong to."""


class ConfigError(GlayersError):
    """Invalid run configuration."""


class FormatError(GlayersError):
    """Malformed tensor container file."""
