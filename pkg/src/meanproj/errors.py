"""Exception hierarchy shared by all modules."""


class MeanProjError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(MeanProjError, ValueError):
    pass


class SingularMatrixError(MeanProjError, ArithmeticError):
    """Raised when elimination meets a pivot below the singularity threshold."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ParameterError(MeanProjError, ValueError):
    pass


class RankError(MeanProjError, ValueError):
    pass


class EvaluationError(MeanProjError, ValueError):
    """A function returned a non-finite value, or was evaluated off its domain."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class EnumerationSizeError(MeanProjError, ValueError):
    pass


class DegeneracyError(MeanProjError, ArithmeticError):
    """A sample hit the (measure-zero) degenerate event and could not be redrawn."""


class DiscretizationError(MeanProjError, ValueError):
    pass


class CrossCheckError(MeanProjError, AssertionError):
    """Two independent computation paths disagreed beyond tolerance."""


class InternalContradictionError(MeanProjError, RuntimeError):
    pass
