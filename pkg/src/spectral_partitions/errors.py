"""Exception types shared across the package."""


class DimensionError(ValueError):
    """A field, block or index does not fit the grid it is used with."""


class DomainError(ValueError):
    """A geometric object leaves the computational box."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolver hit its iteration cap.

    ``best_residual`` holds the largest residual among the wanted pairs at
    the moment the solver gave up.
    """

    def __init__(self, message, best_residual=float("nan"), phase=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.phase = phase


class NonDifferentiableError(ArithmeticError):
    """The requested eigenvalue belongs to a cluster, so its gradient is a
    subgradient only."""


class InsufficientDataError(ValueError):
    pass
