"""Exception hierarchy shared by all modules."""


class MovingFrontError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MovingFrontError, ValueError):
    pass


class NoRootFound(MovingFrontError):
    pass


class AmbiguousRoot(MovingFrontError):
    def __init__(self, message, brackets=()):
        super().__init__(message)
        self.brackets = list(brackets)


class MixedSides(MovingFrontError):
    pass


class WrongSide(MovingFrontError, ValueError):
    pass


class BoundsOutOfDomain(MovingFrontError):
    pass


class NoPeriodicConvergence(MovingFrontError):
    def __init__(self, max_periods, residual):
        super().__init__(
            f"periodic regime not reached after {max_periods} periods "
            f"(residual {residual:.3e})"
        )
        self.max_periods = max_periods
        self.residual = residual


class NewtonDivergence(MovingFrontError):
    pass


class LayerUnresolved(MovingFrontError):
    pass


class NoSignChange(MovingFrontError):
    pass


class SingularSystem(MovingFrontError):
    pass


class OutOfDomain(MovingFrontError, ValueError):
    pass


class LayerCoversDomain(MovingFrontError):
    pass


class NearSingularLayerPosition(MovingFrontError):
    def __init__(self, node, value):
        super().__init__(
            f"node {node}: |1 - 2 x_tp| = {value:.3e} is inside the division guard"
        )
        self.node = node
        self.value = value


class ZeroDenominator(MovingFrontError, ZeroDivisionError):
    pass


class InsufficientData(MovingFrontError, ValueError):
    pass
