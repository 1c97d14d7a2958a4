"""Exception types raised by the GALA package."""


class GalaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(GalaError, ValueError):
    """Invalid run configuration or environment."""


class ShapeError(GalaError, ValueError):
    """Matrix dimensions do not agree."""


class GraphError(GalaError, ValueError):
    """Graph invariant or graph-operation precondition violated."""


class DataFormatError(GalaError, ValueError):
    """Malformed input file."""


class NumericalError(GalaError, ArithmeticError):
    """Non-finite values, non-SPD input or solver non-convergence; `layer` names the network layer when known."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


class TrainingDiverged(NumericalError):
    """Loss or gradient became non-finite during training."""

    def __init__(
        self,
        message: str,
        last_finite_epoch: int,
        loss_history: list[float],
        layer: int | None = None,
    ):
        super().__init__(message, layer=layer)
        self.last_finite_epoch = last_finite_epoch
        self.loss_history = loss_history
