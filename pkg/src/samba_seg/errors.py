"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with an operation."""


class ContractError(ValueError):
    """A documented precondition was violated."""


class NonFiniteError(FloatingPointError):
    """A forward computation produced NaN or Inf from finite inputs."""


class GradientCheckError(RuntimeError):
    """The finite-difference oracle could not evaluate the function."""


class ManifestError(RuntimeError):
    """A dataset layout is incomplete or inconsistent."""


class ValidationError(ValueError):
    """Data violates a declared invariant (e.g. unknown class index)."""


class MetricError(ValueError):
    """A metric is undefined for the given counts."""


class TrainingError(RuntimeError):
    """Training hit a numerical failure (non-finite loss or gradient)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(ValueError):
    """Configuration text or values are invalid."""


class CheckpointError(RuntimeError):
    """A checkpoint file is corrupt, truncated or of an unknown version."""
