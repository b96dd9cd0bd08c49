"""Exception hierarchy shared across the package."""


class BemError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(BemError):
    """Tensor or table dimensions are inconsistent."""


class ConfigError(BemError):
    """A configuration value violates its constraints."""


class DataError(BemError):
    """A data file is malformed or fails validation."""


class AlignmentError(DataError):
    """Two embedding tables cannot be aligned on a common entity set."""


class ModelFormatError(DataError):
    """A model file is corrupt, truncated or has an unsupported version."""


class TrainingError(BemError):
    """Optimization produced a non-finite quantity."""


class EvalError(BemError):
    """An evaluation task received unusable inputs."""


class NumericalError(BemError):
    """A numerical domain constraint was violated."""
