"""Exception hierarchy shared by every AT-AT module."""


class AtatError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(AtatError, ValueError):
    pass


class ShapeError(AtatError, ValueError):
    pass


class DegenerateSegment(AtatError, ValueError):
    """A segment has zero variance (or zero RMS) where a scale is required."""


class DegenerateNoise(AtatError, ValueError):
    """The artifact segment has zero RMS so no mixing coefficient exists."""


class NormalizationError(AtatError, ValueError):
    pass


class InvalidBatch(AtatError, ValueError):
    pass


class InvalidDataset(AtatError, ValueError):
    pass


class InvalidConfig(AtatError, ValueError):
    pass


class FormatError(AtatError, ValueError):
    pass


class IoError(AtatError, OSError):
    pass


class ConfigError(AtatError):
    """Missing or unusable run artefacts (checkpoints, per-SNR models)."""


class DivergenceError(AtatError, FloatingPointError):
    pass
