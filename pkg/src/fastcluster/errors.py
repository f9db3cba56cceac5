"""Exception types raised by fastcluster."""


class DimensionMismatch(ValueError):
    """Operand shapes do not chain or do not match."""


class IndexOutOfRange(ValueError):
    """A row or column index falls outside the declared shape."""


class DuplicateEntry(ValueError):
    """The same (row, col) position appears more than once."""


class ShapeChainMismatch(ValueError):
    """Factor shapes do not compose to the requested operator shape."""


class LevelTooLarge(ValueError):
    """Requested sparsity level exceeds what the shape can hold."""


class ZeroMatrix(ValueError):
    """Operation undefined on an all-zero matrix."""


class InfeasibleInit(ValueError):
    """Initial factors violate their constraints."""


class SingularWeight(ValueError):
    """A cluster weight is zero where a positive weight is required."""


class DegenerateLandmarks(ValueError):
    """Landmark set produces an unusable kernel block."""


class EmptyIndex(ValueError):
    """Search structure contains no points."""


class BadMagic(ValueError):
    """Binary file does not start with the expected magic number."""


class TruncatedFile(ValueError):
    """Binary file ends before the declared payload."""


class ConfigError(ValueError):
    """Invalid command line or experiment configuration."""
