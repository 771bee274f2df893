"""
Exception hierarchy
"""


class TiledMatmulError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(TiledMatmulError, ValueError):
    pass


class CapacityError(TiledMatmulError, ValueError):
    """Operand does not fit the persistent on-chip buffer."""


class ProtocolError(TiledMatmulError, RuntimeError):
    """Call sequence the device cannot honor, e.g. reusing A before any load."""


class MatrixFormatError(TiledMatmulError, ValueError):
    pass


class BadMagicError(MatrixFormatError):
    pass


class TruncatedPayloadError(MatrixFormatError):
    pass


class UnknownDtypeError(MatrixFormatError):
    pass


class InvariantViolation(TiledMatmulError, AssertionError):
    """An internal cross-check between two models of the same quantity failed."""
