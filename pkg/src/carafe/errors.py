"""Exception taxonomy shared across the package.

Everything raised on purpose derives from CarafeError so callers can catch
the package's failures without also swallowing programming errors.
"""


class CarafeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CarafeError, ValueError):
    """An array has the wrong rank, axis length, or channel count."""


class DTypeError(CarafeError, TypeError):
    """An array has an unsupported dtype, or two operands disagree."""


class GeometryError(CarafeError, ValueError):
    """Resampling geometry is inconsistent (stride, padding, factor, size)."""


class KernelSizeError(CarafeError, ValueError):
    """A reassembly or encoder kernel size violates its constraints."""


class ContractError(CarafeError, ValueError):
    """A value violates an operator contract (e.g. unnormalized kernels)."""


class FormatError(CarafeError, ValueError):
    """A serialized payload is malformed.

    Carries the byte offset where parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(CarafeError, ArithmeticError):
    """A numeric routine produced or encountered a non-finite value."""


class TrainingDiverged(CarafeError, RuntimeError):
    """A training run produced a non-finite loss."""
