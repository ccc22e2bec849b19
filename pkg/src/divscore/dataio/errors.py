"""Error taxonomy for file codecs and loaders.

Every parse failure is a distinct subclass of :class:`FormatError` so callers
can tell a corrupt header from a short payload without string matching.
"""


class FormatError(ValueError):
    """A file does not conform to its declared binary or text format."""


class BadMagicError(FormatError):
    """Magic number at the start of the payload is wrong."""


class BadVersionError(FormatError):
    """Recognized magic but unsupported format version."""


class TruncatedError(FormatError):
    """Payload ends before the declared dimensions are satisfied."""


class DimOverflowError(FormatError):
    """Declared dimensions are implausibly large or invalid."""


class EmptyTensorError(FormatError):
    """Tensor with zero rows or columns."""


class SizeMismatchError(FormatError):
    """Payload length disagrees with the declared shape."""


class NonFiniteError(FormatError):
    """NaN or infinity found where only finite values are allowed."""


class SchemaError(ValueError):
    """A table, config, or manifest violates its structural contract."""
