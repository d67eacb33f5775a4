"""Exception types raised across the package."""


class VoxelOptError(Exception):
    """Base class for all errors raised by voxelopt."""


class ShapeError(VoxelOptError, ValueError):
    """Grids, channel counts or field shapes do not line up."""


class ConfigError(VoxelOptError, ValueError):
    """A configuration document is malformed or holds an invalid value.

    ``key`` names the offending entry (``None`` for document-level problems).
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class FormatError(VoxelOptError):
    """A file could not be decoded."""


class BadMagicError(FormatError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class UnsupportedDatatypeError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass
