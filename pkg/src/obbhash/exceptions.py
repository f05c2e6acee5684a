"""Exception types raised across the package."""

from sklearn.exceptions import NotFittedError


class ObbHashError(Exception):
    """Base class for all package-specific errors."""


class EmptyCloudError(ObbHashError, ValueError):
    """A point cloud with zero points was supplied."""


class NonFiniteInputError(ObbHashError, ValueError):
    """Input coordinates contain NaN or infinity."""


class BinOutOfRangeError(ObbHashError, IndexError):
    """A bin index lies outside (block 1..24, proj 1..div)."""


class EmptyIndexError(ObbHashError, NotFittedError):
    """A query was issued against a structure that holds no points."""


class KZeroError(ObbHashError, ValueError):
    """k-nearest-neighbor query with k < 1."""


class RNonPositiveError(ObbHashError, ValueError):
    """Radius query with r <= 0."""


class LayerTooLargeError(ObbHashError, ValueError):
    """Requested octree depth would exceed the interior-node memory guard."""


class ParseError(ObbHashError, ValueError):
    """A cloud file could not be parsed.

    Carries ``path`` and, when known, the 1-based ``line`` (text formats)
    or byte ``offset`` (binary formats) of the failure.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        detail = str(message)
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        if offset is not None:
            detail = f"{detail} (byte {offset})"
        super().__init__(detail)
        self.path = path
        self.line = line
        self.offset = offset


class CountMismatchError(ParseError):
    """Header-declared element count disagrees with the records present."""


class UnsupportedFormatError(ObbHashError, ValueError):
    """The file is not one of the supported cloud formats."""


class WriteError(ObbHashError, OSError):
    """Writing an output file failed."""


class ChecksumMismatchError(ObbHashError, RuntimeError):
    """Two exact structures disagreed on a query result during a benchmark run."""

    def __init__(self, model, structure, parameter, query_index):
        super().__init__(
            f"result checksum mismatch: model={model!r} structure={structure!r} "
            f"parameter={parameter!r} query={query_index}"
        )
        self.model = model
        self.structure = structure
        self.parameter = parameter
        self.query_index = query_index
