"""Exception hierarchy shared by the library and the CLI."""


class SdassError(Exception):
    """Base class for all library errors."""


class DegenerateInputError(SdassError, ValueError):
    """Input geometry or data is too small or too degenerate to process."""


class DegenerateKeypointError(DegenerateInputError):
    """A keypoint has too few neighbors (or zero scatter) to define an axis."""


class EmptyFeatureError(DegenerateInputError):
    """No support point contributed to a histogram."""


class DegenerateOutputError(DegenerateInputError):
    """An operation would produce an empty result."""


class UnsupportedInputError(SdassError, ValueError):
    """Input lacks a structure the operation needs (e.g. triangles)."""


class RegistrationError(SdassError):
    """No registration hypothesis gathered enough inliers."""


class PlyParseError(SdassError):
    """Base class for PLY decoding failures."""


class PlyHeaderError(PlyParseError):
    """Missing magic, bad format line or malformed header."""


class PlyUnsupportedError(PlyParseError):
    """The file uses element or property types this reader does not handle."""


class PlyTruncatedError(PlyParseError):
    """The payload ends before all declared elements were read."""


class FeatureFileError(SdassError):
    """A feature container is malformed."""


class ManifestError(SdassError):
    """A run manifest cannot be parsed or replayed."""
