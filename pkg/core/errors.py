"""
Error hierarchy for the respiratory sound pipeline.
Every failure raised by the library derives from RespireError so the CLI
can map it to an exit code in one place.
"""


class RespireError(Exception):
    """Base class for all pipeline errors"""
    exit_code = 2


class InvalidConfig(RespireError, ValueError):
    """A configuration value is outside its documented range"""


# --- corpus ---------------------------------------------------------------

class ManifestError(RespireError):
    """Problem with one manifest row"""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingColumn(ManifestError):
    pass


class UnknownLabel(ManifestError):
    pass


class UnknownSplit(ManifestError):
    pass


class DuplicatePath(ManifestError):
    pass


class WavDecodeError(RespireError):
    pass


class NotRiff(WavDecodeError):
    pass


class UnsupportedEncoding(WavDecodeError):
    pass


class TruncatedData(WavDecodeError):
    pass


class EmptySignal(RespireError, ValueError):
    pass


class InvalidSignal(RespireError, ValueError):
    pass


class IoError(RespireError):
    pass


class SchemaMismatch(RespireError):
    pass


# --- mfcc -----------------------------------------------------------------

class SignalTooShort(RespireError, ValueError):
    pass


class WindowTooShort(RespireError, ValueError):
    pass


class NegativeFrequency(RespireError, ValueError):
    pass


class TooManyFilters(RespireError, ValueError):
    pass


# --- features -------------------------------------------------------------

class SeriesTooShort(RespireError, ValueError):
    pass


class TooFewRows(RespireError, ValueError):
    pass


# --- learners -------------------------------------------------------------

class DimensionMismatch(RespireError, ValueError):
    pass


class SingleClassData(RespireError, ValueError):
    pass


class EmptyData(RespireError, ValueError):
    pass


class EmptyNode(RespireError, ValueError):
    pass


class WeakLearnerFailed(RespireError):
    """Boosting could not accept even the first weak learner"""


class SchemaVersionMismatch(RespireError):
    exit_code = 3


class CorruptModel(RespireError):
    exit_code = 3


# --- selection / evaluation -----------------------------------------------

class InsufficientFeatures(RespireError, ValueError):
    pass


class CardinalityOutOfRange(RespireError, ValueError):
    pass


class MissingTrace(RespireError):
    pass


class SplitLeak(RespireError):
    """Test rows reached a training or selection step"""


# --- artifacts ------------------------------------------------------------

class MissingArtifact(RespireError):

    def __init__(self, path, what="artifact"):
        self.path = str(path)
        super().__init__(f"Missing {what}: expected at {self.path}")


class ConfigDigestMismatch(RespireError):
    exit_code = 3

    def __init__(self, expected, found, what="artifact"):
        self.expected = expected
        self.found = found
        super().__init__(
            f"{what} was produced under config digest {found}, "
            f"but {expected} is required"
        )
