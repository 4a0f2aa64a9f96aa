"""Exception hierarchy shared across the package."""


class SerBenchError(Exception):
    """Base class for all errors raised by serbench."""


class ParseError(SerBenchError):
    """Malformed container or file header."""


class UnsupportedFormatError(SerBenchError):
    pass


class EmptyAudioError(SerBenchError):
    pass


class LabelError(SerBenchError):
    pass


class LayoutError(SerBenchError):
    pass


class ParameterError(SerBenchError, ValueError):
    """Argument outside its documented range."""


class ExtractionError(SerBenchError):
    pass


class FitError(SerBenchError, ValueError):
    pass


class DataError(SerBenchError, ValueError):
    pass


class ShapeError(SerBenchError, ValueError):
    pass


class DegenerateError(SerBenchError):
    """Fitting produced an unusable result (no features kept, zero variance)."""


class LeakError(SerBenchError):
    """A fit received rows that are not flagged as training rows."""


class IntegrityError(SerBenchError):
    pass


class VersionError(SerBenchError):
    pass


class StratificationError(SerBenchError):
    pass


class FetchError(SerBenchError):
    """Network failure while downloading; safe to retry."""
