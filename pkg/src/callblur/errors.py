"""Exception and warning types shared across the package."""


class CallblurError(Exception):
    """Base class for all callblur errors."""


class ParseError(CallblurError):
    """A file could not be parsed (malformed JSON, bad schema, bad line)."""


class ValidationError(CallblurError):
    """A domain invariant was violated (duplicates, subset violations, ...)."""


class IoError(CallblurError):
    """A read or write to the filesystem failed."""


class SpecError(CallblurError):
    """A generation or sweep specification is invalid."""


class ParamError(CallblurError):
    """Obfuscation or feature parameters violate their invariants."""


class UnknownNameError(CallblurError):
    """A call name is not part of the catalog alphabet."""


class ConfigMismatchError(CallblurError):
    """A feature vector does not match the configuration a model was trained with."""


class DegenerateTrainingError(CallblurError):
    """Training data is missing one of the two classes."""


class EmptyInputError(CallblurError):
    """An operation that needs at least one element received none."""


class IdMismatchError(CallblurError):
    """Two corpora do not contain the same trace ids."""


class RankDeficientError(CallblurError):
    """Not enough distinct points to fit the requested trend."""


class EmptyFileWarning(UserWarning):
    """A trace file contained no events."""


class ShortTraceWarning(UserWarning):
    """A trace is shorter than the n-gram window, so it yields no tokens."""
