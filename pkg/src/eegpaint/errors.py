"""Exception types raised across the package.

Everything derives from :class:`EegPaintError`; most classes also derive from
the closest builtin (``ValueError``, ``OSError``) so callers can catch them
either way.
"""


class EegPaintError(Exception):
    pass


# ingest
class WrongLength(EegPaintError, ValueError):
    pass


class InvalidHeader(EegPaintError, ValueError):
    pass


class InvalidFooter(EegPaintError, ValueError):
    pass


class UnsupportedGain(EegPaintError, ValueError):
    pass


class SchemaError(EegPaintError, ValueError):
    pass


class BadDuration(EegPaintError, ValueError):
    pass


class InvalidEpoch(EegPaintError, ValueError):
    pass


# features
class TooShort(EegPaintError, ValueError):
    pass


class BandOutOfRange(EegPaintError, ValueError):
    pass


class AsymmetricInput(EegPaintError, ValueError):
    pass


class NegativeWeight(EegPaintError, ValueError):
    pass


# autodiff
class ShapeMismatch(EegPaintError, ValueError):
    pass


class NonIntegralOutput(ShapeMismatch):
    pass


class IndexOutOfRange(EegPaintError, IndexError):
    pass


class NotScalar(EegPaintError, ValueError):
    pass


class TapeConsumed(EegPaintError, RuntimeError):
    pass


# training
class InsufficientData(EegPaintError, ValueError):
    pass


class ClassMissing(EegPaintError, ValueError):
    pass


class EncoderMismatch(EegPaintError, ValueError):
    pass


# imaging
class BadSize(EegPaintError, ValueError):
    pass


class BadFactor(EegPaintError, ValueError):
    pass


class MalformedPpm(EegPaintError, ValueError):
    pass


# pipeline
class ConfigError(EegPaintError, ValueError):
    pass


class CrcError(EegPaintError, ValueError):
    pass


class VersionError(EegPaintError, ValueError):
    pass


class UnknownKind(EegPaintError, ValueError):
    pass


class NeedTwoGroups(EegPaintError, ValueError):
    pass
