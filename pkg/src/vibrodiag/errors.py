"""Exception types shared across the package."""


class VibrodiagError(Exception):
    """Base class for all package errors."""


# --- signal processing ---

class NonPositiveRate(VibrodiagError):
    pass


class DegenerateSignal(VibrodiagError):
    pass


class MalformedWav(VibrodiagError):
    pass


class IoFailure(VibrodiagError):
    pass


# --- synthetic data ---

class InvalidSpec(VibrodiagError):
    pass


# --- corpus ---

class UnknownTemplate(VibrodiagError):
    pass


class EmptyManifest(VibrodiagError):
    pass


class Unparseable(VibrodiagError):
    pass


class UnknownClass(VibrodiagError):
    pass


# --- tokenizer / model ---

class InvalidLayout(VibrodiagError):
    pass


class ShapeMismatch(VibrodiagError):
    pass


class TooShort(VibrodiagError):
    pass


class SlotMismatch(VibrodiagError):
    pass


# --- training ---

class EmptyBatch(VibrodiagError):
    pass


class NonFiniteLoss(VibrodiagError):
    pass


# --- checkpoints ---

class BadMagic(VibrodiagError):
    pass


class VersionMismatch(VibrodiagError):
    pass


class TruncatedFile(VibrodiagError):
    pass


# --- evaluation / sessions ---

class LengthMismatch(VibrodiagError):
    pass


class SessionNotFound(VibrodiagError):
    pass


class UnparseableOutput(VibrodiagError):
    pass
