"""Exception types shared across the package.

Every error raised by qtimbre derives from :class:`QTimbreError`, so callers
(the CLI in particular) can distinguish library failures from programming
errors with a single except clause.
"""


class QTimbreError(Exception):
    """Base class for all qtimbre errors."""


# --- randomness sources ---

class SourceExhausted(QTimbreError):
    """A finite randomness source has no values left."""


# --- QRNG client ---

class NetworkFailure(QTimbreError):
    """The remote service could not be reached after all retries."""


class MalformedPayload(QTimbreError):
    """The service response was not the expected JSON document."""


class ServiceRefused(QTimbreError):
    """The service answered but flagged the request as unsuccessful."""


class InvalidRequest(QTimbreError):
    """A request precondition was violated before any network activity."""


class IoFailure(QTimbreError):
    """A file could not be read or written."""


class CacheExhausted(QTimbreError):
    """The local byte cache holds fewer bytes than requested."""


# --- atom simulation ---

class NoDecayChannel(QTimbreError):
    """Emission sampling requested with a zero decay rate."""


class StepTooLarge(QTimbreError):
    """The per-step jump probability exceeds the accuracy guard."""


class OverdampedRegime(QTimbreError):
    """The closed-form waiting density only exists for omega > gamma/2."""


# --- statistics ---

class BelowRange(QTimbreError):
    """A value fell below the first histogram edge."""


class CheckpointOutOfRange(QTimbreError):
    """A snapshot checkpoint exceeds the available sample count."""


class EmptyHistogram(QTimbreError):
    """An operation needs at least one accumulated count."""


class ZeroVariance(QTimbreError):
    """Correlation is undefined for a constant stream."""


class TooShort(QTimbreError):
    """The stream is too short for the requested lag."""


class TooManyElements(QTimbreError):
    """Permutation tallies are only tractable for small n."""


# --- timbre mapping ---

class PaletteTooSmall(QTimbreError):
    """The palette does not provide enough partial groups."""


# --- synthesis ---

class EmptyEvents(QTimbreError):
    """Rendering requires at least one timbre event."""


class CrossfadeTooLong(QTimbreError):
    """The crossfade window must be shorter than every event."""


class MalformedWav(QTimbreError):
    """The file is not a WAV file this library can read."""


class BufferTooShort(QTimbreError):
    """The buffer does not hold one full analysis window."""


# --- event reordering ---

class LengthMismatch(QTimbreError):
    """Permutation length does not match the sequence length."""


class DuplicateId(QTimbreError):
    """Event ids within a sequence must be unique."""


class MalformedLine(QTimbreError):
    """A line in an event file could not be parsed."""
