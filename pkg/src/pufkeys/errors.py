"""Exception hierarchy shared by all pufkeys modules."""


class PufKeysError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PufKeysError, ValueError):
    pass


class ChallengeLengthMismatch(PufKeysError, ValueError):
    pass


class ReconciliationFailure(PufKeysError):
    """The fuzzy extractor could not recover the enrolled key."""


class DuplicateChallenge(PufKeysError, ValueError):
    pass


class CrpSpaceTooLarge(PufKeysError):
    """Raised when asked to enumerate the challenge space of a strong token."""


class DatabaseDepleted(PufKeysError):
    pass


class AlreadyConsumed(PufKeysError):
    """A consumed database entry was requested again (replay signal)."""


class UnknownChallenge(PufKeysError, KeyError):
    pass


class FormatError(PufKeysError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class KeyExhausted(PufKeysError):
    pass


class UnknownPadIndex(PufKeysError, IndexError):
    pass


class PoolDepleted(PufKeysError):
    pass


class KeyReuse(PufKeysError):
    """Pool bits at the requested offset were already spent."""


class FrameError(PufKeysError, ValueError):
    """A wire frame could not be decoded."""


class SequenceTooShort(PufKeysError, ValueError):
    pass


class PrecheckFailed(PufKeysError):
    pass


class ConfigError(PufKeysError, ValueError):
    pass


class DuplicateIdentity(PufKeysError, ValueError):
    pass
