"""Exception taxonomy shared across the package.

Every error raised by dcp code derives from DcpError so callers (CLI,
simulator) can catch one base type and report a typed message.
"""


class DcpError(Exception):
    """Base class for all package errors."""


class InvalidEmbeddingError(DcpError):
    """Embedding values are non-finite, too short, or not normalizable."""


class TemplateShapeError(DcpError):
    """Dimension or modality mismatch between templates."""


class PlaintextRangeError(DcpError):
    """Plaintext outside the configured encryption bound."""


class DecryptionRangeError(DcpError):
    """No plaintext in [-B, B] matches the ciphertext (overflow or tampering)."""


class KeyMismatchError(DcpError):
    """Ciphertexts or templates combined under different public keys."""


class GroupError(DcpError):
    """Group parameter validation failure or non-element input."""


class CannotProveError(DcpError):
    """Prover cannot build a match proof (decryption failed)."""


class DecodeError(DcpError):
    """Wire frame cannot be decoded."""

    def __init__(self, message: str, kind: str = "malformed"):
        super().__init__(message)
        self.kind = kind  # "truncated" | "length" | "unknown-type" | "malformed"


class CommandError(DcpError):
    """Base for voice-command parsing errors."""


class CommandParseError(CommandError):
    """Unrecognized command structure.

    position is the index of the offending token in the normalized
    command body (trigger phrase stripped).
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (token {position})")
        self.position = position


class IncompleteCommandError(CommandError):
    """A use case that requires a slot value is missing it."""


class UnknownUseCaseError(CommandError):
    """Command body does not name a supported use case."""


class ScenarioError(DcpError):
    """Scenario file failed validation; field names the offending path."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
