"""Exception types shared across the package."""


class ABEACSError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ABEACSError, ValueError):
    """Operands were created from different group or field parameters."""


class InsufficientSharesError(ABEACSError):
    """Fewer shares than the threshold were supplied for reconstruction."""


class PolicySyntaxError(ABEACSError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class PolicyCompositionError(ABEACSError, ValueError):
    """A policy leaf references an attribute neither party holds."""


class DecryptionError(ABEACSError):
    """Payload could not be recovered (policy not satisfied or data corrupted)."""


class KeyInvalidatedError(ABEACSError):
    """A single-use private key handle was presented a second time."""


class NotFoundError(ABEACSError, KeyError):
    pass


class ChainError(ABEACSError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class MiningError(ABEACSError):
    pass


class ConsensusError(ABEACSError):
    def __init__(self, message: str, results=None):
        super().__init__(message)
        self.results = results


class ScriptError(ABEACSError, ValueError):
    pass


class ConfigError(ABEACSError, ValueError):
    pass


class AccessDeniedError(ABEACSError, PermissionError):
    """Decryption requested without an active granted session."""
