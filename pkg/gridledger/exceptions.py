from .enums import Violation


class GridLedgerError(Exception):
    pass


class CryptoError(GridLedgerError):
    pass


class SeedLengthError(CryptoError, ValueError):
    pass


class CryptoFormatError(CryptoError, ValueError):
    pass


class DecryptError(CryptoError):
    pass


class KeyMismatchError(CryptoError):
    pass


class CodecError(GridLedgerError, ValueError):
    pass


class TruncatedError(CodecError):
    pass


class UnknownTagError(CodecError):
    pass


class TrailingBytesError(CodecError):
    pass


class LengthError(CodecError):
    pass


class InvalidFieldError(CodecError):
    pass


class IdentityError(GridLedgerError):
    pass


class DuplicateIdError(IdentityError):
    pass


class RecordNotFound(IdentityError, LookupError):
    pass


class MerkleError(GridLedgerError):
    pass


class EmptyTreeError(MerkleError, ValueError):
    pass


class ChainError(GridLedgerError):
    """
    Raised by `Ledger.append` when a block violates a chain invariant.

    `height` is the height of the offending block and `reason` the matching
    `gridledger.enums.Violation` member.
    """

    reason = None

    def __init__(self, message, height=None, detail=None):
        super().__init__(message)
        self.height = height
        self.detail = detail


class BadPrevHash(ChainError):
    reason = Violation.BAD_PREV_HASH


class BadHeight(ChainError):
    reason = Violation.BAD_HEIGHT


class BadProducerSig(ChainError):
    reason = Violation.BAD_PRODUCER_SIG


class InadmissibleEntry(ChainError):
    reason = Violation.INADMISSIBLE_ENTRY


class TransactionNotFound(GridLedgerError, LookupError):
    pass


class NotAdmittedError(GridLedgerError):
    pass


class BadRefError(GridLedgerError):
    pass


class ConfigError(GridLedgerError):
    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__('; '.join(self.diagnostics))


class KeyFileError(GridLedgerError, ValueError):
    pass
