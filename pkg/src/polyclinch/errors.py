"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI maps to an
exit status.
"""


class ClinchError(Exception):
    code = "ERROR"


class ParseError(ClinchError):
    code = "PARSE_ERROR"


class ValidationError(ClinchError):
    """An instance or oracle violates one of the model axioms."""

    code = "VALIDATION_ERROR"

    def __init__(self, message, axiom=None, witness=None):
        super().__init__(message)
        self.axiom = axiom
        self.witness = witness


class InvalidInstance(ValidationError):
    code = "INVALID_INSTANCE"


class GuardExceeded(ClinchError):
    """Input is beyond the exhaustive-enumeration limits."""

    code = "GUARD_EXCEEDED"


class GroundSetTooLarge(GuardExceeded):
    code = "GROUND_SET_TOO_LARGE"


class SubsetLimit(GuardExceeded):
    code = "SUBSET_LIMIT"


class NotInPolymatroid(ClinchError):
    code = "NOT_IN_POLYMATROID"


class NoActiveBuyers(ClinchError):
    code = "NO_ACTIVE_BUYERS"


class MalformedTrace(ClinchError):
    code = "MALFORMED_TRACE"


class UnknownFixture(ClinchError):
    code = "UNKNOWN_FIXTURE"


class GenerationFailed(ClinchError):
    code = "GENERATION_FAILED"
