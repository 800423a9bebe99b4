"""Exception hierarchy shared by every module."""


class SCProofError(Exception):
    """Base class for all errors raised by this package."""


class ModulusMismatchError(SCProofError, ValueError):
    """Two field objects over different primes were combined."""


class CapacityError(SCProofError):
    """A computation would exceed its configured size budget."""


class GenerationError(SCProofError, RuntimeError):
    """Prime generation gave up; ``attempts`` says how hard it tried."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ParseError(SCProofError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnsupportedWidthError(ParseError):
    """A DIMACS clause has more than three literals."""


class DegenerateInputError(SCProofError, ValueError):
    """Interpolation nodes are not pairwise distinct."""


class ProtocolAbort(SCProofError):
    """The session broke down for a reason unrelated to soundness.

    Transport failures, malformed frames and out-of-order messages all end up
    here. They must never be reported as a verifier rejection.
    """

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail
