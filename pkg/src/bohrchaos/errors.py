"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: certificate/verification problems
exit with 2, search and support limits with 3.
"""


class BohrChaosError(Exception):
    """Base class for library errors."""


class PreconditionError(BohrChaosError, ValueError):
    """An operation was called outside its documented domain."""


class CodeError(BohrChaosError, ValueError):
    """A block could not be decoded by a block code."""


class ConstantWord(PreconditionError):
    """A cylinder too degenerate for the horseshoe construction."""


class CertificateFailure(BohrChaosError):
    """A disjoint-steps certificate did not verify."""


class DepthExceeded(BohrChaosError):
    """A displacement-witness search ran out of depth."""

    def __init__(self, max_depth, detail=""):
        self.max_depth = max_depth
        self.detail = detail
        msg = f"no displacement witness within depth {max_depth}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class Unsupported(BohrChaosError):
    """Input is valid but beyond the documented computational limits."""


class IntegrityError(BohrChaosError):
    """An internal consistency check failed (e.g. non-dissociate frequencies)."""


class EnvelopeTooLoose(BohrChaosError):
    """Rejection sampler acceptance rate fell below the floor."""


class SingularMatrix(PreconditionError):
    """Matrix with zero determinant where an invertible one is required."""
