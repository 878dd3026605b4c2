"""
Exceptions raised by the channel, density-evolution and storage layers.

Errors raised from inside pydantic validators do not derive from ValueError,
so they reach the caller unchanged instead of as a ValidationError.
"""


class QuditBpqmError(Exception):
    """Base class for every error raised by qudit_bpqm."""


class InvalidEigenList(QuditBpqmError):
    """Eigen list has the wrong shape, non-finite entries or a trace other than q."""


class NotPSD(InvalidEigenList):
    """An eigenvalue is negative beyond round-off, so the overlaps are not a Gram matrix."""


class InvalidGramRow(QuditBpqmError):
    """Gram row violates g_0 = 1, |g_u| <= 1 or Hermitian circulant symmetry."""


class DimensionMismatch(QuditBpqmError):
    """Operands were built for different alphabet sizes."""


class SizeMismatch(QuditBpqmError, ValueError):
    """Bags combined pairwise must hold the same number of samples."""


class GuardViolation(QuditBpqmError):
    """A dense or Monte-Carlo computation would exceed its resource guard."""


class SingularMean(QuditBpqmError, ArithmeticError):
    """The average state could not be inverted on its support."""


class NotUnitary(QuditBpqmError):
    """A matrix expected to be unitary is not, within 1e-10."""


class DegenerateBranch(QuditBpqmError, ValueError):
    """A bit-node branch with zero weight has no defined side-information state."""


class ContractViolation(QuditBpqmError, AssertionError):
    """A built unitary does not act on the channel states as required."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class FidelityBoundViolation(QuditBpqmError, AssertionError):
    """A fidelity inequality for combined channels does not hold."""


class NoTransition(QuditBpqmError):
    """Threshold search endpoints give the same density-evolution verdict."""


class NonMonotoneVerdict(QuditBpqmError):
    """A converged run was observed above a failed run on the bisection path."""


class FigureTypeMismatch(QuditBpqmError, TypeError):
    """Figure data was requested for a result type that cannot produce it."""


class InvalidEnsemble(QuditBpqmError, ValueError):
    """Node degrees do not describe a regular LDPC ensemble of rate in (0, 1)."""
