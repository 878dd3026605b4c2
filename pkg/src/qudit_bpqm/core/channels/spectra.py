"""
Eigen-list representation of symmetric q-ary pure-state channels.

A symmetric channel u -> |psi_u> has a circulant Gram matrix G_{i,j} = g_{j-i}.
Its eigenvectors are the Fourier vectors <j|v_m> = omega^{jm} / sqrt(q) and its
eigenvalues, the eigen list lambda, describe the channel up to isometry.
"""

from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
import numpy.typing as npt
import orjson
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import linalg
from scipy.special import entr, rel_entr

from qudit_bpqm.core.errors import GuardViolation, InvalidEigenList, InvalidGramRow, NotPSD, SingularMean

ComplexMatrix = npt.NDArray[np.complex128]

TRACE_TOL = 1e-9
NEGATIVE_TOL = 1e-9
GRAM_TOL = 1e-9
SUPPORT_TOL = 1e-12
PGM_ORACLE_Q_LIMIT = 16


class LogBase(str, Enum):
    NATURAL = "natural"
    Q = "q"


def clean_rows(rows: npt.ArrayLike) -> np.ndarray:
    """Validate a (n, q) block of eigen lists.

    Entries in (-1e-9, 0) are clamped to zero and the affected rows rescaled to
    trace q. Anything more negative raises NotPSD.
    """
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InvalidEigenList(f"Eigen lists need shape (n, q) with q >= 2, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidEigenList("Eigen list contains non-finite entries")
    q = arr.shape[1]

    if arr.size and arr.min() < -NEGATIVE_TOL:
        raise NotPSD(f"Eigen value {arr.min():.3e} is below -{NEGATIVE_TOL}")

    negative = arr < 0
    if negative.any():
        touched = negative.any(axis=1)
        arr[negative] = 0.0
        arr[touched] *= q / arr[touched].sum(axis=1, keepdims=True)

    deviation = np.abs(arr.sum(axis=1) - q)
    if deviation.size and deviation.max() > TRACE_TOL:
        raise InvalidEigenList(f"Eigen list must sum to q={q}, off by {deviation.max():.3e}")
    return arr


class EigenList(BaseModel):
    """Gram eigenvalues lambda_0..lambda_{q-1} in Fourier order, summing to q."""

    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...] = Field(description="Eigenvalue lambda_m belonging to the Fourier vector v_m.")

    @field_validator("values", mode="before")
    @classmethod
    def _validate_values(cls, value):
        return tuple(float(x) for x in clean_rows([np.asarray(value, dtype=np.float64).reshape(-1)])[0])

    @property
    def q(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def normalized(self) -> "NormalizedSpectrum":
        arr = self.array
        return NormalizedSpectrum(probs=tuple(float(x) for x in arr / arr.sum()))

    def to_json(self) -> bytes:
        return orjson.dumps(list(self.values))

    @classmethod
    def from_json(cls, payload: bytes | str) -> "EigenList":
        return cls(values=orjson.loads(payload))


class NormalizedSpectrum(BaseModel):
    """Eigen list divided by q; a probability vector over [q]."""

    model_config = ConfigDict(frozen=True)

    probs: tuple[float, ...]

    @field_validator("probs")
    @classmethod
    def _validate_probs(cls, value):
        arr = np.asarray(value)
        if arr.min() < 0 or abs(arr.sum() - 1.0) > 1e-12:
            raise InvalidEigenList("Normalized spectrum must be a probability vector")
        return value

    @property
    def q(self) -> int:
        return len(self.probs)


class GramRow(BaseModel):
    """First row g_0..g_{q-1} of a circulant Gram matrix."""

    model_config = ConfigDict(frozen=True)

    entries: tuple[complex, ...]

    @field_validator("entries", mode="before")
    @classmethod
    def _validate_entries(cls, value):
        g = np.asarray(value, dtype=np.complex128).reshape(-1)
        if g.size < 2:
            raise InvalidGramRow("Gram row needs q >= 2 entries")
        if abs(g[0] - 1.0) > GRAM_TOL:
            raise InvalidGramRow(f"g_0 must be 1 for unit-norm states, got {g[0]}")
        if np.abs(g).max() > 1.0 + GRAM_TOL:
            raise InvalidGramRow("Overlaps of unit vectors cannot exceed 1 in magnitude")
        mirrored = np.conj(g[(-np.arange(g.size)) % g.size])
        if np.abs(g - mirrored).max() > GRAM_TOL:
            raise InvalidGramRow("Gram row is not Hermitian circulant: g_{q-u} != conj(g_u)")
        g[0] = 1.0
        return tuple(complex(x) for x in g)

    @property
    def q(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.complex128)

    def to_json(self) -> bytes:
        return orjson.dumps([[x.real, x.imag] for x in self.entries])

    @classmethod
    def from_json(cls, payload: bytes | str) -> "GramRow":
        return cls(entries=[complex(re, im) for re, im in orjson.loads(payload)])


class FidelityBounds(NamedTuple):
    lower: float
    upper: float


def one_parameter_eigenlist(q: int, lambda0: float) -> EigenList:
    """[lambda0, (q - lambda0)/(q - 1), ...]; lambda0 = 1 is perfect, lambda0 = q useless."""
    if q < 2:
        raise InvalidEigenList(f"q must be at least 2, got {q}")
    if not 0.0 <= lambda0 <= q:
        raise InvalidEigenList(f"lambda0 must lie in [0, {q}], got {lambda0}")
    rest = (q - lambda0) / (q - 1)
    return EigenList(values=[lambda0] + [rest] * (q - 1))


def is_one_parameter(lam: EigenList, atol: float = 1e-12) -> bool:
    tail = lam.array[1:]
    return bool(np.allclose(tail, (lam.q - lam.values[0]) / (lam.q - 1), rtol=0.0, atol=atol))


def dft_matrix(q: int) -> ComplexMatrix:
    """Columns are the Fourier vectors: F[j, m] = <j|v_m> = omega^{jm} / sqrt(q)."""
    idx = np.arange(q)
    return np.exp(2j * np.pi * np.outer(idx, idx) / q) / np.sqrt(q)


def fourier_register_permutation(q: int, target: Callable[[int, int], tuple[int, int]]) -> np.ndarray:
    """q^2 x q^2 permutation sending |v_j> (x) |v_j'> to |v_a> (x) |v_b> with (a, b) = target(j, j')."""
    perm = np.zeros((q * q, q * q))
    for j in range(q):
        for jp in range(q):
            a, b = target(j, jp)
            perm[(a % q) * q + (b % q), j * q + jp] = 1.0
    return perm


def circulant_gram(g: GramRow) -> ComplexMatrix:
    idx = np.arange(g.q)
    return g.array[(idx[None, :] - idx[:, None]) % g.q]


def eigen_to_gram(lam: EigenList) -> GramRow:
    # numpy's forward FFT carries omega^{-ij}, matching g_i = (1/q) sum_j lambda_j omega^{-ij}
    g = np.fft.fft(lam.array) / lam.q
    g[0] = 1.0
    return GramRow(entries=g)


def gram_to_eigen(g: GramRow) -> EigenList:
    lam = np.fft.ifft(g.array) * g.q
    if np.abs(lam.imag).max() >= GRAM_TOL:
        raise InvalidGramRow(f"Eigenvalues have imaginary part {np.abs(lam.imag).max():.3e}")
    return EigenList(values=lam.real)


def canonical_states(lam: EigenList) -> ComplexMatrix:
    """q x q matrix whose column u is |psi_u> = q^{-1/2} sum_j sqrt(lambda_j) omega^{-uj} |v_j>."""
    q = lam.q
    idx = np.arange(q)
    fourier_coeffs = np.sqrt(lam.array)[:, None] * np.exp(-2j * np.pi * np.outer(idx, idx) / q) / np.sqrt(q)
    return dft_matrix(q) @ fourier_coeffs


def holevo_rows(rows: np.ndarray, base: LogBase = LogBase.NATURAL) -> np.ndarray:
    q = rows.shape[1]
    h = entr(rows / q).sum(axis=1)
    return h / np.log(q) if base == LogBase.Q else h


def fidelity_rows(rows: np.ndarray) -> np.ndarray:
    q = rows.shape[1]
    return np.abs(np.fft.fft(rows, axis=1)[:, 1:]).sum(axis=1) / (q * (q - 1))


def pgm_error_rows(rows: np.ndarray) -> np.ndarray:
    q = rows.shape[1]
    return 1.0 - (np.sqrt(rows).sum(axis=1) / q) ** 2


def holevo_information(lam: EigenList, base: LogBase = LogBase.NATURAL) -> float:
    """Symmetric Holevo information I(W) = H(mu)."""
    return float(holevo_rows(lam.array[None, :], base)[0])


def channel_fidelity(lam: EigenList) -> float:
    return float(fidelity_rows(lam.array[None, :])[0])


def pgm_error(lam: EigenList) -> float:
    """Error probability of the pretty good measurement, 1 - ((1/q) sum sqrt(lambda_u))^2."""
    return float(pgm_error_rows(lam.array[None, :])[0])


def pgm_error_oracle(lam: EigenList, q_limit: int = PGM_ORACLE_Q_LIMIT) -> float:
    """PGM error from explicit measurement operators on the canonical states."""
    q = lam.q
    if q > q_limit:
        raise GuardViolation(f"Dense PGM oracle limited to q <= {q_limit}, got {q}")

    states = canonical_states(lam)
    rho_bar = states @ states.conj().T / q
    weights, vectors = linalg.eigh(rho_bar)
    support = weights > SUPPORT_TOL
    if not support.any():
        raise SingularMean("Average state has empty support")

    inv_sqrt = (vectors[:, support] / np.sqrt(weights[support])) @ vectors[:, support].conj().T
    gamma = inv_sqrt @ states / np.sqrt(q)
    measurement = [np.outer(gamma[:, u], gamma[:, u].conj()) for u in range(q)]

    projector = vectors[:, support] @ vectors[:, support].conj().T
    completeness = np.abs(sum(measurement) - projector).max()
    if completeness > 1e-8:
        raise SingularMean(f"PGM operators miss the support projector by {completeness:.3e}")

    success = sum(np.real(states[:, u].conj() @ measurement[u] @ states[:, u]) for u in range(q)) / q
    return float(1.0 - success)


def fidelity_holevo_bounds(lam: EigenList) -> FidelityBounds:
    """chi-squared sandwich sqrt(e^{ln q - I} - 1)/(q-1) <= F(W) <= sqrt(2q/(q-1) (ln q - I))."""
    q = lam.q
    # ln q - I(W) as the divergence from uniform, exactly zero at the perfect channel
    gap = max(float(rel_entr(lam.array / q, 1.0 / q).sum()), 0.0)
    lower = np.sqrt(max(np.expm1(gap), 0.0)) / (q - 1)
    upper = np.sqrt(2 * q / (q - 1) * gap)
    return FidelityBounds(lower=float(lower), upper=float(upper))


def trace_square_gap(lam: EigenList) -> float:
    """sum lambda_u^2 - q sum |g_u|^2, zero for every valid eigen list."""
    g = eigen_to_gram(lam).array
    return float(np.sum(lam.array ** 2) - lam.q * np.sum(np.abs(g) ** 2))


def random_eigenlist(gen: np.random.Generator, q: int, sparsity: float = 0.0) -> EigenList:
    """Dirichlet-distributed eigen list scaled to trace q; each entry is zeroed with probability sparsity."""
    weights = gen.dirichlet(np.ones(q))
    if sparsity > 0.0:
        keep = gen.random(q) >= sparsity
        keep[gen.integers(q)] = True
        weights = weights * keep
    return EigenList(values=q * weights / weights.sum())
