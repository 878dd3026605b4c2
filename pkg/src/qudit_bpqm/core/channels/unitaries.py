"""
Dense check-node and bit-node BPQM unitaries on two q-dimensional registers.

Registers are ordered as kron(first, second), so basis index i1 * q + i2.
"""

import logging
from enum import Enum
from pathlib import Path

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import block_diag, qr

from qudit_bpqm.core.channels.combine import Branch, HeraldedEnsemble, ZERO_BRANCH_TOL, bit_combine
from qudit_bpqm.core.channels.spectra import (
    ComplexMatrix,
    EigenList,
    GramRow,
    canonical_states,
    dft_matrix,
    fourier_register_permutation,
    gram_to_eigen,
)
from qudit_bpqm.core.errors import ContractViolation, DegenerateBranch, DimensionMismatch, GuardViolation, NotUnitary

UNITARY_TOL = 1e-10
CONTRACT_TOL = 1e-9
DEGENERATE_NORM = 1e-14
DENSE_Q_LIMIT = 7
CONTROLLED_DIM_LIMIT = 512


class UnitaryKind(str, Enum):
    CHECK = "check"
    BIT = "bit"
    CONTROLLED_CHECK = "controlled-check"
    CONTROLLED_BIT = "controlled-bit"


def unitarity_residual(matrix: np.ndarray) -> float:
    return float(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])).max())


class UnitaryBundle(BaseModel):
    """A built BPQM unitary together with what it was built for."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: int = Field(ge=2)
    matrix: np.ndarray
    kind: UnitaryKind
    inputs: tuple[tuple[EigenList, EigenList], ...] = Field(
        (), description="Eigen-list pairs of the bit-node blocks, one per classical label."
    )
    rotation: np.ndarray | None = Field(None, description="Isometry V the unitary was conjugated with, if any.")

    @model_validator(mode="after")
    def _check_unitary(self):
        rows, cols = self.matrix.shape
        if rows != cols or rows % (self.q * self.q):
            raise DimensionMismatch(f"Matrix of shape {self.matrix.shape} does not act on q={self.q} register pairs")
        residual = unitarity_residual(self.matrix)
        if residual >= UNITARY_TOL:
            raise NotUnitary(f"{self.kind.value} unitary is off by {residual:.3e}")
        return self

    @property
    def labels(self) -> int:
        return self.matrix.shape[0] // (self.q * self.q)

    @property
    def isometry(self) -> np.ndarray:
        return np.eye(self.q) if self.rotation is None else self.rotation

    def blocks(self) -> list[np.ndarray]:
        d = self.q * self.q
        return [self.matrix[x * d:(x + 1) * d, x * d:(x + 1) * d] for x in range(self.labels)]


def _guard_q(q: int, q_limit: int) -> None:
    if q > q_limit:
        logging.error(f"Dense unitaries requested for q={q} above the limit {q_limit}")
        raise GuardViolation(f"Dense unitaries limited to q <= {q_limit}, got {q}")


def swap_matrix(q: int) -> np.ndarray:
    perm = np.zeros((q * q, q * q))
    for i1 in range(q):
        for i2 in range(q):
            perm[i2 * q + i1, i1 * q + i2] = 1.0
    return perm


def fourier_permutation_unitary(q: int, target) -> ComplexMatrix:
    """Operator acting as the register permutation `target` on Fourier product vectors."""
    fourier2 = np.kron(dft_matrix(q), dft_matrix(q))
    return fourier2 @ fourier_register_permutation(q, target) @ fourier2.conj().T


def build_check_unitary(q: int, q_limit: int = DENSE_Q_LIMIT) -> UnitaryBundle:
    """U = (I (x) F^dagger) SWAP U~, with U~ |v_j>|v_j'> = |v_{j+j'}>|v_{-j'}>.

    Afterwards the second register holds the branch label m = j + j' in the
    canonical basis and the first register holds the branch state.
    """
    _guard_q(q, q_limit)
    u_tilde = fourier_permutation_unitary(q, lambda j, jp: (j + jp, -jp))
    matrix = np.kron(np.eye(q), dft_matrix(q).conj().T) @ swap_matrix(q) @ u_tilde
    return UnitaryBundle(q=q, matrix=matrix, kind=UnitaryKind.CHECK)


def bit_reflection(zeta: np.ndarray, strict: bool = False) -> np.ndarray:
    """Unitary sending the unnormalized vector zeta~ to |0>, identity if zeta~ vanishes."""
    q = zeta.size
    norm = np.linalg.norm(zeta)
    if norm < DEGENERATE_NORM:
        if strict:
            raise DegenerateBranch("Bit-node branch has zero weight")
        return np.eye(q, dtype=np.complex128)

    zeta = zeta / norm
    phase = zeta[0] / abs(zeta[0]) if abs(zeta[0]) > 0 else 1.0
    rotated = zeta * np.conj(phase)
    e0 = np.zeros(q)
    e0[0] = 1.0
    diff = rotated - e0
    if np.linalg.norm(diff) < DEGENERATE_NORM:
        return np.conj(phase) * np.eye(q, dtype=np.complex128)
    w = diff / np.linalg.norm(diff)
    return np.conj(phase) * (np.eye(q) - 2.0 * np.outer(w, w.conj()))


def bit_zeta_vectors(lam1: EigenList, lam2: EigenList) -> np.ndarray:
    """Column k is zeta~_k = sum_j sqrt(l1_{k-j} l2_j) |v_j>, with squared norm q * lambda_k of the bit output."""
    q = lam1.q
    j = np.arange(q)
    coeffs = np.sqrt(lam1.array[(j[None, :] - j[:, None]) % q] * lam2.array[:, None])
    return dft_matrix(q) @ coeffs


def build_bit_unitary(
    lam1: EigenList, lam2: EigenList, q_limit: int = DENSE_Q_LIMIT, strict: bool = False
) -> UnitaryBundle:
    """U = U_control U_+ with U (|psi1_u> (x) |psi2_u>) = |psi_u> (x) |0> for the bit-combined channel."""
    if lam1.q != lam2.q:
        raise DimensionMismatch(f"Cannot combine q={lam1.q} with q={lam2.q}")
    q = lam1.q
    _guard_q(q, q_limit)

    u_plus = fourier_permutation_unitary(q, lambda j, jp: (j + jp, jp))
    fourier = dft_matrix(q)
    zetas = bit_zeta_vectors(lam1, lam2)

    u_control = np.zeros((q * q, q * q), dtype=np.complex128)
    for k in range(q):
        projector = np.outer(fourier[:, k], fourier[:, k].conj())
        u_control += np.kron(projector, bit_reflection(zetas[:, k], strict=strict))

    bundle = UnitaryBundle(q=q, matrix=u_control @ u_plus, kind=UnitaryKind.BIT, inputs=((lam1, lam2),))
    verify_bit_contract(bundle)
    return bundle


def conjugate_unitary(bundle: UnitaryBundle, v: np.ndarray) -> UnitaryBundle:
    """(V (x) I) U (V^dagger (x) V^dagger): the unitary for channels rotated by the isometry V."""
    if bundle.kind not in (UnitaryKind.CHECK, UnitaryKind.BIT):
        raise DimensionMismatch(f"Only plain check and bit unitaries can be conjugated, got {bundle.kind.value}")
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (bundle.q, bundle.q):
        raise DimensionMismatch(f"Isometry of shape {v.shape} does not act on q={bundle.q}")
    residual = unitarity_residual(v)
    if residual >= UNITARY_TOL:
        raise NotUnitary(f"Conjugating matrix is off by {residual:.3e}")

    v_dag = v.conj().T
    matrix = np.kron(v, np.eye(bundle.q)) @ bundle.matrix @ np.kron(v_dag, v_dag)
    conjugated = bundle.model_copy(update={"matrix": matrix, "rotation": v @ bundle.isometry})
    verify_contract(conjugated)
    return conjugated


def controlled_pairs(e1: HeraldedEnsemble, e2: HeraldedEnsemble) -> list[tuple[float, EigenList, EigenList]]:
    """Label product of two ensembles in lexicographic (x1, x2) order."""
    if e1.q != e2.q:
        raise DimensionMismatch(f"Cannot combine q={e1.q} with q={e2.q}")
    return [(b1.prob * b2.prob, b1.eigenlist, b2.eigenlist) for b1 in e1.branches for b2 in e2.branches]


def _guard_controlled(q: int, labels: int, dim_limit: int) -> None:
    dim = labels * q * q
    if labels < 1 or dim > dim_limit:
        logging.error(f"Controlled unitary of dimension {dim} requested, limit {dim_limit}")
        raise GuardViolation(f"Controlled unitaries limited to dimension {dim_limit}, got {dim}")


def build_controlled_bit_unitary(
    branch_pairs: list[tuple[EigenList, EigenList]],
    q_limit: int = DENSE_Q_LIMIT,
    dim_limit: int = CONTROLLED_DIM_LIMIT,
) -> UnitaryBundle:
    """Block diagonal over classical labels x, label register first: sum_x |x><x| (x) U_x."""
    pairs = tuple(branch_pairs)
    if not pairs:
        raise GuardViolation("Controlled unitary needs at least one branch pair")
    q = pairs[0][0].q
    _guard_controlled(q, len(pairs), dim_limit)
    blocks = [build_bit_unitary(a, b, q_limit=q_limit).matrix for a, b in pairs]
    return UnitaryBundle(q=q, matrix=block_diag(*blocks), kind=UnitaryKind.CONTROLLED_BIT, inputs=pairs)


def build_controlled_check_unitary(
    q: int, labels: int, q_limit: int = DENSE_Q_LIMIT, dim_limit: int = CONTROLLED_DIM_LIMIT
) -> UnitaryBundle:
    _guard_controlled(q, labels, dim_limit)
    block = build_check_unitary(q, q_limit=q_limit).matrix
    return UnitaryBundle(q=q, matrix=block_diag(*([block] * labels)), kind=UnitaryKind.CONTROLLED_CHECK)


def _raise_if_broken(what: str, residual: float, tol: float) -> float:
    if residual >= tol:
        logging.error(f"{what} violated with residual {residual:.3e}")
        raise ContractViolation(what, residual)
    return residual


def verify_check_contract(bundle: UnitaryBundle, tol: float = CONTRACT_TOL) -> float:
    """max over (j, j') of |U (V v_j (x) V v_j') - V v_{-j'} (x) |j + j'>|."""
    q = bundle.q
    rotated = bundle.isometry @ dft_matrix(q)
    basis = np.eye(q)
    residual = 0.0
    for block in bundle.blocks():
        for j in range(q):
            for jp in range(q):
                out = block @ np.kron(rotated[:, j], rotated[:, jp])
                expected = np.kron(rotated[:, (-jp) % q], basis[:, (j + jp) % q])
                residual = max(residual, float(np.linalg.norm(out - expected)))
    return _raise_if_broken("check-node permutation contract", residual, tol)


def _bit_block_residual(block: np.ndarray, lam1: EigenList, lam2: EigenList, v: np.ndarray) -> float:
    q = lam1.q
    psi1 = v @ canonical_states(lam1)
    psi2 = v @ canonical_states(lam2)
    psi_out = v @ canonical_states(bit_combine(lam1, lam2))
    e0 = np.zeros(q)
    e0[0] = 1.0
    return max(
        float(np.linalg.norm(block @ np.kron(psi1[:, u], psi2[:, u]) - np.kron(psi_out[:, u], e0))) for u in range(q)
    )


def verify_bit_contract(bundle: UnitaryBundle, tol: float = CONTRACT_TOL) -> float:
    """max over u of |U (psi1_u (x) psi2_u) - psi_u (x) |0>|, on V-rotated states if conjugated."""
    residual = max(
        _bit_block_residual(block, lam1, lam2, bundle.isometry)
        for block, (lam1, lam2) in zip(bundle.blocks(), bundle.inputs)
    )
    return _raise_if_broken("bit-node contract", residual, tol)


def verify_controlled_contract(bundle: UnitaryBundle, tol: float = CONTRACT_TOL) -> float:
    """Block-diagonal structure plus the per-label check or bit contract."""
    d = bundle.q * bundle.q
    off_diagonal = bundle.matrix.copy()
    for x in range(bundle.labels):
        off_diagonal[x * d:(x + 1) * d, x * d:(x + 1) * d] = 0.0
    _raise_if_broken("controlled block structure", float(np.abs(off_diagonal).max(initial=0.0)), tol)

    if bundle.kind == UnitaryKind.CONTROLLED_BIT:
        return verify_bit_contract(bundle, tol)
    return verify_check_contract(bundle, tol)


def verify_contract(bundle: UnitaryBundle, tol: float = CONTRACT_TOL) -> float:
    match bundle.kind:
        case UnitaryKind.CHECK:
            return verify_check_contract(bundle, tol)
        case UnitaryKind.BIT:
            return verify_bit_contract(bundle, tol)
        case _:
            return verify_controlled_contract(bundle, tol)


def check_unitary_branches(lam1: EigenList, lam2: EigenList, bundle: UnitaryBundle | None = None) -> HeraldedEnsemble:
    """Check-node ensemble measured off the dense unitary: outcome m of register 2 in the canonical basis."""
    if lam1.q != lam2.q:
        raise DimensionMismatch(f"Cannot combine q={lam1.q} with q={lam2.q}")
    q = lam1.q
    bundle = bundle or build_check_unitary(q)
    psi1, psi2 = canonical_states(lam1), canonical_states(lam2)

    # outputs[u, l] reshaped to [first register, second register]
    outputs = np.array(
        [[(bundle.matrix @ np.kron(psi1[:, u], psi2[:, (u - l) % q])).reshape(q, q) for l in range(q)] for u in range(q)]
    )
    probs = (np.abs(outputs) ** 2).sum(axis=2).mean(axis=(0, 1))

    branches = []
    for m in range(q):
        if probs[m] < ZERO_BRANCH_TOL:
            continue
        states = outputs[0, :, :, m].T
        states = states / np.linalg.norm(states, axis=0)
        gram_row = states[:, 0].conj() @ states
        branches.append((m, probs[m], gram_to_eigen(GramRow(entries=gram_row))))

    total = sum(p for _, p, _ in branches)
    return HeraldedEnsemble(
        branches=tuple(Branch(prob=float(p / total), eigenlist=lam, label=m) for m, p, lam in branches)
    )


def dump_matrix(bundle: UnitaryBundle, path: str | Path) -> Path:
    """Write the matrix as .npy, or as row-major JSON of [re, im] pairs for any other suffix."""
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, bundle.matrix)
    else:
        pairs = np.stack([bundle.matrix.real, bundle.matrix.imag], axis=-1)
        path.write_bytes(orjson.dumps(pairs, option=orjson.OPT_SERIALIZE_NUMPY))
    logging.info(f"Wrote {bundle.kind.value} unitary of dimension {bundle.matrix.shape[0]} to {path}")
    return path


def load_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    pairs = np.asarray(orjson.loads(path.read_bytes()), dtype=np.float64)
    return pairs[..., 0] + 1j * pairs[..., 1]


def haar_unitary(gen: np.random.Generator, q: int) -> np.ndarray:
    """Haar-random q x q unitary from the QR decomposition of a complex Ginibre matrix."""
    z = (gen.standard_normal((q, q)) + 1j * gen.standard_normal((q, q))) / np.sqrt(2)
    u, r = qr(z)
    d = np.diag(r)
    return u * (d / np.abs(d))
