"""
BPQM check-node and bit-node eigen-list updates.

Check node: W1 [check] W2 is a heralded mixture over outcomes m with
    p_m = (1/q^2) sum_j l1_{m+j} l2_{-j},   lambda^(m)_j = l1_{m+j} l2_{-j} / (q p_m).
Bit node: W1 [bit] W2 is a single symmetric channel with
    lambda_j = (1/q) sum_k l1_k l2_{j-k}.
All indices are taken mod q.
"""

import logging
from typing import Iterable

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, field_validator

from qudit_bpqm.core.channels.spectra import (
    EigenList,
    GramRow,
    LogBase,
    canonical_states,
    channel_fidelity,
    dft_matrix,
    eigen_to_gram,
    fourier_register_permutation,
    gram_to_eigen,
    holevo_information,
    is_one_parameter,
    pgm_error,
)
from qudit_bpqm.core.errors import (
    ContractViolation,
    DimensionMismatch,
    FidelityBoundViolation,
    GuardViolation,
    InvalidEigenList,
)

ZERO_BRANCH_TOL = 1e-15
PROB_TOL = 1e-9
CHECK_ORACLE_Q_LIMIT = 7
BIT_ORACLE_Q_LIMIT = 16
PURITY_TOL = 1e-9


def bit_combine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cyclic convolution divided by q, symmetric in (a, b) bit for bit."""
    q = a.shape[1]
    idx = (np.arange(q)[:, None] - np.arange(q)[None, :]) % q
    forward = np.einsum("nk,njk->nj", a, b[:, idx])
    backward = np.einsum("nk,njk->nj", b, a[:, idx])
    out = 0.5 * (forward + backward) / q
    return out * (q / out.sum(axis=1, keepdims=True))


def check_branches_rows(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Branch probabilities (n, q) and branch eigen lists (n, q, q) indexed [row, m, j]."""
    q = a.shape[1]
    m = np.arange(q)[:, None]
    j = np.arange(q)[None, :]
    products = a[:, (m + j) % q] * b[:, (-np.arange(q)) % q][:, None, :]

    weights = products.sum(axis=2)
    lists = np.divide(q * products, weights[..., None], out=np.zeros_like(products), where=weights[..., None] > 0)

    probs = weights / q**2
    probs[probs < ZERO_BRANCH_TOL] = 0.0
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, lists


def _same_q(lam1: EigenList, lam2: EigenList) -> int:
    if lam1.q != lam2.q:
        raise DimensionMismatch(f"Cannot combine q={lam1.q} with q={lam2.q}")
    return lam1.q


class Branch(BaseModel):
    model_config = ConfigDict(frozen=True)

    prob: float = Field(ge=0.0, le=1.0 + PROB_TOL, description="Probability of the heralded outcome.")
    eigenlist: EigenList = Field(description="Eigen list of the channel seen on this outcome.")
    label: int | None = Field(None, description="Check-node outcome m, when the branch comes from one.")


class HeraldedEnsemble(BaseModel):
    """Mixture of symmetric PSCs whose branch identity sits in a classical register."""

    model_config = ConfigDict(frozen=True)

    branches: tuple[Branch, ...]

    @field_validator("branches")
    @classmethod
    def _validate_branches(cls, branches):
        kept = tuple(b for b in branches if b.prob > 0.0)
        if not kept:
            raise InvalidEigenList("A heralded ensemble needs at least one branch of positive probability")
        if len({b.eigenlist.q for b in kept}) != 1:
            raise DimensionMismatch("All branches of an ensemble must share q")
        total = sum(b.prob for b in kept)
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidEigenList(f"Branch probabilities sum to {total}, expected 1")
        return kept

    @property
    def q(self) -> int:
        return self.branches[0].eigenlist.q

    @classmethod
    def single(cls, lam: EigenList) -> "HeraldedEnsemble":
        return cls(branches=(Branch(prob=1.0, eigenlist=lam),))

    @classmethod
    def merged(cls, weighted: Iterable[tuple[float, EigenList]]) -> "HeraldedEnsemble":
        """Ensemble with bitwise-identical eigen lists merged, first occurrence keeping its place."""
        pooled: dict[tuple[float, ...], list] = {}
        for prob, lam in weighted:
            if prob <= 0.0:
                continue
            if lam.values in pooled:
                pooled[lam.values][0] += prob
            else:
                pooled[lam.values] = [prob, lam]
        total = sum(prob for prob, _ in pooled.values())
        return cls(branches=tuple(Branch(prob=prob / total, eigenlist=lam) for prob, lam in pooled.values()))

    def to_json(self) -> bytes:
        return orjson.dumps([{"prob": b.prob, "eigenlist": list(b.eigenlist.values)} for b in self.branches])

    @classmethod
    def from_json(cls, payload: bytes | str) -> "HeraldedEnsemble":
        records = orjson.loads(payload)
        return cls(branches=tuple(Branch(prob=r["prob"], eigenlist=EigenList(values=r["eigenlist"])) for r in records))


def check_combine(lam1: EigenList, lam2: EigenList) -> HeraldedEnsemble:
    _same_q(lam1, lam2)
    probs, lists = check_branches_rows(lam1.array[None, :], lam2.array[None, :])
    branches = [
        Branch(prob=float(probs[0, m]), eigenlist=EigenList(values=lists[0, m]), label=m)
        for m in range(lam1.q)
        if probs[0, m] > 0.0
    ]
    return HeraldedEnsemble(branches=tuple(branches))


def bit_combine(lam1: EigenList, lam2: EigenList) -> EigenList:
    _same_q(lam1, lam2)
    return EigenList(values=bit_combine_rows(lam1.array[None, :], lam2.array[None, :])[0])


def check_combine_heralded(e1: HeraldedEnsemble, e2: HeraldedEnsemble) -> HeraldedEnsemble:
    if e1.q != e2.q:
        raise DimensionMismatch(f"Cannot combine q={e1.q} with q={e2.q}")
    weighted = []
    for b1 in e1.branches:
        for b2 in e2.branches:
            for branch in check_combine(b1.eigenlist, b2.eigenlist).branches:
                weighted.append((b1.prob * b2.prob * branch.prob, branch.eigenlist))
    return HeraldedEnsemble.merged(weighted)


def bit_combine_heralded(e1: HeraldedEnsemble, e2: HeraldedEnsemble) -> HeraldedEnsemble:
    if e1.q != e2.q:
        raise DimensionMismatch(f"Cannot combine q={e1.q} with q={e2.q}")
    weighted = [
        (b1.prob * b2.prob, bit_combine(b1.eigenlist, b2.eigenlist)) for b1 in e1.branches for b2 in e2.branches
    ]
    return HeraldedEnsemble.merged(weighted)


def ensemble_holevo(e: HeraldedEnsemble, base: LogBase = LogBase.NATURAL) -> float:
    return sum(b.prob * holevo_information(b.eigenlist, base) for b in e.branches)


def ensemble_fidelity(e: HeraldedEnsemble) -> float:
    return sum(b.prob * channel_fidelity(b.eigenlist) for b in e.branches)


def ensemble_pgm_error(e: HeraldedEnsemble) -> float:
    return sum(b.prob * pgm_error(b.eigenlist) for b in e.branches)


def holevo_chain_rule_gap(lam1: EigenList, lam2: EigenList) -> float:
    """I(W1 [check] W2) + I(W1 [bit] W2) - I(W1) - I(W2) in nats; zero up to round-off."""
    combined = ensemble_holevo(check_combine(lam1, lam2)) + holevo_information(bit_combine(lam1, lam2))
    return combined - holevo_information(lam1) - holevo_information(lam2)


def _phase_residual(outputs: list[np.ndarray]) -> float:
    """Largest distance of outputs[u] from the ray through outputs[0]; zero when they differ by a global phase."""
    ref = outputs[0]
    norm2 = np.vdot(ref, ref).real
    if norm2 < ZERO_BRANCH_TOL:
        return 0.0
    return max(float(np.linalg.norm(v - ref * (np.vdot(ref, v) / norm2))) for v in outputs[1:])


def check_combine_oracle(lam1: EigenList, lam2: EigenList, q_limit: int = CHECK_ORACLE_Q_LIMIT) -> HeraldedEnsemble:
    """Check-node ensemble read off dense states after the Fourier-basis permutation."""
    q = _same_q(lam1, lam2)
    if q > q_limit:
        raise GuardViolation(f"Dense check-node oracle limited to q <= {q_limit}, got {q}")

    fourier = dft_matrix(q)
    fourier2 = np.kron(fourier, fourier)
    permutation = fourier_register_permutation(q, lambda j, jp: (j + jp, -jp))
    u_tilde = fourier2 @ permutation @ fourier2.conj().T
    psi1, psi2 = canonical_states(lam1), canonical_states(lam2)

    found = []
    for m in range(q):
        project = np.kron(fourier[:, m].conj()[None, :], np.eye(q))
        weight = 0.0
        conditional = []
        for l in range(q):
            outputs = [project @ u_tilde @ np.kron(psi1[:, u], psi2[:, (u - l) % q]) for u in range(q)]
            weight += sum(np.vdot(v, v).real for v in outputs) / q
            # the branch is pure only if every u leaves the same state up to phase
            residual = _phase_residual(outputs)
            if residual > PURITY_TOL:
                logging.error(f"Check-node branch m={m}, l={l} is not rank one")
                raise ContractViolation(f"check-node branch m={m} purity", residual)
            conditional.append(outputs[0])
        prob = weight / q
        if prob < ZERO_BRANCH_TOL:
            continue
        states = np.column_stack(conditional)
        states /= np.linalg.norm(states, axis=0)
        gram_row = states[:, 0].conj() @ states
        found.append((m, prob, gram_to_eigen(GramRow(entries=gram_row))))

    total = sum(prob for _, prob, _ in found)
    return HeraldedEnsemble(branches=tuple(Branch(prob=p / total, eigenlist=lam, label=m) for m, p, lam in found))


def bit_combine_oracle(lam1: EigenList, lam2: EigenList, q_limit: int = BIT_ORACLE_Q_LIMIT) -> EigenList:
    """Bit-node eigen list from the Hadamard product of the two Gram rows."""
    q = _same_q(lam1, lam2)
    if q > q_limit:
        raise GuardViolation(f"Bit-node oracle limited to q <= {q_limit}, got {q}")
    g = eigen_to_gram(lam1).array * eigen_to_gram(lam2).array
    return gram_to_eigen(GramRow(entries=g))


class FidelityBoundReport(BaseModel):
    """Both sides of the fidelity inequalities for one pair of combined channels."""

    q: int
    fidelity_1: float
    fidelity_2: float
    bit_fidelity: float = Field(description="F(W1 [bit] W2)")
    bit_bound: float = Field(description="(q-1) F(W1) F(W2)")
    check_fidelity: float = Field(description="Probability-weighted F of the check-node ensemble")
    check_bound: float = Field(description="F(W1) + F(W2) + (q-1) F(W1) F(W2)")
    special_case: bool = Field(False, description="Both inputs belong to the one-parameter family")
    special_bit_value: float | None = Field(None, description="F(W1) F(W2), equal to bit_fidelity in the special case")
    special_check_bound: float | None = Field(None, description="F(W1) + F(W2) - F(W1) F(W2)")

    def violations(self, atol: float = 1e-9) -> list[str]:
        found = []
        if self.bit_fidelity > self.bit_bound + atol:
            found.append(f"bit node: {self.bit_fidelity} > {self.bit_bound}")
        if self.check_fidelity > self.check_bound + atol:
            found.append(f"check node: {self.check_fidelity} > {self.check_bound}")
        if self.special_case:
            if abs(self.bit_fidelity - self.special_bit_value) > atol:
                found.append(f"bit node special case: {self.bit_fidelity} != {self.special_bit_value}")
            if self.check_fidelity > self.special_check_bound + atol:
                found.append(f"check node special case: {self.check_fidelity} > {self.special_check_bound}")
        return found


def _bound_report(q, f1, f2, bit_fidelity, check_fidelity, special_case) -> FidelityBoundReport:
    return FidelityBoundReport(
        q=q,
        fidelity_1=f1,
        fidelity_2=f2,
        bit_fidelity=bit_fidelity,
        bit_bound=(q - 1) * f1 * f2,
        check_fidelity=check_fidelity,
        check_bound=f1 + f2 + (q - 1) * f1 * f2,
        special_case=special_case,
        special_bit_value=f1 * f2 if special_case else None,
        special_check_bound=f1 + f2 - f1 * f2 if special_case else None,
    )


def _raise_on_violation(report: FidelityBoundReport, atol: float) -> FidelityBoundReport:
    violations = report.violations(atol)
    if violations:
        logging.error(f"Fidelity bounds violated: {violations}")
        raise FidelityBoundViolation("; ".join(violations))
    return report


def fidelity_bound_check(lam1: EigenList, lam2: EigenList, atol: float = 1e-9) -> FidelityBoundReport:
    q = _same_q(lam1, lam2)
    special_case = all(is_one_parameter(lam) and lam.values[0] >= 1.0 for lam in (lam1, lam2))
    report = _bound_report(
        q,
        channel_fidelity(lam1),
        channel_fidelity(lam2),
        channel_fidelity(bit_combine(lam1, lam2)),
        ensemble_fidelity(check_combine(lam1, lam2)),
        special_case,
    )
    return _raise_on_violation(report, atol)


def heralded_fidelity_bound_check(e1: HeraldedEnsemble, e2: HeraldedEnsemble, atol: float = 1e-9) -> FidelityBoundReport:
    if e1.q != e2.q:
        raise DimensionMismatch(f"Cannot combine q={e1.q} with q={e2.q}")
    report = _bound_report(
        e1.q,
        ensemble_fidelity(e1),
        ensemble_fidelity(e2),
        ensemble_fidelity(bit_combine_heralded(e1, e2)),
        ensemble_fidelity(check_combine_heralded(e1, e2)),
        special_case=False,
    )
    return _raise_on_violation(report, atol)
