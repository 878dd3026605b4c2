"""
Randomized verification suites: closed forms against dense oracles and unitary contracts.
"""

import logging
from enum import Enum
from typing import Callable

import numpy as np
from pydantic import BaseModel

from qudit_bpqm.config import Config
from qudit_bpqm.core.channels import (
    EigenList,
    bit_combine,
    bit_combine_oracle,
    build_bit_unitary,
    build_check_unitary,
    build_controlled_bit_unitary,
    channel_fidelity,
    check_combine,
    check_combine_oracle,
    check_unitary_branches,
    conjugate_unitary,
    fidelity_bound_check,
    fidelity_holevo_bounds,
    haar_unitary,
    holevo_chain_rule_gap,
    pgm_error,
    pgm_error_oracle,
    random_eigenlist,
    verify_contract,
)
from qudit_bpqm.core.density_evolution import RngStream
from qudit_bpqm.core.errors import QuditBpqmError

ORACLE_TOL = 1e-9


class SuiteStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


class SuiteResult(BaseModel):
    name: str
    status: SuiteStatus
    max_residual: float | None = None
    detail: str = ""


def ensemble_residual(closed, oracle) -> float:
    """Largest mismatch between two ensembles matched by branch label."""
    a = {b.label: b for b in closed.branches}
    b = {b.label: b for b in oracle.branches}
    if a.keys() != b.keys():
        return float("inf")
    return max(
        max(abs(a[m].prob - b[m].prob), float(np.abs(a[m].eigenlist.array - b[m].eigenlist.array).max())) for m in a
    )


def _pairs(rng: RngStream, q: int, count: int) -> list[tuple[EigenList, EigenList]]:
    gen = rng.generator()
    return [(random_eigenlist(gen, q), random_eigenlist(gen, q)) for _ in range(count)]


def _run_suite(name: str, body: Callable[[], float], tol: float = ORACLE_TOL) -> SuiteResult:
    try:
        residual = body()
    except QuditBpqmError as e:
        logging.warning(f"Suite {name} raised {type(e).__name__}: {e}")
        return SuiteResult(name=name, status=SuiteStatus.FAIL, detail=f"{type(e).__name__}: {e}")
    status = SuiteStatus.PASS if residual <= tol else SuiteStatus.FAIL
    return SuiteResult(name=name, status=status, max_residual=residual)


def _skip(name: str, reason: str) -> SuiteResult:
    return SuiteResult(name=name, status=SuiteStatus.SKIP, detail=reason)


def run_verify_suite(q: int, config: Config, pairs: int = 200, seed: int = 0) -> list[SuiteResult]:
    rng = RngStream(seed=seed).child("verify", q)
    sample = _pairs(rng.child("pairs"), q, pairs)
    unitary_sample = sample[: max(1, min(pairs, 50))]
    dense = q <= config.dense_q_limit
    results = []

    def pgm_suite():
        return max(abs(pgm_error(a) - pgm_error_oracle(a, config.pgm_oracle_q_limit)) for a, _ in sample)

    def check_oracle_suite():
        return max(ensemble_residual(check_combine(a, b), check_combine_oracle(a, b, config.dense_q_limit)) for a, b in sample)

    def bit_oracle_suite():
        return max(
            float(np.abs(bit_combine(a, b).array - bit_combine_oracle(a, b, config.pgm_oracle_q_limit).array).max())
            for a, b in sample
        )

    def chain_rule_suite():
        return max(abs(holevo_chain_rule_gap(a, b)) for a, b in sample)

    def fidelity_suite():
        for a, b in sample:
            fidelity_bound_check(a, b)
            lower, upper = fidelity_holevo_bounds(a)
            f = channel_fidelity(a)
            if not lower - ORACLE_TOL <= f <= upper + ORACLE_TOL:
                return abs(f - min(max(f, lower), upper))
        return 0.0

    def check_unitary_suite():
        bundle = build_check_unitary(q, config.dense_q_limit)
        residual = verify_contract(bundle)
        for a, b in unitary_sample:
            residual = max(residual, ensemble_residual(check_combine(a, b), check_unitary_branches(a, b, bundle)))
        return residual

    def bit_unitary_suite():
        return max(verify_contract(build_bit_unitary(a, b, config.dense_q_limit)) for a, b in unitary_sample)

    def conjugated_suite():
        gen = rng.child("haar").generator()
        residual = 0.0
        for a, b in unitary_sample:
            v = haar_unitary(gen, q)
            residual = max(residual, verify_contract(conjugate_unitary(build_bit_unitary(a, b, config.dense_q_limit), v)))
            residual = max(residual, verify_contract(conjugate_unitary(build_check_unitary(q, config.dense_q_limit), v)))
        return residual

    def controlled_suite():
        labels = max(1, min(4, config.controlled_dim_limit // (q * q)))
        bundle = build_controlled_bit_unitary(unitary_sample[:labels], config.dense_q_limit, config.controlled_dim_limit)
        return verify_contract(bundle)

    results.append(_run_suite("pgm-oracle", pgm_suite) if q <= config.pgm_oracle_q_limit else _skip("pgm-oracle", "q too large"))
    results.append(_run_suite("check-oracle", check_oracle_suite) if dense else _skip("check-oracle", "q too large"))
    results.append(_run_suite("bit-oracle", bit_oracle_suite) if q <= config.pgm_oracle_q_limit else _skip("bit-oracle", "q too large"))
    results.append(_run_suite("chain-rule", chain_rule_suite))
    results.append(_run_suite("fidelity-bounds", fidelity_suite))
    for name, suite in (
        ("check-unitary", check_unitary_suite),
        ("bit-unitary", bit_unitary_suite),
        ("conjugated-unitary", conjugated_suite),
        ("controlled-unitary", controlled_suite),
    ):
        results.append(_run_suite(name, suite) if dense else _skip(name, "q too large"))

    for r in results:
        logging.info(f"{r.name}: {r.status.value} (residual {r.max_residual})")
    return results


def format_table(results: list[SuiteResult]) -> str:
    lines = [f"{'suite':<20} {'status':<6} {'max residual':>14}  detail"]
    for r in results:
        residual = f"{r.max_residual:.3e}" if r.max_residual is not None else "-"
        lines.append(f"{r.name:<20} {r.status.value:<6} {residual:>14}  {r.detail}")
    return "\n".join(lines)
