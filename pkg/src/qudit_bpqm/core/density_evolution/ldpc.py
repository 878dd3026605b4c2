"""
Density evolution of BPQM decoding on (dv, dc)-regular LDPC ensembles and the lambda0 threshold search.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel, Field
from scipy.optimize import brentq
from tqdm import tqdm

from qudit_bpqm.core.channels.spectra import EigenList, LogBase, holevo_information, is_one_parameter, one_parameter_eigenlist
from qudit_bpqm.core.density_evolution.bags import ChannelBag, RngStream, bag_bit_combine, bag_check_combine, bag_stats
from qudit_bpqm.core.errors import DimensionMismatch, InvalidEnsemble, NonMonotoneVerdict, NoTransition, SizeMismatch

DEFAULT_DELTA = 1e-6
DEFAULT_ITERATIONS = 100
DEFAULT_TOLERANCE = 0.01


class Verdict(str, Enum):
    CONVERGED = "converged"
    NOT_CONVERGED = "not-converged"


class LdpcDERun(BaseModel):
    dv: int
    dc: int
    q: int
    lam0: float | None = Field(None, description="lambda0 when the channel belongs to the one-parameter family.")
    eigenlist: tuple[float, ...]
    M: int
    T: int
    delta: float
    seed: int
    per_iteration_error: list[float] = Field(description="Mean PGM error of the message bag after each iteration.")
    verdict: Verdict

    @property
    def final_error(self) -> float:
        return self.per_iteration_error[-1]

    def trajectory_rows(self) -> list[dict]:
        return [
            {"lambda0": self.lam0, "iteration": t + 1, "mean_pgm_error": error}
            for t, error in enumerate(self.per_iteration_error)
        ]


class BisectionStep(BaseModel):
    lambda0: float
    verdict: Verdict
    final_error: float
    iterations: int


class ThresholdResult(BaseModel):
    dv: int
    dc: int
    q: int
    lambda0_threshold: float
    bracket_width: float
    M: int
    T: int
    seed: int
    delta: float
    path: list[BisectionStep] = Field(default_factory=list, description="Every verdict evaluated, endpoints first.")


class CurvePoint(BaseModel):
    lambda0: float
    final_error: float
    verdict: Verdict
    iterations: int


def _validate_degrees(dv: int, dc: int) -> None:
    if dv < 2 or dc < 2:
        raise InvalidEnsemble(f"Degrees must be at least 2, got dv={dv}, dc={dc}")


def ldpc_de_iteration(
    channel_bag: ChannelBag, message_bag: ChannelBag, dv: int, dc: int, rng: RngStream, threads: int = 1
) -> ChannelBag:
    """One round: check nodes fold dc - 1 messages, bit nodes fold dv - 1 of those with the channel."""
    _validate_degrees(dv, dc)
    check = message_bag
    for fold in range(dc - 2):
        check = bag_check_combine(check, message_bag, rng.child("check", fold), threads)

    extrinsic = check
    for fold in range(dv - 2):
        extrinsic = bag_bit_combine(extrinsic, check, rng.child("bit", fold), threads)

    return bag_bit_combine(channel_bag, extrinsic, rng.child("channel"), threads)


def ldpc_de_run(
    lam: EigenList,
    dv: int,
    dc: int,
    M: int,
    T: int = DEFAULT_ITERATIONS,
    delta: float = DEFAULT_DELTA,
    rng: RngStream | None = None,
    threads: int = 1,
    progress: bool = False,
    initial_messages: ChannelBag | None = None,
    checkpoint: str | Path | None = None,
) -> LdpcDERun:
    """
    Run up to T iterations from the channel bag, or from initial_messages when resuming.

    The message bag after the last iteration is saved to checkpoint when one is given.
    """
    _validate_degrees(dv, dc)
    rng = rng or RngStream(seed=0)
    channel_bag = ChannelBag.constant(lam, M)
    message_bag = channel_bag
    if initial_messages is not None:
        if initial_messages.q != lam.q:
            raise DimensionMismatch(f"Resumed messages have q={initial_messages.q}, channel has q={lam.q}")
        if initial_messages.size != M:
            raise SizeMismatch(f"Resumed bag holds {initial_messages.size} eigen lists, expected M={M}")
        message_bag = initial_messages

    errors = []
    verdict = Verdict.NOT_CONVERGED
    for t in tqdm(range(1, T + 1), desc="LDPC DE", disable=not progress):
        message_bag = ldpc_de_iteration(channel_bag, message_bag, dv, dc, rng.child("iteration", t), threads)
        errors.append(bag_stats(message_bag).mean_pgm_error)
        logging.debug(f"Iteration {t}: mean PGM error {errors[-1]:.3e}")
        if errors[-1] < delta or message_bag.is_perfect():
            verdict = Verdict.CONVERGED
            break

    if checkpoint is not None:
        message_bag.save(checkpoint)
    return LdpcDERun(
        dv=dv,
        dc=dc,
        q=lam.q,
        lam0=lam.values[0] if is_one_parameter(lam) else None,
        eigenlist=lam.values,
        M=M,
        T=T,
        delta=delta,
        seed=rng.seed,
        per_iteration_error=errors,
        verdict=verdict,
    )


def _step(lambda0: float, dv: int, dc: int, q: int, M: int, T: int, delta: float, rng: RngStream, threads: int) -> BisectionStep:
    run = ldpc_de_run(one_parameter_eigenlist(q, lambda0), dv, dc, M, T, delta, rng, threads)
    logging.info(f"lambda0={lambda0:.6f}: {run.verdict.value} after {len(run.per_iteration_error)} iterations")
    return BisectionStep(
        lambda0=lambda0, verdict=run.verdict, final_error=run.final_error, iterations=len(run.per_iteration_error)
    )


def _check_monotone(path: list[BisectionStep]) -> None:
    converged = [s.lambda0 for s in path if s.verdict == Verdict.CONVERGED]
    failed = [s.lambda0 for s in path if s.verdict == Verdict.NOT_CONVERGED]
    if converged and failed and max(converged) >= min(failed):
        raise NonMonotoneVerdict(
            f"Converged at lambda0={max(converged):.6f} but failed at lambda0={min(failed):.6f}"
        )


def threshold_bisect(
    dv: int,
    dc: int,
    q: int,
    M: int,
    T: int = DEFAULT_ITERATIONS,
    delta: float = DEFAULT_DELTA,
    tol: float = DEFAULT_TOLERANCE,
    rng: RngStream | None = None,
    threads: int = 1,
    progress: bool = False,
) -> ThresholdResult:
    """
    Bisect lambda0 on [1, q] with the DE verdict as predicate.

    Args:
        dv: Variable-node degree.
        dc: Check-node degree.
        q: Alphabet size.
        M: Bag size.
        T: Iterations per verdict.
        delta: Mean PGM error below which a run has converged.
        tol: Bracket width at which the search stops.
        rng: Base stream; each verdict gets its own child.

    Returns:
        The bracket midpoint, its width and every verdict on the path.
    """
    _validate_degrees(dv, dc)
    rng = rng or RngStream(seed=0)
    lo, hi = 1.0, float(q)

    path = [
        _step(lo, dv, dc, q, M, T, delta, rng.child("bisect", "lo"), threads),
        _step(hi, dv, dc, q, M, T, delta, rng.child("bisect", "hi"), threads),
    ]
    if path[0].verdict == path[1].verdict:
        logging.error(f"Both ends of [1, {q}] are {path[0].verdict.value}")
        raise NoTransition(f"DE is {path[0].verdict.value} at both lambda0=1 and lambda0={q}; check M, T and delta")
    _check_monotone(path)

    steps = 0
    with tqdm(desc="bisection", disable=not progress) as bar:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            step = _step(mid, dv, dc, q, M, T, delta, rng.child("bisect", steps), threads)
            path.append(step)
            if step.verdict == Verdict.CONVERGED:
                lo = mid
            else:
                hi = mid
            steps += 1
            bar.update(1)
    _check_monotone(path)

    threshold = 0.5 * (lo + hi)
    logging.info(f"({dv},{dc}) q={q}: lambda0 threshold {threshold:.4f} +- {(hi - lo) / 2:.4f}")
    return ThresholdResult(
        dv=dv,
        dc=dc,
        q=q,
        lambda0_threshold=threshold,
        bracket_width=hi - lo,
        M=M,
        T=T,
        seed=rng.seed,
        delta=delta,
        path=path,
    )


def holevo_limit_lambda0(dv: int, dc: int, q: int) -> float:
    """lambda0 at which I(W) in qits equals the design rate 1 - dv/dc."""
    _validate_degrees(dv, dc)
    rate = 1.0 - dv / dc
    if not 0.0 < rate < 1.0:
        raise InvalidEnsemble(f"Design rate {rate} of ({dv},{dc}) is outside (0, 1)")

    def excess(lambda0: float) -> float:
        return holevo_information(one_parameter_eigenlist(q, lambda0), LogBase.Q) - rate

    return float(brentq(excess, 1.0, float(q), xtol=1e-14, rtol=1e-14))


def ldpc_threshold_curve(
    dv: int,
    dc: int,
    q: int,
    lambda0_grid: Sequence[float],
    M: int,
    T: int = DEFAULT_ITERATIONS,
    delta: float = DEFAULT_DELTA,
    rng: RngStream | None = None,
    threads: int = 1,
) -> list[CurvePoint]:
    """Final mean PGM error after at most T iterations for each lambda0 of the grid."""
    _validate_degrees(dv, dc)
    rng = rng or RngStream(seed=0)

    def evaluate(lambda0: float) -> CurvePoint:
        step = _step(lambda0, dv, dc, q, M, T, delta, rng.child("curve", f"{lambda0:.12g}"), threads=1)
        return CurvePoint(
            lambda0=step.lambda0, final_error=step.final_error, verdict=step.verdict, iterations=step.iterations
        )

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        return list(pool.map(evaluate, [float(x) for x in lambda0_grid]))
