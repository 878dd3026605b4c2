"""
Polar-code density evolution over the W- = W [check] W, W+ = W [bit] W tree, and information-set design.

Leaves are numbered in recursion order: node i at one level has children
2i (check) and 2i + 1 (bit) at the next, 0-based.
"""

import logging
from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm

from qudit_bpqm.core.channels.spectra import EigenList, LogBase, holevo_information, one_parameter_eigenlist, pgm_error_rows
from qudit_bpqm.core.density_evolution.bags import ChannelBag, RngStream, bag_bit_combine, bag_check_combine, bag_stats
from qudit_bpqm.core.errors import GuardViolation

MAX_LEAF_SAMPLES = 1 << 25


class PolarDesignResult(BaseModel):
    n: int = Field(ge=0, description="Polarization levels.")
    N: int = Field(ge=1, description="Block length 2**n.")
    q: int
    per_channel_error: tuple[float, ...] = Field(description="Bag-mean PGM error of each synthetic channel, recursion order.")
    info_set: tuple[int, ...] = Field(description="Sorted 1-based indices of the information set.")
    design_rate: float
    epsilon: float
    seed: int
    M: int

    def normalized_rank_curve(self) -> list[tuple[float, float]]:
        """(rank / N, error) with channels sorted from best to worst."""
        ranked = sorted(self.per_channel_error)
        return [((rank + 1) / self.N, error) for rank, error in enumerate(ranked)]

    def channel_rows(self) -> list[dict]:
        """index, rank and mean PGM error per synthetic channel, ranks 1-based from best."""
        order = np.argsort(np.asarray(self.per_channel_error), kind="stable")
        ranks = np.empty(self.N, dtype=int)
        ranks[order] = np.arange(1, self.N + 1)
        return [
            {"index": i + 1, "rank": int(ranks[i]), "mean_pgm_error": error}
            for i, error in enumerate(self.per_channel_error)
        ]


class SweepRow(BaseModel):
    lambda0: float
    design_rate: float
    holevo_qits: float
    n: int
    M: int
    seed: int
    epsilon: float


def _node_stream(rng: RngStream, level: int, index: int, kind: str) -> RngStream:
    return rng.child("polar", level, index, kind)


def _split(bag: ChannelBag, rng: RngStream, level: int, index: int, threads: int) -> tuple[ChannelBag, ChannelBag]:
    minus = bag_check_combine(bag, bag, _node_stream(rng, level, index, "check"), threads)
    plus = bag_bit_combine(bag, bag, _node_stream(rng, level, index, "bit"), threads)
    return minus, plus


def _guard_leaf_samples(n: int, M: int, max_leaf_samples: int) -> None:
    if n < 0:
        raise ValueError(f"Number of levels must be non-negative, got {n}")
    if M * (1 << n) > max_leaf_samples:
        logging.error(f"Polar DE with M={M}, n={n} would process {M * (1 << n)} leaf samples")
        raise GuardViolation(f"M * 2**n = {M * (1 << n)} exceeds the limit {max_leaf_samples}")


def polar_de(
    lam: EigenList,
    n: int,
    M: int,
    rng: RngStream,
    threads: int = 1,
    max_leaf_samples: int = MAX_LEAF_SAMPLES,
    progress: bool = False,
) -> list[ChannelBag]:
    """All 2**n leaf bags of the polar tree, level by level."""
    _guard_leaf_samples(n, M, max_leaf_samples)

    bags = [ChannelBag.constant(lam, M)]
    for level in tqdm(range(n), desc="polar levels", disable=not progress):
        children = []
        for index, bag in enumerate(bags):
            children.extend(_split(bag, rng, level, index, threads))
        bags = children
        logging.debug(f"Polar level {level + 1} holds {len(bags)} bags")
    return bags


def polar_channel_errors(
    lam: EigenList,
    n: int,
    M: int,
    rng: RngStream,
    threads: int = 1,
    max_leaf_samples: int = MAX_LEAF_SAMPLES,
    progress: bool = False,
) -> np.ndarray:
    """Leaf mean PGM errors of polar_de, walking the tree depth first with one path of bags in memory."""
    _guard_leaf_samples(n, M, max_leaf_samples)
    errors = np.empty(1 << n)
    bar = tqdm(total=1 << n, desc="polar leaves", disable=not progress)

    stack = [(0, 0, ChannelBag.constant(lam, M))]
    while stack:
        level, index, bag = stack.pop()
        if level == n:
            errors[index] = pgm_error_rows(bag.samples).mean()
            bar.update(1)
            continue
        minus, plus = _split(bag, rng, level, index, threads)
        stack.append((level + 1, 2 * index + 1, plus))
        stack.append((level + 1, 2 * index, minus))

    bar.close()
    return errors


def design_from_errors(errors: Sequence[float], epsilon: float, q: int, seed: int, M: int) -> PolarDesignResult:
    errors = np.asarray(errors, dtype=np.float64)
    N = errors.size
    order = np.argsort(errors, kind="stable")
    budget = 4.0 * np.cumsum(errors[order])
    admitted = int(np.searchsorted(budget, epsilon, side="right"))
    if admitted == 0:
        logging.warning(f"Empty polar design: best channel error {errors[order[0]]:.3e} exceeds epsilon/4")

    return PolarDesignResult(
        n=int(np.log2(N)),
        N=N,
        q=q,
        per_channel_error=tuple(float(e) for e in errors),
        info_set=tuple(sorted(int(i) + 1 for i in order[:admitted])),
        design_rate=admitted / N,
        epsilon=epsilon,
        seed=seed,
        M=M,
    )


def design_info_set(bags: Sequence[ChannelBag], epsilon: float, seed: int) -> PolarDesignResult:
    """Largest greedy-by-error set A with 4 * sum of its errors <= epsilon."""
    errors = [bag_stats(bag).mean_pgm_error for bag in bags]
    return design_from_errors(errors, epsilon, q=bags[0].q, seed=seed, M=bags[0].size)


def design_polar_code(
    lam: EigenList,
    n: int,
    epsilon: float,
    M: int,
    rng: RngStream,
    threads: int = 1,
    max_leaf_samples: int = MAX_LEAF_SAMPLES,
    progress: bool = False,
) -> PolarDesignResult:
    errors = polar_channel_errors(lam, n, M, rng, threads, max_leaf_samples, progress)
    result = design_from_errors(errors, epsilon, q=lam.q, seed=rng.seed, M=M)
    logging.info(f"Polar design n={n}: |A|={len(result.info_set)}, rate {result.design_rate:.4f}")
    return result


def rate_vs_lambda0_sweep(
    q: int,
    n: int,
    epsilon: float,
    lambda0_grid: Sequence[float],
    M: int,
    rng: RngStream,
    threads: int = 1,
    max_leaf_samples: int = MAX_LEAF_SAMPLES,
    progress: bool = False,
) -> list[SweepRow]:
    """Design rate and I(W) in qits across the one-parameter channel family."""
    rows = []
    for lambda0 in tqdm(lambda0_grid, desc=f"sweep n={n}", disable=not progress):
        lam = one_parameter_eigenlist(q, lambda0)
        # keyed by value so a point does not depend on the rest of the grid
        point_rng = rng.child("lambda0", f"{lambda0:.12g}")
        result = design_polar_code(lam, n, epsilon, M, point_rng, threads, max_leaf_samples)
        rows.append(
            SweepRow(
                lambda0=float(lambda0),
                design_rate=result.design_rate,
                holevo_qits=holevo_information(lam, LogBase.Q),
                n=n,
                M=M,
                seed=rng.seed,
                epsilon=epsilon,
            )
        )
    return rows


def chain_rule_gap(parent: ChannelBag, minus: ChannelBag, plus: ChannelBag) -> float:
    """Mean Holevo of the two children minus twice the parent's, in nats."""
    return bag_stats(minus).mean_holevo + bag_stats(plus).mean_holevo - 2.0 * bag_stats(parent).mean_holevo
