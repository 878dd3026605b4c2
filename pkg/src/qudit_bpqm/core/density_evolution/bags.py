"""
Monte-Carlo bags of eigen lists and the seeded streams that drive them.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import orjson
import xxhash
from pydantic import BaseModel, ConfigDict, Field, field_validator

from qudit_bpqm.core.channels.combine import bit_combine_rows, check_branches_rows
from qudit_bpqm.core.channels.spectra import EigenList, LogBase, clean_rows, fidelity_rows, holevo_rows, pgm_error_rows
from qudit_bpqm.core.errors import DimensionMismatch, InvalidEigenList, SizeMismatch

CHUNK_ROWS = 4096
PERFECT_TOL = 1e-9


def _label_to_int(label: int | str) -> int:
    if isinstance(label, str):
        return xxhash.xxh64_intdigest(label)
    if label < 0:
        raise ValueError(f"Stream labels must be non-negative, got {label}")
    return int(label)


class RngStream(BaseModel):
    """A named position in the tree of random streams hanging off one seed.

    Children are addressed by label paths, so a stream's draws depend only on
    (seed, path) and never on how many other streams were used before it.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0)
    path: tuple[int, ...] = ()

    def child(self, *labels: int | str) -> "RngStream":
        return RngStream(seed=self.seed, path=self.path + tuple(_label_to_int(label) for label in labels))

    def generator(self) -> np.random.Generator:
        """A fresh generator; every call replays the same draws."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *self.path])))


class ChannelBag(BaseModel):
    """M eigen lists of one alphabet size, stored as an immutable (M, q) array."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    samples: np.ndarray

    @field_validator("samples", mode="before")
    @classmethod
    def _validate_samples(cls, value):
        arr = clean_rows(value)
        if arr.shape[0] < 1:
            raise InvalidEigenList("A bag needs at least one sample")
        arr.flags.writeable = False
        return arr

    @property
    def q(self) -> int:
        return self.samples.shape[1]

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @classmethod
    def constant(cls, lam: EigenList, size: int) -> "ChannelBag":
        return cls(samples=np.tile(lam.array, (size, 1)))

    @classmethod
    def from_eigenlists(cls, lams: Sequence[EigenList]) -> "ChannelBag":
        if len({lam.q for lam in lams}) > 1:
            raise DimensionMismatch("All samples of a bag must share q")
        return cls(samples=np.array([lam.array for lam in lams]))

    def eigenlists(self) -> list[EigenList]:
        return [EigenList(values=row) for row in self.samples]

    def is_perfect(self, atol: float = PERFECT_TOL) -> bool:
        return bool(np.abs(self.samples - 1.0).max() <= atol)

    def to_json(self) -> bytes:
        return orjson.dumps({"q": self.q, "samples": self.samples}, option=orjson.OPT_SERIALIZE_NUMPY)

    @classmethod
    def from_json(cls, payload: bytes | str) -> "ChannelBag":
        record = orjson.loads(payload)
        bag = cls(samples=record["samples"])
        if bag.q != record["q"]:
            raise DimensionMismatch(f"Checkpoint declares q={record['q']} but holds lists of length {bag.q}")
        return bag

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_json())
        logging.info(f"Saved bag of {self.size} eigen lists to {path}")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ChannelBag":
        logging.info(f"Loading bag from {path}")
        return cls.from_json(Path(path).read_bytes())


class BagStats(BaseModel):
    mean_pgm_error: float
    mean_holevo: float = Field(description="Mean symmetric Holevo information in the requested base.")
    mean_fidelity: float


def bag_stats(bag: ChannelBag, base: LogBase = LogBase.NATURAL) -> BagStats:
    return BagStats(
        mean_pgm_error=float(pgm_error_rows(bag.samples).mean()),
        mean_holevo=float(holevo_rows(bag.samples, base).mean()),
        mean_fidelity=float(fidelity_rows(bag.samples).mean()),
    )


def chunked_rows(func: Callable[[slice], np.ndarray], size: int, threads: int = 1) -> np.ndarray:
    """Evaluate func over consecutive row slices and stack the results in slice order."""
    slices = [slice(start, min(start + CHUNK_ROWS, size)) for start in range(0, size, CHUNK_ROWS)]
    if threads <= 1 or len(slices) == 1:
        return np.concatenate([func(s) for s in slices])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate(list(pool.map(func, slices)))


def _pairable(b1: ChannelBag, b2: ChannelBag) -> None:
    if b1.q != b2.q:
        raise DimensionMismatch(f"Cannot combine bags with q={b1.q} and q={b2.q}")
    if b1.size != b2.size:
        raise SizeMismatch(f"Bags hold {b1.size} and {b2.size} samples")


def bag_bit_combine(b1: ChannelBag, b2: ChannelBag, rng: RngStream, threads: int = 1) -> ChannelBag:
    """
    Pair b1 with a random permutation of b2 and bit-combine each pair.

    Args:
        b1: First bag.
        b2: Second bag, permuted before pairing.
        rng: Stream owned by this combine; nothing else may draw from it.
        threads: Worker threads for the row kernel.

    Returns:
        Bag of the same size as the inputs.
    """
    _pairable(b1, b2)
    partner = b2.samples[rng.generator().permutation(b2.size)]
    out = chunked_rows(lambda s: bit_combine_rows(b1.samples[s], partner[s]), b1.size, threads)
    return ChannelBag(samples=out)


def bag_check_combine(b1: ChannelBag, b2: ChannelBag, rng: RngStream, threads: int = 1) -> ChannelBag:
    """
    Pair b1 with a random permutation of b2 and keep one sampled check-node branch per pair.

    Args:
        b1: First bag.
        b2: Second bag, permuted before pairing.
        rng: Stream owned by this combine; the permutation and the branch draws both come from it.
        threads: Worker threads for the row kernel.

    Returns:
        Bag of the same size as the inputs.
    """
    _pairable(b1, b2)
    gen = rng.generator()
    partner = b2.samples[gen.permutation(b2.size)]
    uniforms = gen.random(b1.size)
    q = b1.q

    def sample_branches(s: slice) -> np.ndarray:
        probs, lists = check_branches_rows(b1.samples[s], partner[s])
        cdf = np.cumsum(probs, axis=1)
        # inverse CDF over m = 0..q-1; zero-probability branches can never be hit
        picks = (cdf <= (uniforms[s] * cdf[:, -1])[:, None]).sum(axis=1)
        picks = np.minimum(picks, q - 1)
        return lists[np.arange(lists.shape[0]), picks]

    return ChannelBag(samples=chunked_rows(sample_branches, b1.size, threads))
