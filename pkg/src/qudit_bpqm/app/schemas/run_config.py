from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from qudit_bpqm.core.channels.spectra import EigenList, one_parameter_eigenlist
from qudit_bpqm.core.storage import OutputFormat


class Command(str, Enum):
    CHANNEL_INFO = "channel-info"
    COMBINE = "combine"
    POLAR_DESIGN = "polar-design"
    POLAR_SWEEP = "polar-sweep"
    LDPC_RUN = "ldpc-run"
    LDPC_THRESHOLD = "ldpc-threshold"
    VERIFY = "verify"


CHANNEL_COMMANDS = {Command.CHANNEL_INFO, Command.COMBINE, Command.POLAR_DESIGN, Command.LDPC_RUN}
LDPC_COMMANDS = {Command.LDPC_RUN, Command.LDPC_THRESHOLD}


def parse_grid(text: str) -> tuple[float, ...]:
    """'1.0,1.5,2.0' or an inclusive range 'start:stop:step'."""
    if ":" in text:
        start, stop, step = (float(part) for part in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return tuple(float(x) for x in np.round(np.linspace(start, stop, count), 12))
    return tuple(float(part) for part in text.split(",") if part.strip())


def parse_eigenlist(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


class RunConfig(BaseModel):
    """Fully resolved parameters of one CLI invocation, echoed into every output header."""

    command: Command
    q: int = Field(ge=2, description="Alphabet size.")
    eigenlist: tuple[float, ...] | None = Field(None, description="Explicit eigen list of the channel.")
    lambda0: float | None = Field(None, description="lambda0 of the one-parameter channel family.")
    second_eigenlist: tuple[float, ...] | None = Field(None, description="Second channel for combine; defaults to the first.")
    n: list[int] = Field(default_factory=list, description="Polar levels; several values for a sweep.")
    lambda0_grid: tuple[float, ...] = ()
    bag_size: int = Field(10000, ge=1, description="Bag size M.")
    iterations: int = Field(100, ge=1, description="LDPC iterations T.")
    epsilon: float = Field(0.1, ge=0, description="Polar block error budget.")
    delta: float = Field(1e-6, gt=0, description="LDPC convergence threshold on the mean PGM error.")
    tolerance: float = Field(0.01, gt=0, description="Bisection bracket width.")
    dv: int | None = Field(None, ge=2)
    dc: int | None = Field(None, ge=2)
    seed: int = Field(2025, ge=0)
    threads: int = Field(1, ge=1)
    pairs: int = Field(200, ge=1, description="Random pairs per verification suite.")
    output: Path | None = None
    format: OutputFormat = OutputFormat.CSV
    figure_dir: Path | None = None
    checkpoint: Path | None = Field(None, description="File receiving the final LDPC message bag.")
    resume: Path | None = Field(None, description="Message bag checkpoint an LDPC run starts from.")

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.eigenlist is not None and self.lambda0 is not None:
            raise ValueError("Give either an eigen list or lambda0, not both")
        if self.command in CHANNEL_COMMANDS and self.eigenlist is None and self.lambda0 is None:
            raise ValueError(f"{self.command.value} needs --eigenlist or --lambda0")
        for values in (self.eigenlist, self.second_eigenlist):
            if values is not None:
                if len(values) != self.q:
                    raise ValueError(f"Eigen list has {len(values)} entries, q={self.q}")
                EigenList(values=values)
        for lambda0 in ((self.lambda0,) if self.lambda0 is not None else ()) + self.lambda0_grid:
            if not 1.0 <= lambda0 <= self.q:
                raise ValueError(f"lambda0={lambda0} outside [1, {self.q}]")
        if self.command in LDPC_COMMANDS and (self.dv is None or self.dc is None):
            raise ValueError(f"{self.command.value} needs --dv and --dc")
        if self.command in (Command.POLAR_DESIGN, Command.POLAR_SWEEP):
            if not self.n or min(self.n) < 0:
                raise ValueError("Polar commands need non-negative --n")
            if self.command == Command.POLAR_SWEEP and not self.lambda0_grid:
                raise ValueError("polar-sweep needs --grid")
        return self

    def channel(self) -> EigenList:
        if self.eigenlist is not None:
            return EigenList(values=self.eigenlist)
        return one_parameter_eigenlist(self.q, self.lambda0)

    def second_channel(self) -> EigenList:
        if self.second_eigenlist is not None:
            return EigenList(values=self.second_eigenlist)
        return self.channel()
