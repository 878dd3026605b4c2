import os
import yaml
from pydantic import BaseModel, ConfigDict, Field
import logging

THREADS_ENV_VAR = "QUDIT_BPQM_THREADS"


class Config(BaseModel):
    """Run defaults for density evolution and the dense verification suites."""

    model_config = ConfigDict(extra="forbid")

    # Monte-Carlo density evolution
    bag_size: int = Field(10000, ge=1, description="Number of eigen lists M per bag.")
    max_iterations: int = Field(100, ge=1, description="LDPC density-evolution iterations T.")
    convergence_delta: float = Field(1e-6, gt=0, description="Mean PGM error below which an LDPC run has converged.")
    bisection_tolerance: float = Field(0.01, gt=0, description="Bracket width at which the lambda0 bisection stops.")
    target_block_error: float = Field(0.1, ge=0, description="Polar design block error budget epsilon.")
    seed: int = Field(2025, ge=0, description="Base seed of every random stream.")
    threads: int = Field(1, ge=1, description="Worker threads used by the bag kernels.")

    # Resource guards
    max_leaf_samples: int = Field(1 << 25, ge=1, description="Upper bound on M * 2**n for polar density evolution.")
    dense_q_limit: int = Field(7, ge=2, description="Largest q for q**2 x q**2 dense unitaries and the check oracle.")
    pgm_oracle_q_limit: int = Field(16, ge=2, description="Largest q for the dense PGM and bit-node oracles.")
    controlled_dim_limit: int = Field(512, ge=4, description="Largest dimension of a controlled BPQM unitary.")


def load_config(path: str | None = None) -> Config:
    base_dir = os.path.dirname(os.path.abspath(__file__))
    config_path = path or os.path.join(base_dir, "config.yaml")
    logging.info(f"Loading configuration from {config_path}")
    with open(config_path, "r") as f:
        values = yaml.safe_load(f) or {}

    threads = os.getenv(THREADS_ENV_VAR)
    if threads:
        logging.info(f"Using {threads} threads from {THREADS_ENV_VAR}")
        values["threads"] = int(threads)
    return Config(**values)
