import numpy as np
import pytest

from qudit_bpqm.config import Config
from qudit_bpqm.core.channels import EigenList, random_eigenlist
from qudit_bpqm.core.density_evolution import RngStream

SAMPLE = [2.2, 0.4, 0.4]


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


@pytest.fixture
def sample_lam():
    return EigenList(values=SAMPLE)


@pytest.fixture
def stream():
    return RngStream(seed=2025)


@pytest.fixture
def config():
    return Config()


def random_pairs(gen, q, count, sparsity=0.0):
    return [(random_eigenlist(gen, q, sparsity), random_eigenlist(gen, q, sparsity)) for _ in range(count)]
