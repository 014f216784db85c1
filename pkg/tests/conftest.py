import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from tremor_bench.dataset import LabeledDataset, derive_subsets, encode_categoricals  # noqa: E402
from tremor_bench.synthetic import make_synthetic_table, write_synthetic_dataset  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def raw_table():
    return make_synthetic_table(seed=0)


@pytest.fixture(scope="session")
def subsets(raw_table):
    return derive_subsets(encode_categoricals(raw_table))


@pytest.fixture(scope="session")
def pdrbd(subsets):
    return subsets[0]


@pytest.fixture(scope="session")
def pdhc(subsets):
    return subsets[1]


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    write_synthetic_dataset(out, seed=0)
    return out


def blobs(n=200, sep=6.0, seed=0, p=2):
    """Two isotropic Gaussian classes whose means are ``sep`` sigmas apart."""
    rng = np.random.default_rng(seed)
    half = n // 2
    shift = np.zeros(p)
    shift[0] = sep
    X = np.vstack([rng.normal(size=(half, p)), rng.normal(size=(n - half, p)) + shift])
    y = np.r_[np.zeros(half, int), np.ones(n - half, int)]
    return LabeledDataset(X, y, tuple(f"x{j}" for j in range(p)))


@pytest.fixture
def blob_data():
    return blobs()


# PASS/FAIL lines from test_acceptance.py, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
