import sys

import numpy as np
import pytest
from scipy import stats

from fairsmile.core import standardize


def quantile_sample(dist, n):
    """Deterministic stratified sample: the (i - 1/2)/n quantiles of ``dist``."""
    return dist.ppf((np.arange(n) + 0.5) / n)


@pytest.fixture(scope="session")
def normal_sample():
    return standardize(quantile_sample(stats.norm, 200_000), 1, source="normal-quantiles")


@pytest.fixture(scope="session")
def exp_sample():
    return standardize(quantile_sample(stats.expon, 1_000_000) - 1.0, 1, source="exp-quantiles")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
