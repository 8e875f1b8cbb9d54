import numpy as np
import pytest

from dane_sim.cluster import build_cluster
from dane_sim.data import gen_logistic, gen_ridge
from dane_sim.model import LossModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_ridge():
    data, w_bar = gen_ridge(120, 8, noise_sigma=0.1, seed=3)
    return LossModel("ridge", reg_mu=0.05), data


@pytest.fixture
def small_logistic():
    data, w_bar = gen_logistic(120, 8, seed=4)
    return LossModel("logistic", reg_mu=0.05), data


@pytest.fixture
def ridge_cluster():
    data, _ = gen_ridge(240, 12, seed=5)
    return build_cluster(LossModel("ridge", reg_mu=0.05), data, 4, seed=1)


@pytest.fixture
def logistic_cluster():
    data, _ = gen_logistic(240, 12, seed=6)
    return build_cluster(LossModel("logistic", reg_mu=0.05), data, 4, seed=2)


CRITERIA = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line, then assert it."""
    def check(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        CRITERIA.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
