import numpy as np
import pytest

from kalmanrl import CostModel, LinearSystem, validate_system

ACCEPTANCE_LINES = []


def scalar_model(F=1.0, G=1.0, H=1.0, W=0.0, E=0.0, Q=1.0, R=1.0, Qf=0.0, p=0.5,
                 x1=0.0, Sigma1=1.0):
    sys_ = LinearSystem(F=[[F]], G=[[G]], H=[[H]], W=[[W]], E=[[E]],
                        x1_mean=[x1], Sigma1=[[Sigma1]])
    return validate_system(sys_, CostModel(Q=[[Q]], R=[[R]], Qf=[[Qf]], p=p))


def random_psd(rng, n, rank=None, scale=1.0):
    A = rng.standard_normal((n, rank or n))
    return scale * A @ A.T / (rank or n)


def random_model(rng, n=None, m=None, k=None, p=None, noise=True, observed=False,
                 stable=None):
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 3))
    k = n if observed else (k or int(rng.integers(1, 3)))
    F = rng.standard_normal((n, n)) / np.sqrt(n)
    if stable is not None:
        F = stable * F / np.linalg.norm(F, 2)
    G = rng.standard_normal((n, m))
    H = np.eye(n) if observed else rng.standard_normal((k, n))
    W = random_psd(rng, n, scale=0.1) if noise else np.zeros((n, n))
    E = np.zeros((k, k)) if observed else (random_psd(rng, k) + 0.1 * np.eye(k))
    sys_ = LinearSystem(F=F, G=G, H=H, W=W, E=E, x1_mean=rng.standard_normal(n),
                        Sigma1=random_psd(rng, n))
    cost = CostModel(Q=random_psd(rng, n), R=random_psd(rng, m) + 0.1 * np.eye(m),
                     Qf=random_psd(rng, n), p=p if p is not None else float(rng.uniform(0.1, 0.9)))
    return validate_system(sys_, cost)


@pytest.fixture
def scalar():
    return scalar_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
