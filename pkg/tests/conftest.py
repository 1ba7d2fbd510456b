"""Shared fixtures: synthetic area datasets and the bundled 20-area file."""
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from src.sae.dataset import AreaDataset

DATA_DIR = Path(__file__).parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs, enabled with SAE_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("SAE_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set SAE_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_dataset(
    n: int = 40,
    p: int = 1,
    seed: int = 0,
    beta0: float = 1.0,
    beta1: float | list[float] = 2.0,
    sigma2_b: float = 0.36,
    psi_uu: float = 0.1,
    psi_ee: float = 0.5,
    rho: float = 0.3,
) -> AreaDataset:
    """Random dataset from the correlated-error model with area-varying Psi_i.

    Psi_i is a scalar multiple (0.5..2) of a fixed matrix whose u-block is
    psi_uu * I and whose correlation between each u_j and e is rho.
    """
    rng = np.random.default_rng(seed)
    beta1 = np.broadcast_to(np.asarray(beta1, dtype=float), (p,))
    base = np.zeros((p + 1, p + 1))
    base[:p, :p] = psi_uu * np.eye(p)
    base[:p, p] = base[p, :p] = rho * np.sqrt(psi_uu * psi_ee) / np.sqrt(p)
    base[p, p] = psi_ee
    scales = rng.uniform(0.5, 2.0, size=n)
    full = scales[:, None, None] * base

    x = rng.chisquare(5, size=(n, p))
    errors = np.stack([rng.multivariate_normal(np.zeros(p + 1), cov) for cov in full])
    b = rng.normal(0.0, np.sqrt(sigma2_b), size=n)
    y = beta0 + x @ beta1 + b + errors[:, p]
    return AreaDataset(
        area_ids=tuple(f"{i + 1:03d}" for i in range(n)),
        y=y,
        w=x + errors[:, :p],
        psi_uu=full[:, :p, :p],
        psi_ue=full[:, :p, p],
        psi_ee=full[:, p, p],
    )


@pytest.fixture
def dataset():
    return make_dataset()


@pytest.fixture
def uncorrelated_dataset():
    """Psi_ue = 0 everywhere."""
    return make_dataset(seed=7, rho=0.0)


@pytest.fixture
def fixture_csv() -> Path:
    return DATA_DIR / "areas_20.csv"
