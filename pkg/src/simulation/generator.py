"""Data generation for the Monte Carlo study.

Random streams are derived from (seed, purpose, replicate) with
numpy SeedSequence spawn keys, so any replicate can be regenerated on its own
and results do not depend on how replicates are scheduled across threads.
"""
import numpy as np

from ..sae.dataset import AreaDataset
from ..sae.types import Distribution, ErrorCov, LatentTruth, PsiPattern
from .config import SimConfig

T5_DOF = 5
T5_SCALE = np.sqrt(T5_DOF / (T5_DOF - 2))   # standard deviation of t5
CHI2_DOF = 5

_POPULATION_KEY = 0
_REPLICATE_KEY = 1


def build_psi(j: int, a: float, b: float, rho: float) -> ErrorCov:
    """Psi_j = (0.75 + 0.25 j)^2 diag(sqrt a, sqrt b) [[1, rho], [rho, 1]] diag(sqrt a, sqrt b)."""
    if j not in (1, 2, 3, 4):
        raise ValueError(f"block index must be 1..4, got {j}")
    c = (0.75 + 0.25 * j) ** 2
    return ErrorCov.scalar(
        psi_uu=c * a,
        psi_ue=c * rho * np.sqrt(a * b),
        psi_ee=c * b,
    )


def block_index(config: SimConfig, area: int) -> int:
    """Psi block (1..4) used by an area."""
    if config.psi_pattern == PsiPattern.EQUAL:
        return 1
    return area // (config.n // 4) + 1


def area_covariances(config: SimConfig) -> list[ErrorCov]:
    return [build_psi(block_index(config, i), config.a, config.b, config.rho) for i in range(config.n)]


def symmetric_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix."""
    eigval, eigvec = np.linalg.eigh(np.asarray(matrix, dtype=float))
    return (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T


def _rng(config: SimConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=key))


def _standardized(rng: np.random.Generator, dist: Distribution, size) -> np.ndarray:
    if dist == Distribution.T5:
        return rng.standard_t(T5_DOF, size=size) / T5_SCALE
    return rng.standard_normal(size=size)


def generate_population(config: SimConfig) -> np.ndarray:
    """Fixed covariate values x_i ~ chi-squared(5), shared by every replicate."""
    z = _rng(config, _POPULATION_KEY).standard_normal(size=(config.n, CHI2_DOF))
    return (z ** 2).sum(axis=1)


def generate_replicate(
    config: SimConfig,
    x: np.ndarray,
    rep_index: int,
) -> tuple[AreaDataset, list[LatentTruth]]:
    """One Monte Carlo data set.

    (u_i, e_i)' = Psi_i^(1/2) z_i and b_i = sigma_b z_b with standardized
    normal or t5 draws; Y_i = beta0 + beta1 x_i + b_i + e_i and W_i = x_i + u_i.
    """
    n = config.n
    params = config.true_params
    rng = _rng(config, _REPLICATE_KEY, rep_index)
    z_err = _standardized(rng, config.dist, (n, 2))
    z_b = _standardized(rng, config.dist, n)

    psi = area_covariances(config)
    roots = {j: symmetric_sqrt(build_psi(j, config.a, config.b, config.rho).to_matrix()) for j in range(1, 5)}
    blocks = np.array([block_index(config, i) for i in range(n)])
    errors = np.empty((n, 2))
    for j, root in roots.items():
        mask = blocks == j
        errors[mask] = z_err[mask] @ root
    u, e = errors[:, 0], errors[:, 1]
    b = np.sqrt(params.sigma2_b) * z_b

    x = np.asarray(x, dtype=float)
    theta = params.beta0 + params.beta1[0] * x + b
    ds = AreaDataset(
        area_ids=tuple(f"{i + 1:04d}" for i in range(n)),
        y=theta + e,
        w=(x + u)[:, None],
        psi_uu=np.array([p.psi_uu for p in psi]),
        psi_ue=np.array([p.psi_ue for p in psi]),
        psi_ee=np.array([p.psi_ee for p in psi]),
    )
    truths = [LatentTruth.build(params, [x[i]], b[i]) for i in range(n)]
    return ds, truths
