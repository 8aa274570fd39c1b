# conftest.py - 测试公共夹具
import numpy as np
import pytest

from app.schemas.irs import FractionalProblem
from app.schemas.scenario import ScenarioConfig
from app.services.channel_service import channel_service
from app.services.zeroforcing_service import zeroforcing_service


def random_psd(rng: np.random.Generator, n: int, rank: int, scale: float = 1.0) -> np.ndarray:
    """随机半正定复矩阵，秩为rank"""
    a = (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2.0)
    m = scale * (a @ a.conj().T)
    return 0.5 * (m + m.conj().T)


def random_fractional_problem(
        rng: np.random.Generator,
        n: int,
        rank_p: int = 1,
        rank_q: int = 2,
        ratio: float = 0.1,
        noise: float = 0.5,
) -> FractionalProblem:
    q = random_psd(rng, n, rank_q, 0.5) if rank_q else np.zeros((n, n), dtype=complex)
    return FractionalProblem(p=random_psd(rng, n, rank_p), q=q, power_ratio=ratio, noise_term=noise)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return ScenarioConfig(num_tx=8, num_elements=6, num_pairs=3, paths_strong=1, noise_var=1.0, seed=7)


@pytest.fixture
def small_scenario(small_config):
    pairs = channel_service.build_scenario(small_config)
    beams = zeroforcing_service.zeroforcing_beams(pairs)
    return small_config, pairs, beams
