# app/services/channel_service.py - 信道生成服务
import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.config import get_settings
from app.core import numerics
from app.core.random_utils import spawn_rngs
from app.exceptions import ContractViolationError, InfeasibleScenarioError
from app.schemas.scenario import ScenarioConfig, UserPairChannels

settings = get_settings()
logger = logging.getLogger(__name__)

AOD_MIN_SEPARATION = 1e-6


class ChannelService:
    """统计信道生成服务"""

    @staticmethod
    def steering_vector(theta: float, nt: int) -> np.ndarray:
        """半波长ULA发射导向矢量，单位范数"""
        if nt < 1:
            raise ContractViolationError("array size must be at least 1")
        k = np.arange(nt)
        return np.exp(-1j * 2 * np.pi * k * np.cos(theta)) / np.sqrt(nt)

    def make_covariance(self, aods: Sequence[float], dim: int) -> np.ndarray:
        """R = (dim/L)·A A†，A的列为导向矢量"""
        aods = list(aods)
        if not aods:
            raise ContractViolationError("at least one AoD is required")
        if len(aods) > dim:
            raise ContractViolationError(f"{len(aods)} paths exceed array dimension {dim}")
        a = np.column_stack([self.steering_vector(t, dim) for t in aods])
        r = numerics.symmetrize((dim / len(aods)) * (a @ numerics.herm(a)))
        rank = numerics.numeric_rank(r, settings.RANK_RTOL)
        if rank < len(aods):
            logger.warning(f"Covariance is rank deficient: rank {rank} < {len(aods)} paths (duplicate steering)")
        return r

    @staticmethod
    def _draw_aods(count: int, rng: np.random.Generator) -> List[float]:
        """在[0,π]上抽取互不重合的AoD (导向矢量相位也不重合)"""
        while True:
            aods = rng.uniform(0.0, np.pi, size=count)
            if count == 1:
                return [float(aods[0])]
            diff_angle = np.abs(aods[:, None] - aods[None, :])
            c = np.cos(aods)
            diff_phase = np.abs(c[:, None] - c[None, :])
            diff_phase = np.abs(diff_phase - np.round(diff_phase))
            iu = np.triu_indices(count, k=1)
            if np.min(diff_angle[iu]) > AOD_MIN_SEPARATION and np.min(diff_phase[iu]) > AOD_MIN_SEPARATION:
                return [float(t) for t in aods]

    @staticmethod
    def make_bs_irs_channel(
            nt: int,
            n: int,
            rank_g: int,
            rng: np.random.Generator,
    ) -> Tuple[np.ndarray, List[Tuple[float, float]]]:
        """秩可控的BS-IRS信道G及每个元素的 (ξ, ν)"""
        if not 1 <= rank_g <= min(nt, n):
            raise ContractViolationError(f"rank_g must lie in [1, {min(nt, n)}], got {rank_g}")
        xi = rng.uniform(0.0, np.pi, size=rank_g)
        nu = rng.uniform(0.0, 2 * np.pi, size=rank_g)

        # 相邻元素连续分块共享同一AoD对，块数恰为rank_g
        block = np.empty(n, dtype=int)
        for b, idx in enumerate(np.array_split(np.arange(n), rank_g)):
            block[idx] = b
        s = np.sin(xi[block]) * np.sin(nu[block])

        nt_idx = np.arange(nt)[:, None]
        n_idx = np.arange(n)[None, :]
        g = np.exp(1j * np.pi * nt_idx * s[None, :]) * np.exp(-1j * np.pi * n_idx * s[None, :])
        aod_pairs = [(float(xi[b]), float(nu[b])) for b in block]
        return g, aod_pairs

    def build_pair(self, cfg: ScenarioConfig, m: int, rng: np.random.Generator) -> UserPairChannels:
        aod_strong = self._draw_aods(cfg.strong_paths[m], rng)
        aod_weak = self._draw_aods(cfg.weak_paths[m], rng)
        g, aod_pairs = self.make_bs_irs_channel(cfg.num_tx, cfg.num_elements, cfg.effective_rank_g, rng)
        return UserPairChannels(
            r_h=self.make_covariance(aod_strong, cfg.num_tx),
            r_g=self.make_covariance(aod_weak, cfg.num_elements),
            g=g,
            c2_strong=cfg.c2_strong_list[m],
            c2_weak=cfg.c2_weak_list[m],
            aod_strong=aod_strong,
            aod_weak=aod_weak,
            aod_bs_irs=aod_pairs,
        )

    def build_scenario(self, cfg: ScenarioConfig) -> List[UserPairChannels]:
        """生成M个用户对的统计信道"""
        total_paths = sum(cfg.strong_paths)
        if total_paths >= cfg.num_tx:
            raise InfeasibleScenarioError(
                f"zeroforcing impossible: {total_paths} strong-user paths with {cfg.num_tx} antennas",
                context={"total_paths": total_paths, "num_tx": cfg.num_tx},
            )
        rngs = spawn_rngs(cfg.seed, cfg.num_pairs)
        pairs = [self.build_pair(cfg, m, rngs[m]) for m in range(cfg.num_pairs)]
        logger.debug(
            f"Scenario built: M={cfg.num_pairs} Nt={cfg.num_tx} N={cfg.num_elements} "
            f"rankG={cfg.effective_rank_g} seed={cfg.seed}"
        )
        return pairs

    @staticmethod
    def sample_covariance_batch(r: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
        """CN(0, R) 样本 (count × dim)，特征分解着色"""
        vals, vecs = numerics.hermitian_eig(r)
        scale = np.sqrt(np.clip(vals, 0.0, None))
        coloring = vecs * scale[None, :]
        dim = r.shape[0]
        z = (rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))) / np.sqrt(2.0)
        return z @ coloring.T

    def sample_instantaneous(
            self,
            pair: UserPairChannels,
            rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """抽取瞬时信道 (h, g)"""
        h = self.sample_covariance_batch(pair.r_h, 1, rng)[0]
        g = self.sample_covariance_batch(pair.r_g, 1, rng)[0]
        return h, g


channel_service = ChannelService()
