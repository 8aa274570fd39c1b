# app/services/zeroforcing_service.py - 迫零波束服务
import logging
from typing import List, Optional

import numpy as np

from app.config import get_settings
from app.core import numerics
from app.exceptions import EmptyNullSpaceError, RankMismatchError
from app.schemas.beams import BeamSet
from app.schemas.power import PowerAllocation
from app.schemas.scenario import UserPairChannels

settings = get_settings()
logger = logging.getLogger(__name__)


class ZeroforcingService:
    """基于协方差特征空间的迫零波束"""

    @staticmethod
    def eigenspace_basis(r: np.ndarray, l: int) -> np.ndarray:
        """非零特征值对应的特征向量 (N_t × L)"""
        vals, vecs = numerics.hermitian_eig(r)
        if vals[0] <= 0:
            rank = 0
        else:
            rank = int(np.sum(vals > settings.RANK_RTOL * vals[0]))
        if rank != l:
            raise RankMismatchError(
                f"covariance rank {rank} does not match path count {l}",
                context={"rank": rank, "paths": l},
            )
        return vecs[:, :l]

    @staticmethod
    def _fix_phase(w: np.ndarray) -> np.ndarray:
        """最大模元素取实正"""
        k = int(np.argmax(np.abs(w)))
        return w * np.exp(-1j * np.angle(w[k]))

    def zeroforcing_beams(
            self,
            pairs: List[UserPairChannels],
            eigenspaces: Optional[List[np.ndarray]] = None,
    ) -> BeamSet:
        """w_m 位于其他用户对特征空间的零空间内，并最大化 w†R_{h_m}w

        eigenspaces可传入任意正交基U_k；结果只依赖其张成的子空间。
        """
        if eigenspaces is None:
            eigenspaces = [self.eigenspace_basis(p.r_h, p.strong_paths) for p in pairs]
        nt = pairs[0].num_tx
        beams = np.zeros((nt, len(pairs)), dtype=complex)
        gains = np.zeros(len(pairs))

        for m, pair in enumerate(pairs):
            others = [u for k, u in enumerate(eigenspaces) if k != m]
            stacked = np.hstack(others) if others else np.zeros((nt, 0), dtype=complex)
            basis = numerics.null_space_basis(stacked, settings.RANK_RTOL)
            if basis.shape[1] == 0:
                raise EmptyNullSpaceError(
                    f"no zeroforcing direction for pair {m}",
                    context={"pair": m, "constraints": stacked.shape[1], "num_tx": nt},
                )
            reduced = numerics.symmetrize(numerics.herm(basis) @ pair.r_h @ basis)
            _, v = numerics.max_eigenpair(reduced)
            w = basis @ v
            w = self._fix_phase(w / np.linalg.norm(w))
            beams[:, m] = w
            gains[m] = max(float(np.real(np.vdot(w, pair.r_h @ w))), 0.0)

        logger.debug(f"Zeroforcing beams built for {len(pairs)} pairs, min gain {gains.min():.3e}")
        return BeamSet(beams=beams, signal_gain=gains, eigenspaces=eigenspaces)

    @staticmethod
    def zeroforcing_residual(beams: BeamSet, eigenspaces: Optional[List[np.ndarray]] = None) -> float:
        """max_{m≠k} |w_m†U_k|"""
        eigenspaces = eigenspaces if eigenspaces is not None else beams.eigenspaces
        worst = 0.0
        for m in range(beams.num_beams):
            for k, u in enumerate(eigenspaces):
                if k != m:
                    worst = max(worst, float(np.max(np.abs(numerics.herm(u) @ beams.beam(m)))))
        return worst

    @staticmethod
    def strong_user_interference(
            pairs: List[UserPairChannels],
            beams: BeamSet,
            powers: PowerAllocation,
    ) -> np.ndarray:
        """Σ_{k≠m} p_k w_k†R_{h_m}w_k"""
        p = powers.per_pair
        out = np.zeros(len(pairs))
        for m, pair in enumerate(pairs):
            for k in range(len(pairs)):
                if k != m:
                    w = beams.beam(k)
                    out[m] += p[k] * float(np.real(np.vdot(w, pair.r_h @ w)))
        return out

    def strong_user_sinr(
            self,
            pairs: List[UserPairChannels],
            beams: BeamSet,
            powers: PowerAllocation,
            noise_var: float,
    ) -> np.ndarray:
        """强用户近似期望SINR (含残余干扰)"""
        interference = self.strong_user_interference(pairs, beams, powers)
        noise = np.array([noise_var / p.c2_strong for p in pairs])
        return powers.p1 * beams.signal_gain / (interference + noise)


zeroforcing_service = ZeroforcingService()
