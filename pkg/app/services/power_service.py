# app/services/power_service.py - 功率分配服务
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import get_settings
from app.core import numerics
from app.exceptions import (
    InfeasibleThresholdError,
    PerronEigenpairError,
    UnserviceableUserError,
)
from app.schemas.beams import BeamSet
from app.schemas.power import MIN_GAIN, BalanceProblem, PowerAllocation
from app.schemas.scenario import UserPairChannels

settings = get_settings()
logger = logging.getLogger(__name__)

NEGATIVE_CLAMP = 1e-12
FEASIBILITY_MARGIN = 1e-9


class PowerService:
    """强/弱用户发射功率计算"""

    @staticmethod
    def strong_user_power(gamma_th: float, noise_var: float, c2_strong: float, signal_gain: float) -> float:
        """γ̃_{m,1} = γ_th 时的最小功率"""
        if signal_gain <= MIN_GAIN:
            raise UnserviceableUserError(
                f"strong user has no beam gain ({signal_gain:.3e})",
                context={"signal_gain": signal_gain},
            )
        return gamma_th * noise_var / (c2_strong * signal_gain)

    def strong_user_powers(
            self,
            pairs: List[UserPairChannels],
            beams: BeamSet,
            gamma_th: float,
            noise_var: float,
    ) -> np.ndarray:
        out = np.zeros(len(pairs))
        for m, pair in enumerate(pairs):
            try:
                out[m] = self.strong_user_power(gamma_th, noise_var, pair.c2_strong, float(beams.signal_gain[m]))
            except UnserviceableUserError as e:
                raise e.with_context(pair=m)
        return out

    @staticmethod
    def build_balance_problem(
            t: np.ndarray,
            p1: np.ndarray,
            gamma_th: float,
            noise_var: float,
            c2_weak: Sequence[float],
            p_tot2: Optional[float] = None,
    ) -> BalanceProblem:
        return BalanceProblem.from_interference(t, p1, gamma_th, noise_var, c2_weak, p_tot2)

    @staticmethod
    def _dominant_eigenpair(upsilon: np.ndarray) -> Tuple[float, np.ndarray]:
        """Υ的Perron特征对；幂迭代失败时退回稠密特征分解"""
        try:
            return numerics.perron_eigenpair(upsilon, max_iter=20_000)
        except PerronEigenpairError as e:
            logger.debug(f"Perron iteration fallback: {e.detail}")

        vals, vecs = np.linalg.eig(upsilon)
        k = int(np.argmax(vals.real))
        lam, x = vals[k], vecs[:, k]
        scale = max(abs(lam.real), 1.0)
        if abs(lam.imag) > 1e-9 * scale:
            raise PerronEigenpairError(f"dominant eigenvalue is complex ({lam})")
        x = x * np.exp(-1j * np.angle(x[np.argmax(np.abs(x))]))
        if np.max(np.abs(x.imag)) > 1e-9 * np.max(np.abs(x)):
            raise PerronEigenpairError("dominant eigenvector is not real")
        x = x.real
        return float(lam.real), x / x.sum()

    def sinr_balance(self, bp: BalanceProblem) -> Tuple[float, np.ndarray]:
        """最大化弱用户最小 γ̃/γ_th，返回 (C, p2)，Σp2 = P_tot,2"""
        lam, x = self._dominant_eigenpair(bp.upsilon())
        if lam <= 0 or x[-1] <= 0:
            raise PerronEigenpairError(
                f"degenerate dominant eigenpair (lambda={lam:.3e}, last={x[-1]:.3e})"
            )
        p2 = x[:-1] / x[-1]
        if np.min(p2) < -NEGATIVE_CLAMP * max(1.0, float(np.max(np.abs(p2)))):
            raise PerronEigenpairError(
                "balanced power vector has negative entries",
                context={"min_entry": float(np.min(p2))},
            )
        p2 = np.clip(p2, 0.0, None)
        c = 1.0 / lam
        logger.debug(f"SINR balance: C={c:.6e} P_tot2={bp.p_tot2:.6e} sum(p2)={p2.sum():.6e}")
        return c, p2

    @staticmethod
    def min_power_solve(bp: BalanceProblem) -> np.ndarray:
        """p2 = (I − ΛT°)⁻¹Λζ，各弱用户恰好达到γ_th"""
        coupling = bp.lam[:, None] * bp.t_off
        rho = numerics.spectral_radius(coupling)
        if rho >= 1.0 - FEASIBILITY_MARGIN:
            raise InfeasibleThresholdError(
                f"threshold {bp.gamma_th} unreachable: spectral radius of coupling is {rho:.6f}",
                context={"spectral_radius": rho, "gamma_th": bp.gamma_th},
            )
        p2 = numerics.linear_solve(np.eye(bp.num_pairs) - coupling, bp.lam * bp.zeta)
        if np.any(p2 <= 0):
            raise InfeasibleThresholdError(
                "minimum-power solution has non-positive entries",
                context={"min_entry": float(np.min(p2))},
            )
        return p2

    @staticmethod
    def check_noma_order(powers: PowerAllocation) -> List[int]:
        """检查 p2 ≥ p1，违反时只告警"""
        violations = powers.noma_order_violations()
        if violations:
            logger.warning(f"NOMA power ordering p2 >= p1 violated for pairs {violations}")
        return violations


power_service = PowerService()
