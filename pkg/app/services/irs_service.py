# app/services/irs_service.py - IRS相位优化服务
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from app.config import get_settings
from app.core import numerics
from app.exceptions import InvalidPowerError, MaxIterationsError, NotPositiveSemidefiniteError
from app.schemas.beams import BeamSet
from app.schemas.irs import (
    AdmmParams,
    DinkelbachTrace,
    FractionalProblem,
    IrsPhaseVector,
    project_constant_modulus,
)
from app.schemas.power import PowerAllocation
from app.schemas.scenario import UserPairChannels

settings = get_settings()
logger = logging.getLogger(__name__)

KAPPA_MARGIN = 1e-9
STALL_PATIENCE = 3
# F未缩小到上一轮的该比例以下即计一次停滞
STALL_RATIO = 0.5


class IrsService:
    """IRS反射系数优化服务"""

    # ---------- 干扰项 ----------

    @staticmethod
    def cascade_covariance(r_g: np.ndarray, g: np.ndarray, w: np.ndarray) -> np.ndarray:
        """R_g ⊙ (G†ww†G)"""
        v = numerics.herm(g) @ w
        # 两个因子均半正定，乘积必半正定
        return numerics.hadamard(r_g, np.outer(v, v.conj()), check_psd=False)

    @staticmethod
    def interference_term(theta: np.ndarray, r_g: np.ndarray, g: np.ndarray, w: np.ndarray) -> float:
        """θ†[R_g ⊙ (G†ww†G)]θ"""
        theta = np.asarray(theta, dtype=complex)
        u = np.conj(numerics.herm(g) @ w) * theta
        return max(float(np.real(np.vdot(u, r_g @ u))), 0.0)

    def interference_matrix(
            self,
            thetas: Sequence[IrsPhaseVector],
            pairs: List[UserPairChannels],
            beams: BeamSet,
    ) -> np.ndarray:
        """T_{m,k}: 波束k对第m对弱用户的干扰功率"""
        num = len(pairs)
        t = np.zeros((num, num))
        for m, pair in enumerate(pairs):
            for k in range(num):
                t[m, k] = self.interference_term(thetas[m].theta, pair.r_g, pair.g, beams.beam(k))
        return t

    @staticmethod
    def weak_user_sinr(
            t: np.ndarray,
            p1: np.ndarray,
            p2: np.ndarray,
            noise_terms: np.ndarray,
    ) -> np.ndarray:
        """弱用户近似期望SINR"""
        p = p1 + p2
        own = np.diag(t)
        cross = t @ p - own * p
        return p2 * own / (p1 * own + cross + noise_terms)

    # ---------- 分式问题 ----------

    def build_fractional_problem(
            self,
            pair: UserPairChannels,
            beams: BeamSet,
            powers: PowerAllocation,
            m: int,
            noise_var: float,
    ) -> FractionalProblem:
        """构造第m对的P_m、Q_m"""
        p2_m = float(powers.p2[m])
        if p2_m <= 0:
            raise InvalidPowerError(f"weak-user power of pair {m} must be positive", context={"pair": m})
        p = p2_m * self.cascade_covariance(pair.r_g, pair.g, beams.beam(m))
        q = np.zeros_like(p)
        totals = powers.per_pair
        for k in range(beams.num_beams):
            if k != m and totals[k] > 0:
                q = q + totals[k] * self.cascade_covariance(pair.r_g, pair.g, beams.beam(k))
        return FractionalProblem(
            p=numerics.symmetrize(p),
            q=numerics.symmetrize(q),
            power_ratio=float(powers.p1[m]) / p2_m,
            noise_term=noise_var / pair.c2_weak,
        )

    @staticmethod
    def sinr_weak(theta: np.ndarray, prob: FractionalProblem) -> float:
        """θ†Pθ / (θ†(rP+Q)θ + noise·‖θ‖²)"""
        theta = np.asarray(theta, dtype=complex)
        n = theta.shape[0]
        if np.max(np.abs(np.abs(theta) - 1.0 / np.sqrt(n))) > 1e-9:
            logger.debug("sinr_weak: theta is not constant-modulus")
        f = prob.numerator(theta)
        g = prob.denominator(theta)
        return f / g

    @staticmethod
    def unconstrained_eig_solution(prob: FractionalProblem) -> Tuple[np.ndarray, float]:
        """单位范数约束下的最优θ (广义厄米特征问题)"""
        n = prob.size
        b = numerics.symmetrize(prob.denominator_matrix())
        vals, vecs = sla.eigh(numerics.symmetrize(prob.p), b, subset_by_index=[n - 1, n - 1])
        theta = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
        return theta, max(float(vals[0]), 0.0)

    def projected_eig_init(self, prob: FractionalProblem) -> IrsPhaseVector:
        """无约束解投影到恒模集合"""
        theta, _ = self.unconstrained_eig_solution(prob)
        return IrsPhaseVector.project(theta)

    @staticmethod
    def random_phases(n: int, rng: np.random.Generator) -> IrsPhaseVector:
        """[θ]_n = e^{j2πu}/√N, u ~ U[0,1]"""
        return IrsPhaseVector.from_phases(2 * np.pi * rng.uniform(0.0, 1.0, size=n))

    # ---------- ADMM ----------

    @staticmethod
    def admm_constant_modulus_min(
            s: np.ndarray,
            theta0: IrsPhaseVector,
            params: Optional[AdmmParams] = None,
    ) -> IrsPhaseVector:
        """min ½θ†Sθ  s.t. |θ_n| = 1/√N

        分裂为 θ = z：θ步解 (S+ρI)θ = ρ(z−u)，z步逐元素投影，u步对偶更新。
        返回目标值最优的可行迭代点。
        """
        params = params or AdmmParams()
        s = numerics.check_hermitian(s, "S")
        n = s.shape[0]
        trace = float(np.real(np.trace(s)))
        lam_min = numerics.min_eigenvalue(s)
        if lam_min < -1e-8 * max(abs(trace), np.finfo(float).tiny):
            raise NotPositiveSemidefiniteError(
                f"ADMM matrix is not positive semidefinite (min eigenvalue {lam_min:.3e})"
            )

        def objective(x: np.ndarray) -> float:
            return 0.5 * float(np.real(np.vdot(x, s @ x)))

        z = project_constant_modulus(theta0.theta)
        best, best_obj = z.copy(), objective(z)
        rho = params.rho if params.rho is not None else trace / n
        if rho <= 0:
            # S = 0: 任意可行点最优
            return IrsPhaseVector(theta=best)

        factor = sla.cho_factor(numerics.symmetrize(s) + rho * np.eye(n))
        u = np.zeros(n, dtype=complex)
        for it in range(params.max_iterations):
            theta = sla.cho_solve(factor, rho * (z - u))
            z_new = project_constant_modulus(theta + u, prior=z)
            u = u + theta - z_new
            primal = np.linalg.norm(theta - z_new)
            # 缩放形式对偶残差，与S的量纲无关
            dual = np.linalg.norm(z_new - z)
            z = z_new

            obj = objective(z)
            if obj < best_obj:
                best, best_obj = z.copy(), obj
            if primal <= params.tolerance and dual <= params.tolerance:
                logger.debug(f"ADMM converged in {it + 1} iterations, objective {best_obj:.6e}")
                break
        else:
            logger.debug(f"ADMM hit {params.max_iterations} iterations, objective {best_obj:.6e}")

        return IrsPhaseVector(theta=project_constant_modulus(best))

    # ---------- Dinkelbach ----------

    def dinkelbach_optimize(
            self,
            prob: FractionalProblem,
            theta_init: IrsPhaseVector,
            eps: Optional[float] = None,
            max_iterations: Optional[int] = None,
            admm_params: Optional[AdmmParams] = None,
    ) -> Tuple[IrsPhaseVector, DinkelbachTrace]:
        """Dinkelbach迭代 + ADMM内层求解

        停止条件与尺度无关: F(η) ≤ eps·f(θ)，即 (f/g − η)/(f/g) ≤ eps。
        ADMM为启发式，F连续STALL_PATIENCE次未缩小到STALL_RATIO倍以下时按停滞处理，返回最优迭代点。
        """
        eps = eps if eps is not None else settings.DINKELBACH_EPSILON
        max_iterations = max_iterations or settings.DINKELBACH_MAX_ITERATIONS
        n = prob.size
        trace = DinkelbachTrace()
        eta = 0.0
        theta = theta_init
        best, best_sinr = theta_init, self.sinr_weak(theta_init.theta, prob)
        stalls = 0

        for _ in range(max_iterations):
            d = (1.0 - eta * prob.power_ratio) * prob.p - eta * prob.q
            kappa_max, _ = numerics.max_eigenpair(numerics.symmetrize(d))
            kappa = kappa_max + KAPPA_MARGIN * abs(kappa_max)
            s = numerics.symmetrize(kappa * np.eye(n) - d)

            theta = self.admm_constant_modulus_min(s, theta, admm_params)
            f = prob.numerator(theta.theta)
            g = prob.denominator(theta.theta)
            f_eta = f - eta * g
            if trace.f_values and f_eta > STALL_RATIO * trace.f_values[-1]:
                stalls += 1
            else:
                stalls = 0
            trace.record(eta, f_eta, 0.5 * float(np.real(np.vdot(theta.theta, s @ theta.theta))))
            logger.debug(f"Dinkelbach iter {trace.iterations}: eta={eta:.6e} F={f_eta:.3e}")

            if f / g >= best_sinr:
                best, best_sinr = theta, f / g
            if f_eta <= eps * f:
                trace.stop_reason = "tolerance"
                return best, trace
            if stalls >= STALL_PATIENCE:
                logger.debug(f"Dinkelbach stalled at eta={eta:.6e}, keeping best iterate")
                trace.stop_reason = "stalled"
                return best, trace
            eta = f / g

        raise MaxIterationsError(
            f"Dinkelbach did not converge in {max_iterations} iterations",
            trace=trace,
            best=best,
            context={"last_eta": eta, "last_F": trace.f_values[-1]},
        )

    def dinkelbach_best_effort(
            self,
            prob: FractionalProblem,
            theta_init: IrsPhaseVector,
            eps: Optional[float] = None,
            max_iterations: Optional[int] = None,
    ) -> Tuple[IrsPhaseVector, DinkelbachTrace]:
        """未收敛时不抛错，返回已得到的最优θ"""
        try:
            return self.dinkelbach_optimize(prob, theta_init, eps=eps, max_iterations=max_iterations)
        except MaxIterationsError as e:
            logger.warning(f"{e.detail}; keeping best iterate (F={e.context.get('last_F', float('nan')):.3e})")
            return e.best, e.trace

    @staticmethod
    def effective_weak_gain(theta: np.ndarray, g_bs_irs: np.ndarray, w: np.ndarray, g_samples: np.ndarray) -> np.ndarray:
        """瞬时级联增益 (θ ⊙ conj(G†w))† g，二阶矩等于T_{m,k}"""
        u = np.asarray(theta, dtype=complex) * np.conj(numerics.herm(g_bs_irs) @ w)
        return np.atleast_2d(g_samples) @ np.conj(u)


irs_service = IrsService()
