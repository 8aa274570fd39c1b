# app/services/joint_service.py - IRS与功率联合优化服务
import logging
from typing import List, Optional, Tuple

import numpy as np

from app.config import get_settings
from app.exceptions import PowerBudgetExhaustedError, SimulationError
from app.schemas.beams import BeamSet
from app.schemas.irs import DinkelbachTrace, IrsPhaseVector
from app.schemas.joint import IterationRecord, JointSolution, SolverConfig
from app.schemas.power import PowerAllocation
from app.schemas.scenario import ScenarioConfig, UserPairChannels
from app.services.irs_service import irs_service
from app.services.power_service import power_service
from app.services.zeroforcing_service import zeroforcing_service

settings = get_settings()
logger = logging.getLogger(__name__)

BALANCE = "balance"
MIN_POWER = "min_power"


class _Restart(Exception):
    """提高P_max后重新开始"""


class JointService:
    """交替优化IRS相位与发射功率"""

    @staticmethod
    def _noise_terms(pairs: List[UserPairChannels], noise_var: float) -> np.ndarray:
        return np.array([noise_var / p.c2_weak for p in pairs])

    def allocate_power(
            self,
            thetas: List[IrsPhaseVector],
            pairs: List[UserPairChannels],
            beams: BeamSet,
            scfg: ScenarioConfig,
    ) -> PowerAllocation:
        """固定θ时的最小功率分配"""
        p1 = power_service.strong_user_powers(pairs, beams, scfg.gamma_th, scfg.noise_var)
        t = irs_service.interference_matrix(thetas, pairs, beams)
        bp = power_service.build_balance_problem(t, p1, scfg.gamma_th, scfg.noise_var, [p.c2_weak for p in pairs])
        return PowerAllocation(p1=p1, p2=power_service.min_power_solve(bp))

    def _update_theta(
            self,
            m: int,
            pair: UserPairChannels,
            beams: BeamSet,
            powers: PowerAllocation,
            theta: IrsPhaseVector,
            scfg: ScenarioConfig,
            cfg: SolverConfig,
    ) -> Tuple[IrsPhaseVector, Optional[DinkelbachTrace]]:
        """单个用户对的Dinkelbach更新，不降低γ̃_{m,2}时才接受"""
        if powers.p2[m] <= 0:
            return theta, None
        prob = irs_service.build_fractional_problem(pair, beams, powers, m, scfg.noise_var)
        candidate, trace = irs_service.dinkelbach_best_effort(
            prob,
            theta,
            eps=cfg.eps_dinkelbach,
            max_iterations=cfg.dinkelbach_max_iterations,
        )
        before = irs_service.sinr_weak(theta.theta, prob)
        after = irs_service.sinr_weak(candidate.theta, prob)
        if after < before:
            logger.debug(f"Pair {m}: Dinkelbach result rejected ({after:.6e} < {before:.6e})")
            return theta, trace
        return candidate, trace

    def joint_optimize(
            self,
            pairs: List[UserPairChannels],
            beams: BeamSet,
            scfg: ScenarioConfig,
            cfg: Optional[SolverConfig] = None,
            rng: Optional[np.random.Generator] = None,
    ) -> JointSolution:
        """最小化总发射功率的交替迭代"""
        cfg = cfg or SolverConfig()
        rng = rng if rng is not None else np.random.default_rng(scfg.seed)
        num = len(pairs)
        pmax = cfg.initial_pmax(num, scfg.noise_var)
        history: List[IterationRecord] = []
        escalations = 0

        while True:
            try:
                return self._run(pairs, beams, scfg, cfg, rng, pmax, history, escalations)
            except _Restart as e:
                escalations += 1
                if escalations > cfg.max_pmax_escalations:
                    last_c = history[-1].c if history else 0.0
                    raise PowerBudgetExhaustedError(
                        f"power budget escalated {cfg.max_pmax_escalations} times without meeting the threshold",
                        context={"pmax": pmax, "last_c": last_c, "reason": str(e), "gamma_th": scfg.gamma_th},
                    )
                pmax *= cfg.pmax_growth
                logger.info(f"Raising Pmax to {pmax:.6e} ({e}), escalation {escalations}")

    def _run(
            self,
            pairs: List[UserPairChannels],
            beams: BeamSet,
            scfg: ScenarioConfig,
            cfg: SolverConfig,
            rng: np.random.Generator,
            pmax: float,
            history: List[IterationRecord],
            escalations: int,
    ) -> JointSolution:
        num = len(pairs)
        gamma = scfg.gamma_th
        noise_terms = self._noise_terms(pairs, scfg.noise_var)
        c2_weak = [p.c2_weak for p in pairs]

        prev = PowerAllocation.zeros(num)
        prev_c = 0.0
        prev_branch: Optional[str] = None
        thetas: List[IrsPhaseVector] = []
        dinkelbach_traces: List[Optional[DinkelbachTrace]] = [None] * num
        min_power_totals: List[float] = []

        for i in range(1, cfg.max_outer_iterations + 1):
            try:
                if i == 1:
                    thetas = [irs_service.random_phases(p.num_elements, rng) for p in pairs]
                else:
                    updates = [
                        self._update_theta(m, pair, beams, prev, thetas[m], scfg, cfg)
                        for m, pair in enumerate(pairs)
                    ]
                    thetas = [theta for theta, _ in updates]
                    dinkelbach_traces = [
                        trace if trace is not None else old for (_, trace), old in zip(updates, dinkelbach_traces)
                    ]

                p1 = power_service.strong_user_powers(pairs, beams, gamma, scfg.noise_var)
                t = irs_service.interference_matrix(thetas, pairs, beams)
                if prev_c < 1.0:
                    if p1.sum() >= pmax:
                        raise _Restart(f"strong users need {p1.sum():.6e} W")
                    bp = power_service.build_balance_problem(
                        t, p1, gamma, scfg.noise_var, c2_weak, p_tot2=pmax - p1.sum()
                    )
                    c, p2 = power_service.sinr_balance(bp)
                    branch = BALANCE
                else:
                    bp = power_service.build_balance_problem(t, p1, gamma, scfg.noise_var, c2_weak)
                    p2 = power_service.min_power_solve(bp)
                    c, branch = 1.0, MIN_POWER
            except SimulationError as e:
                raise e.with_context(iteration=i, pmax=pmax)

            # 用θ^{(i)}与上一轮功率评估弱用户SINR
            gap = None
            if i > 1:
                ratios = irs_service.weak_user_sinr(t, prev.p1, prev.p2, noise_terms) / gamma
                gap = float(np.max(ratios) - np.min(ratios))

            current = PowerAllocation(p1=p1, p2=p2)
            history.append(IterationRecord(
                iteration=i, branch=branch, c=c, total_power=current.total, ratio_gap=gap, pmax=pmax,
            ))
            logger.debug(f"Iteration {i}: branch={branch} C={c:.6e} total={current.total:.6e} gap={gap}")

            if gap is not None and gap <= cfg.eps_gamma:
                if prev_branch == MIN_POWER:
                    return self._finish(
                        thetas, prev, pairs, beams, scfg, history, True, i, pmax, min_power_totals, dinkelbach_traces
                    )
                if branch == BALANCE and c < 1.0:
                    raise _Restart(f"balanced SINR ratio stalled at C={c:.6e}")

            if branch == MIN_POWER:
                min_power_totals.append(current.total)
            prev, prev_c, prev_branch = current, c, branch

        logger.warning(f"Joint optimization stopped after {cfg.max_outer_iterations} iterations without convergence")
        if prev_c < 1.0:
            raise PowerBudgetExhaustedError(
                "weak-user threshold not reached within the iteration limit",
                context={"pmax": pmax, "last_c": prev_c, "escalations": escalations},
            )
        return self._finish(
            thetas, prev, pairs, beams, scfg, history, False, cfg.max_outer_iterations, pmax, min_power_totals,
            dinkelbach_traces,
        )

    def _finish(
            self,
            thetas: List[IrsPhaseVector],
            powers: PowerAllocation,
            pairs: List[UserPairChannels],
            beams: BeamSet,
            scfg: ScenarioConfig,
            history: List[IterationRecord],
            converged: bool,
            iterations: int,
            pmax: float,
            min_power_totals: List[float],
            dinkelbach_traces: List[Optional[DinkelbachTrace]],
    ) -> JointSolution:
        increases = sum(
            1 for a, b in zip(min_power_totals, min_power_totals[1:]) if b > a * (1.0 + 1e-6)
        )
        if increases:
            logger.warning(f"Total power increased {increases} times across min-power iterations")
        power_service.check_noma_order(powers)

        t = irs_service.interference_matrix(thetas, pairs, beams)
        sinr_weak = irs_service.weak_user_sinr(t, powers.p1, powers.p2, self._noise_terms(pairs, scfg.noise_var))
        sinr_strong = zeroforcing_service.strong_user_sinr(pairs, beams, powers, scfg.noise_var)
        logger.info(
            f"Joint optimization {'converged' if converged else 'stopped'} after {iterations} iterations, "
            f"total power {powers.total:.6e}"
        )
        return JointSolution(
            thetas=thetas,
            powers=powers,
            sinr_strong=sinr_strong,
            sinr_weak=sinr_weak,
            total_power=powers.total,
            trace=list(history),
            converged=converged,
            iterations=iterations,
            pmax=pmax,
            power_increases=increases,
            dinkelbach_traces=[t if t is not None else DinkelbachTrace() for t in dinkelbach_traces],
        )


joint_service = JointService()
