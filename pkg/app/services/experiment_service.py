# app/services/experiment_service.py - 实验与蒙特卡洛仿真服务
import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.config import get_settings
from app.core.random_utils import make_rng, trial_seed
from app.exceptions import ContractViolationError, SimulationError
from app.schemas.experiment import ExperimentKind, ExperimentSpec, ResultRow, TrialRecord
from app.schemas.joint import JointSolution
from app.schemas.power import PowerAllocation
from app.schemas.scenario import ScenarioConfig
from app.services.channel_service import channel_service
from app.services.irs_service import irs_service
from app.services.joint_service import joint_service
from app.services.zeroforcing_service import zeroforcing_service

settings = get_settings()
logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 10_000

TrialFn = Callable[[ScenarioConfig, ExperimentSpec], Dict[str, float]]


def to_db(x: float) -> float:
    return float(10.0 * np.log10(x)) if x > 0 else float("-inf")


def fixed_powers(cfg: ScenarioConfig, snr_db: float, weak_fraction: float) -> PowerAllocation:
    """每波束固定SNR: p_m·c²/σ² = snr，弱用户占weak_fraction"""
    p_beam = 10.0 ** (snr_db / 10.0) * cfg.noise_var / settings.REFERENCE_PATH_GAIN
    p = np.full(cfg.num_pairs, p_beam)
    return PowerAllocation(p1=(1.0 - weak_fraction) * p, p2=weak_fraction * p)


def fixed_power_trial(cfg: ScenarioConfig, spec: ExperimentSpec) -> Dict[str, float]:
    """固定功率下恒模(Dinkelbach)与无约束弱用户SINR"""
    pairs = channel_service.build_scenario(cfg)
    beams = zeroforcing_service.zeroforcing_beams(pairs)
    powers = fixed_powers(cfg, spec.per_beam_snr_db, spec.weak_power_fraction)

    constrained, unconstrained = [], []
    for m, pair in enumerate(pairs):
        prob = irs_service.build_fractional_problem(pair, beams, powers, m, cfg.noise_var)
        _, upper = irs_service.unconstrained_eig_solution(prob)
        theta, _ = irs_service.dinkelbach_best_effort(
            prob,
            irs_service.projected_eig_init(prob),
            eps=spec.solver.eps_dinkelbach,
            max_iterations=spec.solver.dinkelbach_max_iterations,
        )
        constrained.append(irs_service.sinr_weak(theta.theta, prob))
        unconstrained.append(upper)

    return {
        "sinr_constrained_linear": float(np.mean(constrained)),
        "sinr_unconstrained_linear": float(np.mean(unconstrained)),
    }


def joint_trial(cfg: ScenarioConfig, spec: ExperimentSpec) -> Dict[str, float]:
    """联合优化得到的总SNR与最小速率"""
    pairs = channel_service.build_scenario(cfg)
    beams = zeroforcing_service.zeroforcing_beams(pairs)
    sol = joint_service.joint_optimize(pairs, beams, cfg, spec.solver, make_rng(cfg.seed))
    return {
        "total_power_w": sol.total_power,
        "total_snr_linear": sol.total_power * settings.REFERENCE_PATH_GAIN / cfg.noise_var,
        "min_rate_bps_hz": sol.min_rate,
        "iterations": float(sol.iterations),
        "converged": float(sol.converged),
    }


def approximation_trial(cfg: ScenarioConfig, spec: ExperimentSpec) -> Dict[str, float]:
    """瞬时信道蒙特卡洛与协方差近似SINR对比"""
    pairs = channel_service.build_scenario(cfg)
    beams = zeroforcing_service.zeroforcing_beams(pairs)
    powers = fixed_powers(cfg, spec.per_beam_snr_db, spec.weak_power_fraction)
    rng = make_rng(cfg.seed)
    thetas = [irs_service.random_phases(p.num_elements, rng) for p in pairs]

    approx_1 = zeroforcing_service.strong_user_sinr(pairs, beams, powers, cfg.noise_var)
    t = irs_service.interference_matrix(thetas, pairs, beams)
    noise_terms = np.array([cfg.noise_var / p.c2_weak for p in pairs])
    approx_2 = irs_service.weak_user_sinr(t, powers.p1, powers.p2, noise_terms)

    p = powers.per_pair
    emp_1 = np.zeros(len(pairs))
    emp_2 = np.zeros(len(pairs))
    for m, pair in enumerate(pairs):
        total_1 = total_2 = 0.0
        for start in range(0, spec.samples, SAMPLE_CHUNK):
            count = min(SAMPLE_CHUNK, spec.samples - start)
            h = channel_service.sample_covariance_batch(pair.r_h, count, rng)
            g = channel_service.sample_covariance_batch(pair.r_g, count, rng)

            gain_1 = np.abs(h.conj() @ beams.beams) ** 2
            interference_1 = gain_1 @ p - gain_1[:, m] * p[m]
            sinr_1 = pair.c2_strong * powers.p1[m] * gain_1[:, m] / (
                    pair.c2_strong * interference_1 + cfg.noise_var)

            gain_2 = np.column_stack([
                np.abs(irs_service.effective_weak_gain(thetas[m].theta, pair.g, beams.beam(k), g)) ** 2
                for k in range(len(pairs))
            ])
            interference_2 = gain_2 @ p - gain_2[:, m] * powers.p2[m]
            sinr_2 = pair.c2_weak * powers.p2[m] * gain_2[:, m] / (
                    pair.c2_weak * interference_2 + cfg.noise_var)

            total_1 += float(sinr_1.sum())
            total_2 += float(sinr_2.sum())
        emp_1[m] = total_1 / spec.samples
        emp_2[m] = total_2 / spec.samples

    err_1 = np.abs(emp_1 - approx_1) / approx_1
    gap_2 = (emp_2 - approx_2) / approx_2
    return {
        "user1_empirical_linear": float(np.mean(emp_1)),
        "user1_approx_linear": float(np.mean(approx_1)),
        "user1_rel_error_max": float(np.max(err_1)),
        "user2_empirical_linear": float(np.mean(emp_2)),
        "user2_approx_linear": float(np.mean(approx_2)),
        "user2_rel_gap_mean": float(np.mean(gap_2)),
    }


class ExperimentService:
    """扫描实验：并行试验、聚合均值与标准误"""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.WORKERS

    @staticmethod
    def _run_one(fn: TrialFn, cfg: ScenarioConfig, spec: ExperimentSpec, trial: int, sweep_value: float) -> TrialRecord:
        try:
            values = fn(cfg, spec)
            return TrialRecord(num_pairs=cfg.num_pairs, sweep_value=sweep_value, trial=trial, seed=cfg.seed, values=values)
        except SimulationError as e:
            logger.warning(f"Trial {trial} at {sweep_value} failed: {type(e).__name__}: {e}")
            return TrialRecord(
                num_pairs=cfg.num_pairs, sweep_value=sweep_value, trial=trial, seed=cfg.seed,
                ok=False, category=e.category,
            )

    async def run_trials(
            self,
            fn: TrialFn,
            cfg: ScenarioConfig,
            spec: ExperimentSpec,
            sweep_value: float,
    ) -> List[TrialRecord]:
        """每次试验的种子由 (seed, trial) 派生，与调度无关"""
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            tasks = [
                loop.run_in_executor(
                    pool, self._run_one, fn, cfg.with_updates(seed=trial_seed(cfg.seed, trial)),
                    spec, trial, sweep_value,
                )
                for trial in range(spec.trials)
            ]
            return list(await asyncio.gather(*tasks))

    @staticmethod
    def aggregate(records: List[TrialRecord], num_pairs: int, sweep_value: float, db_keys: Tuple[str, ...] = ()) -> ResultRow:
        """均值、标准误与dB列"""
        ok = [r.values for r in records if r.ok]
        values: Dict[str, float] = {}
        if ok:
            df = pd.DataFrame(ok)
            means = df.mean()
            errors = df.sem(ddof=1).fillna(0.0) if len(df) > 1 else pd.Series(0.0, index=df.columns)
            for key in df.columns:
                values[f"{key}_mean"] = float(means[key])
                values[f"{key}_stderr"] = float(errors[key])
                if key in db_keys:
                    values[f"{key.removesuffix('_linear')}_db"] = to_db(float(means[key]))
        return ResultRow(
            num_pairs=num_pairs,
            sweep_value=sweep_value,
            trials=len(records),
            failures=len(records) - len(ok),
            values=values,
            records=records,
        )

    async def _sweep(
            self,
            spec: ExperimentSpec,
            fn: TrialFn,
            configure: Callable[[ScenarioConfig, Any], ScenarioConfig],
            db_keys: Tuple[str, ...],
    ) -> List[ResultRow]:
        rows = []
        for num_pairs in spec.loads:
            for value in spec.sweep_values:
                cfg = configure(spec.base.with_updates(num_pairs=num_pairs), value)
                records = await self.run_trials(fn, cfg, spec, float(value))
                row = self.aggregate(records, num_pairs, float(value), db_keys)
                rows.append(row)
                logger.info(f"{spec.kind.value}: M={num_pairs} value={value} done ({row.failures} failures)")
        return rows

    async def sweep_irs_elements(self, spec: ExperimentSpec) -> List[ResultRow]:
        """弱用户SINR随IRS单元数N的变化"""
        def configure(base: ScenarioConfig, n: Any) -> ScenarioConfig:
            n = int(n)
            rank = min(base.rank_g, base.num_tx, n) if base.rank_g is not None else None
            return base.with_updates(num_elements=n, rank_g=rank)

        rows = await self._sweep(spec, fixed_power_trial, configure, ("sinr_constrained_linear", "sinr_unconstrained_linear"))
        return [self._with_loss(r) for r in rows]

    async def sweep_rank(self, spec: ExperimentSpec) -> List[ResultRow]:
        """弱用户SINR随rank(G)的变化"""
        def configure(base: ScenarioConfig, rank: Any) -> ScenarioConfig:
            return base.with_updates(rank_g=int(rank))

        rows = await self._sweep(spec, fixed_power_trial, configure, ("sinr_constrained_linear", "sinr_unconstrained_linear"))
        return [self._with_loss(r) for r in rows]

    async def sweep_total_snr(self, spec: ExperimentSpec) -> List[ResultRow]:
        """目标速率r(γ_th = 2^r − 1)所需的总SNR"""
        def configure(base: ScenarioConfig, rate: Any) -> ScenarioConfig:
            return base.with_updates(gamma_th=2.0 ** float(rate) - 1.0)

        return await self._sweep(spec, joint_trial, configure, ("total_snr_linear",))

    async def validate_approximation(self, spec: ExperimentSpec) -> List[ResultRow]:
        """每个试验场景一行：强用户误差与弱用户近似偏差"""
        records = await self.run_trials(approximation_trial, spec.base, spec, 0.0)
        rows = []
        for record in records:
            row = self.aggregate([record], spec.base.num_pairs, float(record.trial))
            rows.append(row)
            if record.ok:
                logger.info(
                    f"Trial {record.trial}: user1 error {record.values['user1_rel_error_max']:.3%}, "
                    f"user2 gap {record.values['user2_rel_gap_mean']:+.3%}"
                )
        return rows

    async def single_run(self, spec: ExperimentSpec) -> JointSolution:
        """单场景联合优化"""
        cfg = spec.base
        loop = asyncio.get_running_loop()

        def work() -> JointSolution:
            pairs = channel_service.build_scenario(cfg)
            beams = zeroforcing_service.zeroforcing_beams(pairs)
            return joint_service.joint_optimize(pairs, beams, cfg, spec.solver, make_rng(cfg.seed))

        with ThreadPoolExecutor(max_workers=1) as pool:
            return await loop.run_in_executor(pool, work)

    async def run(self, spec: ExperimentSpec) -> List[ResultRow]:
        handlers = {
            ExperimentKind.SWEEP_N: self.sweep_irs_elements,
            ExperimentKind.SWEEP_RANK: self.sweep_rank,
            ExperimentKind.SWEEP_SNR: self.sweep_total_snr,
            ExperimentKind.VALIDATE: self.validate_approximation,
        }
        if spec.kind not in handlers:
            raise ContractViolationError(f"{spec.kind.value} does not produce result rows")
        return await handlers[spec.kind](spec)

    @staticmethod
    def _with_loss(row: ResultRow) -> ResultRow:
        """恒模约束损失 (dB)"""
        values = dict(row.values)
        if "sinr_constrained_db" in values:
            values["constant_modulus_loss_db"] = values["sinr_unconstrained_db"] - values["sinr_constrained_db"]
        return row.model_copy(update={"values": values})


experiment_service = ExperimentService()
