# test_harness.py - 实验扫描与蒙特卡洛验证测试
import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.exceptions import ConfigError, InfeasibleScenarioError
from app.schemas.experiment import ExperimentKind, ExperimentSpec, TrialRecord
from app.schemas.irs import DinkelbachTrace
from app.schemas.joint import SolverConfig
from app.schemas.power import PowerAllocation
from app.schemas.scenario import ScenarioConfig
from app.services.experiment_service import ExperimentService, experiment_service, fixed_power_trial
from app.services.zeroforcing_service import zeroforcing_service
from app.storage import result_store, scenario_store

TINY = ScenarioConfig(num_tx=8, num_elements=4, num_pairs=2, seed=1)


def tiny_spec(kind: ExperimentKind, values, **changes) -> ExperimentSpec:
    return ExperimentSpec(kind=kind, base=TINY, sweep_values=values, trials=3, **changes)


class TestSpecValidation:
    def test_sweep_requires_values(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(kind=ExperimentKind.SWEEP_N, base=TINY)

    def test_rank_values_in_range(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(kind=ExperimentKind.SWEEP_RANK, base=TINY, sweep_values=[5])

    def test_rates_positive(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(kind=ExperimentKind.SWEEP_SNR, base=TINY, sweep_values=[0.0])

    def test_trials_positive(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(kind=ExperimentKind.SWEEP_N, base=TINY, sweep_values=[4], trials=0)

    def test_validation_needs_enough_samples(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(kind=ExperimentKind.VALIDATE, base=TINY, samples=9_999)
        spec = ExperimentSpec(kind=ExperimentKind.VALIDATE, base=TINY, samples=10_000)
        assert spec.samples == 10_000
        # 其他实验不使用样本数
        assert ExperimentSpec(kind=ExperimentKind.SINGLE_RUN, base=TINY, samples=1).samples == 1


class TestTrials:
    def test_constrained_below_unconstrained(self):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [4])
        for seed in range(5):
            values = fixed_power_trial(TINY.with_updates(seed=seed), spec)
            assert values["sinr_constrained_linear"] <= values["sinr_unconstrained_linear"] * (1 + 1e-9)

    def test_fixed_power_trial_at_full_dimensions(self):
        cfg = ScenarioConfig(num_tx=64, num_elements=32, num_pairs=10, seed=0)
        spec = ExperimentSpec(kind=ExperimentKind.SWEEP_N, base=cfg, sweep_values=[32], trials=1)
        values = fixed_power_trial(cfg, spec)
        assert np.isfinite(values["sinr_constrained_linear"])
        assert 0 < values["sinr_constrained_linear"] <= values["sinr_unconstrained_linear"] * (1 + 1e-9)

    @pytest.mark.slow
    def test_fixed_power_trial_large_array(self):
        cfg = ScenarioConfig(num_tx=64, num_elements=128, num_pairs=20, seed=0)
        spec = ExperimentSpec(kind=ExperimentKind.SWEEP_N, base=cfg, sweep_values=[128], trials=1)
        values = fixed_power_trial(cfg, spec)
        assert 0 < values["sinr_constrained_linear"] <= values["sinr_unconstrained_linear"] * (1 + 1e-9)

    def test_dinkelbach_limit_does_not_fail_trial(self):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [4], solver=SolverConfig(dinkelbach_max_iterations=1))
        record = ExperimentService._run_one(fixed_power_trial, TINY, spec, 0, 4.0)
        assert record.ok
        assert record.values["sinr_constrained_linear"] <= record.values["sinr_unconstrained_linear"] * (1 + 1e-9)

    def test_failed_trial_is_recorded(self):
        def broken(cfg, spec):
            raise InfeasibleScenarioError("no room")

        record = ExperimentService._run_one(broken, TINY, tiny_spec(ExperimentKind.SWEEP_N, [4]), 0, 4.0)
        assert not record.ok
        assert record.category == "infeasible"

    def test_aggregate(self):
        records = [
            TrialRecord(num_pairs=2, sweep_value=1.0, trial=i, seed=i, values={"sinr_linear": v})
            for i, v in enumerate([1.0, 3.0])
        ] + [TrialRecord(num_pairs=2, sweep_value=1.0, trial=2, seed=2, ok=False, category="numeric")]
        row = ExperimentService.aggregate(records, 2, 1.0, ("sinr_linear",))
        assert row.trials == 3 and row.failures == 1
        assert row.values["sinr_linear_mean"] == pytest.approx(2.0)
        assert row.values["sinr_linear_stderr"] == pytest.approx(1.0)
        assert row.values["sinr_db"] == pytest.approx(10 * np.log10(2.0), abs=1e-9)

    def test_noise_scaling(self, small_scenario):
        cfg, pairs, beams = small_scenario
        powers = PowerAllocation(p1=np.ones(3), p2=np.ones(3))
        base = zeroforcing_service.strong_user_sinr(pairs, beams, powers, 1.0)
        scaled = zeroforcing_service.strong_user_sinr(pairs, beams, powers, 10.0)
        np.testing.assert_allclose(scaled, base / 10.0, rtol=1e-9)


class TestSweeps:
    @pytest.mark.asyncio
    async def test_sweep_irs_elements(self):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [2, 4])
        rows = await experiment_service.sweep_irs_elements(spec)
        assert [r.sweep_value for r in rows] == [2.0, 4.0]
        for row in rows:
            assert row.failures == 0
            v = row.values
            assert v["sinr_constrained_linear_mean"] <= v["sinr_unconstrained_linear_mean"] * (1 + 1e-9)
            assert v["sinr_constrained_db"] == pytest.approx(10 * np.log10(v["sinr_constrained_linear_mean"]), abs=1e-9)
            assert np.isfinite(v["sinr_constrained_linear_stderr"])
            assert v["constant_modulus_loss_db"] >= -1e-9

    @pytest.mark.asyncio
    async def test_single_element_methods_coincide(self):
        base = ScenarioConfig(num_tx=4, num_elements=4, num_pairs=1, seed=2)
        spec = ExperimentSpec(kind=ExperimentKind.SWEEP_N, base=base, sweep_values=[1], trials=2)
        row = (await experiment_service.sweep_irs_elements(spec))[0]
        assert row.values["sinr_constrained_linear_mean"] == pytest.approx(
            row.values["sinr_unconstrained_linear_mean"], rel=1e-9)

    @pytest.mark.asyncio
    async def test_sweep_rank_with_rank_one(self):
        rows = await experiment_service.sweep_rank(tiny_spec(ExperimentKind.SWEEP_RANK, [1, 4]))
        assert len(rows) == 2
        assert all(r.failures == 0 for r in rows)

    @pytest.mark.asyncio
    async def test_pair_counts(self):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [4], pair_counts=[1, 3])
        rows = await experiment_service.sweep_irs_elements(spec)
        assert [r.num_pairs for r in rows] == [1, 3]

    @pytest.mark.asyncio
    async def test_sweep_total_snr(self):
        spec = tiny_spec(ExperimentKind.SWEEP_SNR, [0.5, 1.0], solver=SolverConfig(eps_gamma=1e-2))
        rows = await experiment_service.sweep_total_snr(spec)
        for row in rows:
            assert row.trials == 3
            if row.failures < row.trials:
                v = row.values
                assert v["total_snr_db"] == pytest.approx(10 * np.log10(v["total_snr_linear_mean"]), abs=1e-9)
                assert v["min_rate_bps_hz_mean"] > 0

    @pytest.mark.asyncio
    async def test_min_rate_grows_with_target_rate(self):
        spec = tiny_spec(ExperimentKind.SWEEP_SNR, [0.5, 1.5], solver=SolverConfig(eps_gamma=1e-2))
        rows = await experiment_service.sweep_total_snr(spec)
        assert all(r.failures < r.trials for r in rows)
        rates = [r.values["min_rate_bps_hz_mean"] for r in rows]
        assert rates[1] >= rates[0]
        assert rates[1] <= 1.5 + 1e-6

    @pytest.mark.asyncio
    async def test_independent_of_worker_count(self):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [4])
        one = await ExperimentService(workers=1).sweep_irs_elements(spec)
        many = await ExperimentService(workers=3).sweep_irs_elements(spec)
        assert one[0].values == many[0].values

    @pytest.mark.asyncio
    async def test_validate_approximation(self):
        spec = ExperimentSpec(kind=ExperimentKind.VALIDATE, base=TINY, trials=2, samples=100_000)
        rows = await experiment_service.validate_approximation(spec)
        assert len(rows) == 2
        for row in rows:
            assert row.failures == 0
            assert row.values["user1_rel_error_max_mean"] <= 0.02
            assert np.isfinite(row.values["user2_rel_gap_mean_mean"])


class TestResultFiles:
    @pytest.mark.asyncio
    async def test_csv_is_reproducible(self, tmp_path):
        spec = tiny_spec(ExperimentKind.SWEEP_N, [2, 4])
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        await result_store.write_results(await experiment_service.run(spec), first)
        await result_store.write_results(await experiment_service.run(spec), second)
        assert first.read_bytes() == second.read_bytes()

        df = pd.read_csv(first)
        assert list(df.columns[:4]) == ["num_pairs", "sweep_value", "trials", "failures"]
        assert len(df) == 2
        np.testing.assert_allclose(
            df["sinr_constrained_db"], 10 * np.log10(df["sinr_constrained_linear_mean"]), atol=1e-9)

        raw = pd.read_csv(tmp_path / "a.raw.csv")
        assert len(raw) == 2 * spec.trials
        assert set(raw["trial"]) == {0, 1, 2}


@pytest.mark.slow
class TestFigureTrends:
    @pytest.mark.asyncio
    async def test_sinr_grows_with_irs_elements(self):
        base = ScenarioConfig(num_tx=64, num_elements=128, num_pairs=20, seed=0)
        spec = ExperimentSpec(
            kind=ExperimentKind.SWEEP_N, base=base, sweep_values=[32, 64, 128], pair_counts=[20, 40], trials=20)
        rows = await experiment_service.sweep_irs_elements(spec)
        by_load = {m: [r for r in rows if r.num_pairs == m] for m in (20, 40)}
        for load_rows in by_load.values():
            db = [r.values["sinr_constrained_db"] for r in load_rows]
            assert all(b >= a - 0.1 for a, b in zip(db, db[1:]))
            loss = [r.values["constant_modulus_loss_db"] for r in load_rows]
            assert loss[-1] < loss[0]
        for a, b in zip(by_load[20], by_load[40]):
            assert b.values["sinr_constrained_db"] <= a.values["sinr_constrained_db"]

    @pytest.mark.asyncio
    async def test_sinr_grows_with_rank(self):
        base = ScenarioConfig(num_tx=64, num_elements=128, num_pairs=10, seed=0)
        spec = ExperimentSpec(
            kind=ExperimentKind.SWEEP_RANK, base=base, sweep_values=[1, 5, 20, 64], pair_counts=[10, 30], trials=20)
        rows = await experiment_service.sweep_rank(spec)
        m30 = [r.values["sinr_constrained_db"] for r in rows if r.num_pairs == 30]
        assert all(b >= a - 0.1 for a, b in zip(m30, m30[1:]))
        m10 = {r.sweep_value: r.values["sinr_constrained_db"] for r in rows if r.num_pairs == 10}
        assert m10[64.0] - m10[20.0] <= 1.0

    @pytest.mark.asyncio
    async def test_required_total_snr(self):
        async def required_snr(num_pairs: int, n: int) -> float:
            base = ScenarioConfig(num_tx=64, num_elements=n, num_pairs=num_pairs, seed=0)
            spec = ExperimentSpec(kind=ExperimentKind.SWEEP_SNR, base=base, sweep_values=[1.0], trials=20)
            row = (await experiment_service.sweep_total_snr(spec))[0]
            assert row.failures < row.trials
            return row.values["total_snr_db"]

        m10 = await required_snr(10, 128)
        m20 = await required_snr(20, 128)
        m20_small = await required_snr(20, 64)
        assert abs(m10 - 13.0) <= 2.0
        assert abs(m20 - 20.0) <= 2.0
        assert abs((m20_small - m20) - 3.0) <= 1.0


class TestScenarioStore:
    @pytest.mark.asyncio
    async def test_dump_and_load(self, small_scenario, tmp_path):
        cfg, pairs, _ = small_scenario
        path = await scenario_store.dump_scenario(cfg, pairs, tmp_path / "scenario.json")
        loaded_cfg, loaded = await scenario_store.load_scenario(path)
        assert loaded_cfg == cfg
        for a, b in zip(pairs, loaded):
            np.testing.assert_array_equal(a.r_h, b.r_h)
            np.testing.assert_array_equal(a.r_g, b.r_g)
            np.testing.assert_array_equal(a.g, b.g)
            assert a.c2_weak == b.c2_weak

    @pytest.mark.asyncio
    async def test_malformed_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"version": 1,\n  "config": }', encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            await scenario_store.load_scenario(path)
        assert exc.value.context["line"] == 2

    def test_pair_count_mismatch(self, small_scenario):
        cfg, pairs, _ = small_scenario
        doc = scenario_store.to_document(cfg, pairs[:2])
        with pytest.raises(ConfigError):
            scenario_store.from_document(doc)


class TestTraceFiles:
    @pytest.mark.asyncio
    async def test_dinkelbach_trace_file(self, tmp_path):
        trace = DinkelbachTrace()
        trace.record(0.0, 2.0, 1.5)
        trace.record(1.5, 1e-8, 1.6)
        path = await result_store.write_dinkelbach_trace(trace, tmp_path / "trace.csv")
        df = pd.read_csv(path)
        assert list(df.columns) == ["iteration", "eta", "F", "objective"]
        assert list(df["iteration"]) == [1, 2]
        assert df["eta"].iloc[1] == pytest.approx(1.5)
