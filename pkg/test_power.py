# test_power.py - 功率分配测试
import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import InfeasibleThresholdError, UnserviceableUserError
from app.schemas.power import BalanceProblem, PowerAllocation
from app.services.irs_service import irs_service
from app.services.power_service import power_service
from app.services.zeroforcing_service import zeroforcing_service


def weak_sinr(bp: BalanceProblem, p1: np.ndarray, p2: np.ndarray, noise_terms: np.ndarray) -> np.ndarray:
    return irs_service.weak_user_sinr(bp.t, p1, p2, noise_terms)


def random_instance(rng: np.random.Generator, m: int, coupling: float = 0.05):
    t = rng.uniform(0.0, coupling, size=(m, m))
    np.fill_diagonal(t, rng.uniform(1.0, 3.0, size=m))
    p1 = rng.uniform(0.1, 0.5, size=m)
    c2_weak = rng.uniform(0.5, 1.0, size=m)
    return t, p1, c2_weak


class TestStrongUserPower:
    def test_examples(self):
        assert power_service.strong_user_power(1.0, 1.0, 1.0, 1.0) == pytest.approx(1.0)
        assert power_service.strong_user_power(10.0, 0.5, 2.0, 0.25) == pytest.approx(10.0)

    def test_linear_in_threshold(self):
        a = power_service.strong_user_power(2.0, 0.3, 0.7, 1.9)
        b = power_service.strong_user_power(4.0, 0.3, 0.7, 1.9)
        assert b == pytest.approx(2 * a)

    def test_unserviceable(self):
        with pytest.raises(UnserviceableUserError):
            power_service.strong_user_power(1.0, 1.0, 1.0, 0.0)

    def test_meets_threshold(self, small_scenario):
        cfg, pairs, beams = small_scenario
        p1 = power_service.strong_user_powers(pairs, beams, 3.0, cfg.noise_var)
        sinr = zeroforcing_service.strong_user_sinr(pairs, beams, PowerAllocation(p1=p1, p2=p1), cfg.noise_var)
        np.testing.assert_allclose(sinr, 3.0, rtol=1e-9)


class TestBalanceProblem:
    def test_zeta_includes_strong_user_interference(self):
        t = np.array([[2.0, 0.5], [0.25, 1.0]])
        bp = BalanceProblem.from_interference(t, [1.0, 2.0], 1.0, 1.0, [0.5, 1.0])
        np.testing.assert_allclose(bp.zeta, [2.0 + 1.0 + 2.0, 0.25 + 2.0 + 1.0])
        np.testing.assert_allclose(bp.t_off, [[0.0, 0.5], [0.25, 0.0]])
        np.testing.assert_allclose(bp.lam, [0.5, 1.0])

    def test_zero_diagonal_is_unserviceable(self):
        t = np.array([[0.0, 0.1], [0.1, 1.0]])
        with pytest.raises(UnserviceableUserError) as exc:
            BalanceProblem.from_interference(t, [1.0, 1.0], 1.0, 1.0, [1.0, 1.0])
        assert exc.value.context["pairs"] == [0]

    def test_validation(self):
        with pytest.raises(ValidationError):
            BalanceProblem(t=[[1.0, -0.1], [0.0, 1.0]], gamma_th=1.0, zeta=[1.0, 1.0])
        with pytest.raises(ValidationError):
            BalanceProblem(t=np.eye(2), gamma_th=1.0, zeta=[1.0, 0.0])
        with pytest.raises(ValidationError):
            BalanceProblem(t=np.eye(2), gamma_th=1.0, zeta=[1.0])

    def test_noma_order_violations(self):
        powers = PowerAllocation(p1=[1.0, 3.0, 2.0], p2=[2.0, 1.0, 2.0])
        assert powers.noma_order_violations() == [1]
        assert power_service.check_noma_order(powers) == [1]


class TestSinrBalance:
    def test_single_pair_closed_form(self):
        t, zeta, gamma, budget = 2.0, 0.8, 1.5, 7.0
        bp = BalanceProblem(t=[[t]], gamma_th=gamma, zeta=[zeta], p_tot2=budget)
        c, p2 = power_service.sinr_balance(bp)
        assert c == pytest.approx(budget * t / (gamma * zeta), rel=1e-9)
        np.testing.assert_allclose(p2, [budget], rtol=1e-9)

    def test_balanced_ratios_and_budget(self):
        rng = np.random.default_rng(8)
        for m in range(2, 9):
            t, p1, c2 = random_instance(rng, m, coupling=0.3)
            noise = 1.0 / c2
            bp = power_service.build_balance_problem(t, p1, 2.0, 1.0, c2, p_tot2=5.0 * m)
            c, p2 = power_service.sinr_balance(bp)
            assert np.all(p2 >= 0)
            assert p2.sum() == pytest.approx(5.0 * m, rel=1e-6)
            ratios = weak_sinr(bp, p1, p2, noise) / 2.0
            np.testing.assert_allclose(ratios, c, rtol=1e-6)

    def test_monotone_in_budget(self):
        rng = np.random.default_rng(21)
        t, p1, c2 = random_instance(rng, 4, coupling=0.2)
        values = []
        for budget in (0.5, 1.0, 2.0, 4.0, 8.0):
            bp = power_service.build_balance_problem(t, p1, 1.0, 1.0, c2, p_tot2=budget)
            values.append(power_service.sinr_balance(bp)[0])
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_simplex_grid_oracle(self):
        rng = np.random.default_rng(3)
        t, p1, c2 = random_instance(rng, 2, coupling=0.4)
        noise = 1.0 / c2
        budget = 3.0
        bp = power_service.build_balance_problem(t, p1, 1.0, 1.0, c2, p_tot2=budget)
        c, p2 = power_service.sinr_balance(bp)

        shares = np.linspace(0.0, 1.0, 1001)
        grid = [np.min(weak_sinr(bp, p1, np.array([s, 1 - s]) * budget, noise)) for s in shares]
        best = int(np.argmax(grid))
        assert grid[best] <= c + 1e-9
        assert abs(p2[0] / budget - shares[best]) <= 1e-3


class TestMinPower:
    def test_single_pair(self):
        bp = BalanceProblem(t=[[2.0]], gamma_th=3.0, zeta=[0.5])
        np.testing.assert_allclose(power_service.min_power_solve(bp), [3.0 * 0.5 / 2.0])

    def test_no_coupling(self):
        bp = BalanceProblem(t=np.diag([1.0, 2.0, 4.0]), gamma_th=2.0, zeta=[1.0, 1.0, 2.0])
        np.testing.assert_allclose(power_service.min_power_solve(bp), [2.0, 1.0, 1.0])

    def test_two_by_two_hand_solution(self):
        tt = 0.1
        bp = BalanceProblem(t=[[1.0, tt], [tt, 1.0]], gamma_th=1.0, zeta=[1.0, 2.0])
        # p_a = t·p_b + 1, p_b = t·p_a + 2
        expected = np.array([(1 + 2 * tt) / (1 - tt ** 2), (2 + tt) / (1 - tt ** 2)])
        np.testing.assert_allclose(power_service.min_power_solve(bp), expected, rtol=1e-12)

    def test_fixed_point(self):
        rng = np.random.default_rng(13)
        for trial in range(50):
            m = 2 + trial % 7
            t, p1, c2 = random_instance(rng, m)
            noise = 1.0 / c2
            bp = power_service.build_balance_problem(t, p1, 1.5, 1.0, c2)
            p2 = power_service.min_power_solve(bp)
            assert np.all(p2 > 0)
            np.testing.assert_allclose(weak_sinr(bp, p1, p2, noise), 1.5, rtol=1e-6)

    def test_infeasible_threshold(self):
        bp = BalanceProblem(t=[[1.0, 1.0], [1.0, 1.0]], gamma_th=2.0, zeta=[1.0, 1.0])
        with pytest.raises(InfeasibleThresholdError) as exc:
            power_service.min_power_solve(bp)
        assert exc.value.context["spectral_radius"] == pytest.approx(2.0)

    def test_consistent_with_balance(self):
        rng = np.random.default_rng(4)
        t, p1, c2 = random_instance(rng, 3, coupling=0.2)
        bp = power_service.build_balance_problem(t, p1, 1.0, 1.0, c2)
        p_min = power_service.min_power_solve(bp)
        c, _ = power_service.sinr_balance(bp.model_copy(update={"p_tot2": float(p_min.sum())}))
        assert c == pytest.approx(1.0, rel=1e-4)
