from pathlib import Path

import numpy as np
import pytest

from XCCY_HJM_Helper.curves import InitialCurve, VolatilitySpec
from XCCY_HJM_Helper.driver import DriverSpec, GaussianJumps
from XCCY_HJM_Helper.engine import (
    CheckSpec, SimulationConfig, build_time_grid, check_dates, default_checks, default_threads, gaussian_oracle,
    martingale_report, nested_conditional_discount, run_simulation, z_score,
)
from XCCY_HJM_Helper.exceptions import EmptyGrid, MissingState, ReversedInterval
from XCCY_HJM_Helper.indices import IndexSpec, SpreadFamilySpec
from XCCY_HJM_Helper.market import CurrencySpec, MarketModel, load_scenario
from XCCY_HJM_Helper.measures import MeasureId

from conftest import brownian, currency, simulate

ROOT = Path(__file__).resolve().parent.parent


def usd_market(vol: VolatilitySpec, **kwargs):
    return MarketModel("USD", {"USD": currency("USD", 0.03, vol=vol)}, brownian(vol.dim), **kwargs)


class TestTimeGrid:
    def test_regular_grid(self):
        np.testing.assert_allclose(build_time_grid(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_dates_are_merged(self):
        grid = build_time_grid(1.0, 0.25, (0.3, 2.0))
        np.testing.assert_allclose(grid, [0.0, 0.25, 0.3, 0.5, 0.75, 1.0])

    def test_near_duplicate_keeps_the_date(self):
        date = 0.25 + 1e-12
        grid = build_time_grid(1.0, 0.25, (date,))
        assert grid.size == 5
        assert grid[1] == date

    def test_horizon_off_the_step(self):
        np.testing.assert_allclose(build_time_grid(1.0, 0.3), [0.0, 0.3, 0.6, 0.9, 1.0])

    def test_empty_grid(self):
        with pytest.raises(EmptyGrid):
            build_time_grid(1.0, 0.0)
        with pytest.raises(EmptyGrid):
            build_time_grid(0.0, 0.1)


class TestSimulationConfig:
    @pytest.mark.parametrize("kwargs", [
        {"horizon": 0.0},
        {"horizon": 1.0, "dt": -0.1},
        {"horizon": 1.0, "paths": 1},
        {"horizon": 1.0, "scheme": "milstein"},
        {"horizon": 1.0, "chunk_size": 0},
        {"horizon": 1.0, "paths": 7, "antithetic": True},
        {"horizon": 1.0, "paths": 8, "chunk_size": 3, "antithetic": True},
    ])
    def test_invalid_settings(self, kwargs):
        with pytest.raises(ValueError):
            SimulationConfig(**kwargs)

    def test_observation_times_are_sorted(self):
        assert SimulationConfig(1.0, observation_times=(1.0, 0.5)).observation_times == (0.5, 1.0)

    def test_hash_follows_the_settings(self):
        config = SimulationConfig(1.0, seed=1)
        assert config.config_hash("m") == SimulationConfig(1.0, seed=1).config_hash("m")
        assert config.config_hash("m") != SimulationConfig(1.0, seed=2).config_hash("m")
        assert config.config_hash("m") != config.config_hash("n")
        assert config.config_hash("m") == SimulationConfig(1.0, seed=1, threads=4, chunk_size=7).config_hash("m")

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("XCCY_HJM_THREADS", "3")
        assert default_threads() == 3
        monkeypatch.setenv("XCCY_HJM_THREADS", "many")
        assert default_threads() == 1
        monkeypatch.delenv("XCCY_HJM_THREADS")
        assert default_threads() == 1


class TestRunSimulation:
    def test_stores_observation_times_and_zero(self, flat_usd_market):
        config = SimulationConfig(1.0, dt=0.25, paths=2, observation_times=(0.5, 1.0))
        result = run_simulation(flat_usd_market, config)
        np.testing.assert_allclose(result.times, [0.0, 0.5, 1.0])
        assert not result.has_time(0.25)
        with pytest.raises(MissingState):
            result.log_account("USD", 0.25)
        with pytest.raises(MissingState):
            result.fx("GBP", 0.5)

    def test_without_observation_times_keeps_dates_and_horizon(self):
        market = MarketModel("USD", {"USD": CurrencySpec(
            "USD", InitialCurve([0.0, 0.5, 3.0], [0.01, 0.02, 0.03]), VolatilitySpec.constant([0.01]),
        )}, brownian())
        result = run_simulation(market, SimulationConfig(1.0, dt=0.01, paths=3))
        assert result.grid.size == 101
        np.testing.assert_allclose(result.times, [0.0, 0.5, 1.0])
        assert result.data["curve/USD"].shape == (3, 3, 3)
        assert all(values.shape[1] == 3 for values in result.data.values())

    def test_chunking_and_threads_do_not_change_values(self, gaussian_pair_market):
        single = simulate(gaussian_pair_market, 1.0, 0.125, 50, times=(0.5,))
        split = simulate(gaussian_pair_market, 1.0, 0.125, 50, times=(0.5,), chunk_size=7, threads=3)
        assert single.data.keys() == split.data.keys()
        for key in single.data:
            np.testing.assert_array_equal(single.data[key], split.data[key])
        assert single.config_hash == split.config_hash

    def test_reverse_pair_negates_the_stored_basis(self, gaussian_pair_market):
        result = simulate(gaussian_pair_market, 1.0, 0.25, 3, times=(0.5,))
        stored = result.log_coll_account("USD", "EUR", 0.5) - result.log_account("USD", 0.5)
        reverse = result.log_coll_account("EUR", "USD", 0.5) - result.log_account("EUR", 0.5)
        np.testing.assert_allclose(reverse, -stored, atol=1e-15)
        spread = result.log_bond("USD", "EUR", 0.5, 1.0) - result.log_bond("USD", "USD", 0.5, 1.0)
        reverse_spread = result.log_bond("EUR", "USD", 0.5, 1.0) - result.log_bond("EUR", "EUR", 0.5, 1.0)
        np.testing.assert_allclose(reverse_spread, -spread, atol=1e-15)

    def test_seed_changes_paths(self, gaussian_pair_market):
        first = simulate(gaussian_pair_market, 1.0, 0.25, 4, seed=1)
        second = simulate(gaussian_pair_market, 1.0, 0.25, 4, seed=2)
        assert not np.array_equal(first.fx("EUR", 1.0), second.fx("EUR", 1.0))

    def test_head_keeps_the_first_paths(self, gaussian_pair_market):
        result = simulate(gaussian_pair_market, 1.0, 0.25, 6)
        head = result.head(2)
        assert head.n_paths == 2
        np.testing.assert_array_equal(head.fx("EUR", 1.0), result.fx("EUR", 1.0)[:2])

    def test_antithetic_paths_mirror_the_driver(self):
        market = usd_market(VolatilitySpec.constant([0.01]))
        result = simulate(market, 1.0, 0.25, 4, antithetic=True)
        shocks = result.short_rate("USD", "USD", 1.0) - 0.03
        pair_sums = shocks[0::2] + shocks[1::2]
        np.testing.assert_allclose(pair_sums, pair_sums[0], atol=1e-12)
        assert shocks[0] != shocks[1]
        assert result.antithetic


class TestPathTable:
    def test_order_and_columns(self, deterministic_pair_market):
        result = simulate(deterministic_pair_market, 1.0, 0.5, 2, times=(0.5,))
        table = result.path_table()
        assert list(table.columns) == ["path_id", "t", "quantity", "value"]
        assert len(table) == 2 * 3 * 6
        head = table.iloc[:6]
        assert list(head["quantity"]) == [
            "short_rate/USD", "short_rate/EUR", "account/USD", "account/EUR", "fx/EUR", "density/EUR",
        ]
        assert (head["path_id"] == 0).all() and (head["t"] == 0.0).all()
        assert list(table["t"].iloc[6:12]) == [0.5] * 6
        assert table["path_id"].iloc[-1] == 1

    def test_selected_quantities(self, deterministic_pair_market):
        table = simulate(deterministic_pair_market, 1.0, 0.5, 2).path_table(("fx",))
        assert set(table["quantity"]) == {"fx/EUR"}
        np.testing.assert_allclose(table["value"].iloc[-1], 1.25 * np.exp(0.01), rtol=1e-12)

    def test_unknown_selection(self, flat_usd_market):
        with pytest.raises(MissingState):
            simulate(flat_usd_market, 1.0, 0.5, 2).path_table(("fx",))


class TestZScore:
    def test_standard_error_scaling(self):
        assert z_score(1.0, 0.0, 0.5) == pytest.approx(2.0)

    def test_exact_match_without_error(self):
        assert z_score(1.0, 1.0, 0.0) == 0.0
        assert z_score(1.0 + 1e-13, 1.0, 0.0) == 0.0

    def test_rounding_noise_in_both_gap_and_error(self):
        assert z_score(0.99 + 2e-16, 0.99, 1e-17) == 0.0
        assert z_score(0.0, 0.0, 0.0) == 0.0
        assert z_score(1.0 + 1e-9, 1.0, 1e-17) > 1e6

    def test_mismatch_without_error(self):
        assert z_score(1.1, 1.0, 0.0) == np.inf
        assert z_score(0.9, 1.0, 0.0) == -np.inf


class TestCheckSpec:
    def test_names(self):
        assert CheckSpec("discounted_bond", currency="USD", maturity=2.0).name == "discounted_bond[USD,T=2]"
        assert (CheckSpec("foreign_collateral_bond", currency="USD", collateral="EUR", maturity=1.5).name
                == "foreign_collateral_bond[USD/EUR,T=1.5]")
        assert CheckSpec("index_spread", index="USD-3M", fixing=1.25).name == "index_spread[USD-3M,T=1.25]"
        assert CheckSpec("zcb_duality", currency="EUR", maturity=1.0, case="k2k2").name == "zcb_duality[EUR,T=1,k2k2]"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            CheckSpec("cap_floor_parity")

    def test_times_are_sorted(self):
        assert CheckSpec("fx_martingale", currency="EUR", times=(1, 0.5)).times == (0.5, 1.0)

    def test_default_checks(self, gaussian_pair_market):
        names = [check.name for check in default_checks(gaussian_pair_market, 2.0)]
        assert names == ["discounted_bond[USD,T=2]", "discounted_bond[EUR,T=2]", "fx_martingale[EUR]"]

    def test_check_dates(self):
        family = SpreadFamilySpec(0.25, 0.1, "USD", "USD", InitialCurve.flat(0.0), VolatilitySpec.zero(1))
        market = usd_market(VolatilitySpec.zero(1),
                            indices={"X": IndexSpec("X", "abstract", "USD", "USD", 0.25, 0.1, family)})
        dates = check_dates(CheckSpec("index_forward", index="X", fixing=1.0, times=(0.5,)), market)
        assert dates == pytest.approx((0.0, 0.25, 0.5, 0.75, 1.0, 1.1))
        assert check_dates(CheckSpec("asymmetric_collateral", maturity=3.0), market) == (0.0,)


class TestMartingaleReport:
    def test_deterministic_market_is_exact(self, deterministic_pair_market):
        result = simulate(deterministic_pair_market, 2.0, 0.25, 2, times=(0.5, 1.0, 1.5))
        checks = default_checks(deterministic_pair_market, 2.0) + [
            CheckSpec("expectation_hypothesis", currency="EUR", maturity=2.0),
            CheckSpec("forward_density", currency="EUR", maturity=1.0),
            CheckSpec("zcb_duality", currency="EUR", maturity=2.0),
        ]
        rows = martingale_report(result, checks)
        assert rows
        assert all(row.passed and row.z == 0.0 for row in rows)

    def test_reference_scenario_is_exact_at_time_zero(self):
        scenario = load_scenario(ROOT / "scenarios" / "reference_gaussian.json").with_overrides(paths=400)
        rows = martingale_report(run_simulation(scenario.market, scenario.simulation), scenario.checks)
        opening = [
            row for row in rows
            if row.t == 0.0 and not row.name.startswith(("zcb_duality", "asymmetric_collateral"))
        ]
        assert len(opening) >= 5
        for row in opening:
            assert row.passed and row.z == 0.0, row

    def test_gaussian_market_passes(self, gaussian_pair_market):
        result = simulate(gaussian_pair_market, 2.0, 0.125, 4000, times=(0.5, 1.0, 1.5))
        checks = default_checks(gaussian_pair_market, 2.0) + [
            CheckSpec("foreign_collateral_bond", currency="USD", collateral="EUR", maturity=2.0),
            CheckSpec("spread_bond_forward", currency="USD", collateral="EUR", maturity=2.0),
            CheckSpec("expectation_hypothesis", currency="EUR", maturity=1.5),
            CheckSpec("forward_density", currency="USD", collateral="EUR", maturity=1.0),
            CheckSpec("claim_martingale", currency="EUR", maturity=2.0),
            CheckSpec("zcb_duality", currency="EUR", maturity=2.0),
        ]
        rows = martingale_report(result, checks)
        assert len({row.name for row in rows}) == len(checks)
        for row in rows:
            assert abs(row.z) < 4.5, row

    def test_drift_bias_is_detected(self, flat_usd_market):
        config = SimulationConfig(2.0, dt=0.25, paths=2, observation_times=(1.0, 2.0), drift_bias=0.01)
        rows = martingale_report(run_simulation(flat_usd_market, config), default_checks(flat_usd_market, 2.0))
        assert not all(row.passed for row in rows)
        assert rows[0].passed and rows[0].t == 0.0

    def test_index_checks_pass(self):
        family = SpreadFamilySpec(0.25, 0.0, "USD", "USD", InitialCurve.flat(0.001), VolatilitySpec.constant([0.0, 0.004]))
        market = MarketModel(
            "USD", {"USD": currency("USD", 0.02, (0.01, 0.0))}, brownian(2),
            indices={"USD-3M": IndexSpec("USD-3M", "abstract", "USD", "USD", 0.25, 0.0, family)},
        )
        result = simulate(market, 1.5, 0.125, 4000, times=(0.25, 0.5, 1.0, 1.25))
        checks = [CheckSpec("index_spread", index="USD-3M", fixing=1.25),
                  CheckSpec("index_forward", index="USD-3M", fixing=1.25)]
        rows = martingale_report(result, checks)
        assert {row.name for row in rows} == {"index_spread[USD-3M,T=1.25]", "index_forward[USD-3M,T=1.25]"}
        for row in rows:
            assert abs(row.z) < 4.5, row

    def test_asymmetric_collateral_check(self, flat_usd_market):
        result = simulate(flat_usd_market, 1.0, 0.5, 2)
        check = CheckSpec("asymmetric_collateral", borrow_rate=0.03, lend_rate=0.01, funding_rate=0.02,
                          payments=((0.5, 2.0), (1.5, -3.0)))
        rows = martingale_report(result, [check])
        assert [row.name.split(":")[-1] for row in rows] == ["quadrature", "symmetric"]
        assert all(row.passed for row in rows)

    def test_nested_collateral_rate_without_volatility(self):
        lagged = IndexSpec("USD-LAG", "forward_looking", "USD", "USD", 0.5, 0.25)
        market = usd_market(VolatilitySpec.zero(1), indices={"USD-LAG": lagged})
        result = simulate(market, 1.5, 0.25, 2, times=(0.5, 0.75, 1.0, 1.25))
        check = CheckSpec("nested_collateral_rate", index="USD-LAG", fixing=1.0, outer_paths=2, inner_paths=3)
        rows = martingale_report(result, [check])
        assert [row.t for row in rows] == [0.5, 0.75, 1.0]
        for row in rows:
            assert row.estimate == pytest.approx(0.0, abs=1e-12)


class TestNestedDiscount:
    def test_flat_curve(self, flat_usd_market):
        result = simulate(flat_usd_market, 2.0, 0.25, 3, times=(0.5, 1.0, 1.5))
        values = nested_conditional_discount(result, "USD", "USD", 0.5, [(0.5, 1.0), (1.5, 2.0)], 2, 4)
        np.testing.assert_allclose(values, np.exp(-0.03), rtol=1e-12)
        assert values.shape == (2,)

    def test_argument_errors(self, flat_usd_market):
        result = simulate(flat_usd_market, 2.0, 0.25, 3, times=(0.5, 1.0))
        with pytest.raises(ValueError):
            nested_conditional_discount(result, "USD", "USD", 0.5, [], 2, 4)
        with pytest.raises(ReversedInterval):
            nested_conditional_discount(result, "USD", "USD", 1.0, [(0.5, 2.0)], 2, 4)
        with pytest.raises(ValueError):
            nested_conditional_discount(result, "USD", "USD", 0.5, [(0.5, 1.0)], 5, 4)


class TestGaussianOracle:
    def test_constant_volatility_variance(self):
        market = usd_market(VolatilitySpec.constant([0.01]))
        oracle = gaussian_oracle(market, "USD", 1.0, 3.0)
        assert oracle.log_variance == pytest.approx(0.01 ** 2 * 2.0 ** 2 * 1.0, rel=1e-10)

    def test_mean_reverting_variance(self):
        sigma, a, t, maturity = 0.01, 0.3, 1.5, 4.0
        market = usd_market(VolatilitySpec.exponential([sigma], a))
        oracle = gaussian_oracle(market, "USD", t, maturity)
        expected = sigma ** 2 / a ** 2 * (1 - np.exp(-a * (maturity - t))) ** 2 * (1 - np.exp(-2 * a * t)) / (2 * a)
        assert oracle.log_variance == pytest.approx(expected, rel=1e-10)

    def test_time_zero_is_the_initial_bond(self):
        oracle = gaussian_oracle(usd_market(VolatilitySpec.constant([0.01])), "USD", 0.0, 2.0)
        assert oracle.log_variance == 0.0
        assert oracle.mean == pytest.approx(np.exp(-0.06))

    def test_unit_mean_of_discounted_bond_law(self):
        market = usd_market(VolatilitySpec.constant([0.01]))
        oracle = gaussian_oracle(market, "USD", 1.0, 2.0)
        # forward drift sigma^2 (u - s) lowers the log mean by sigma^2, the variance adds half of it back
        assert oracle.mean == pytest.approx(np.exp(-0.03 - 0.5 * 0.01 ** 2), rel=1e-9)

    def test_argument_errors(self):
        market = usd_market(VolatilitySpec.constant([0.01]))
        with pytest.raises(ReversedInterval):
            gaussian_oracle(market, "USD", 2.0, 1.0)
        with pytest.raises(ValueError):
            gaussian_oracle(market, "USD", 1.0, 2.0, kind="swaption")
        jumps = DriverSpec.constant(MeasureId.spot("USD"), [0.0], [[1.0]], [GaussianJumps(1.0, [1.0], 0.0, 0.1)])
        jump_market = MarketModel("USD", {"USD": currency("USD", 0.03, (0.01,))}, jumps)
        with pytest.raises(ValueError):
            gaussian_oracle(jump_market, "USD", 1.0, 2.0)

    def test_spread_bond_law_needs_a_configured_pair(self, gaussian_pair_market):
        with pytest.raises(ValueError, match="configured basis pair"):
            gaussian_oracle(gaussian_pair_market, "EUR", 1.0, 2.0, kind="spread_bond", collateral="USD")
        assert gaussian_oracle(gaussian_pair_market, "USD", 1.0, 2.0, "spread_bond", "EUR").log_variance > 0

    def test_simulated_laws_match(self):
        market = usd_market(VolatilitySpec.exponential([0.01], 0.2))
        result = simulate(market, 2.0, 0.125, 20000, times=(1.0,))
        rows = martingale_report(result, [CheckSpec("gaussian_oracle", currency="USD", maturity=2.0, times=(1.0,))])
        assert [row.name for row in rows] == ["gaussian_oracle[USD,T=2]:mean", "gaussian_oracle[USD,T=2]:log_variance"]
        mean, variance = rows
        assert abs(mean.z) < 4.5
        assert variance.passed
