import numpy as np
import pytest

from XCCY_HJM_Helper.curves import InitialCurve, VolatilitySpec
from XCCY_HJM_Helper.exceptions import BeforePeriodStart, MissingState, ScheduleOffGrid
from XCCY_HJM_Helper.indices import (
    IndexSchedule, IndexSpec, SpreadFamilySpec, SpreadVolatility, discount_index_value, forward_index_spread,
    forward_index_value, integrated_spread_drift, simple_forward_collateral_rate, spot_rate_examples,
    spread_drift, spread_explicit,
)
from XCCY_HJM_Helper.market import CommoditySpec, MarketModel
from XCCY_HJM_Helper.measures import Estimate

from conftest import brownian, currency, simulate


def family(rate=0.0, loading=(0.0,), delta_f=0.25, delta_p=0.0):
    return SpreadFamilySpec(delta_f, delta_p, "USD", "USD", InitialCurve.flat(rate), VolatilitySpec.constant(loading))


def abstract_index(spec: SpreadFamilySpec, name="USD-3M"):
    return IndexSpec(name, "abstract", "USD", "USD", spec.delta_f, spec.delta_p, spec)


def index_market(spec: SpreadFamilySpec, usd=None, dim=1):
    usd = usd or currency("USD", 0.02, (0.0,) * dim)
    return MarketModel("USD", {"USD": usd}, brownian(dim), indices={"USD-3M": abstract_index(spec)})


@pytest.fixture
def flat_result(flat_usd_market):
    return simulate(flat_usd_market, 2.0, 0.125, 3, times=(0.25, 0.5, 0.75, 1.0, 1.5))


@pytest.fixture
def stochastic_index():
    spec = family(0.001, (0.0, 0.004))
    market = index_market(spec, currency("USD", 0.02, (0.01, 0.0)), dim=2)
    return spec, simulate(market, 1.5, 0.125, 64, times=(0.25, 0.5, 0.75, 1.0, 1.25))


def test_schedule_dates():
    sched = IndexSchedule(1.25, 0.25, 0.1)
    assert sched.start == pytest.approx(1.0)
    assert sched.payment == pytest.approx(1.35)
    assert sched.delta == pytest.approx(0.35)
    moved = sched.fixed_at_payment()
    assert (moved.fixing, moved.delta_f, moved.delta_p) == (sched.payment, sched.delta, 0.0)


def test_schedule_rejects_fixing_before_adjustment():
    with pytest.raises(ValueError):
        IndexSchedule(0.1, 0.25)
    with pytest.raises(ValueError):
        IndexSchedule(1.0, -0.25)


def test_abstract_index_needs_a_family():
    with pytest.raises(ValueError):
        IndexSpec("X", "abstract", "USD", "USD")
    with pytest.raises(ValueError):
        IndexSpec("X", "commodity", "USD", "USD")


def test_integrated_spread_drift_with_collateral_lock():
    spread_vol = SpreadVolatility(
        VolatilitySpec.constant([0.01]), VolatilitySpec.constant([0.01]), VolatilitySpec.zero(1), 0.25, 0.25,
    )
    value = integrated_spread_drift(spread_vol, brownian(), 0.0, 1.25)
    assert float(value) == pytest.approx(1.71875e-4, rel=1e-12)


def test_spread_drift_matches_its_integral():
    spread_vol = SpreadVolatility(
        VolatilitySpec.exponential([0.008, 0.002], 0.2), VolatilitySpec.constant([0.01, 0.0]),
        VolatilitySpec.constant([0.0, 0.003]), 0.5, 0.25,
    )
    driver = brownian(2)
    maturity, h = 2.0, 1e-6
    numeric = (integrated_spread_drift(spread_vol, driver, 0.3, maturity + h)
               - integrated_spread_drift(spread_vol, driver, 0.3, maturity - h)) / (2 * h)
    assert float(spread_drift(spread_vol, driver, 0.3, maturity)) == pytest.approx(float(numeric), rel=1e-5)


def test_spread_volatility_follows_the_collateral_curve_near_payment():
    spread_vol = SpreadVolatility(
        VolatilitySpec.constant([0.5]), VolatilitySpec.constant([0.01]), VolatilitySpec.constant([0.002]), 0.25, 0.25,
    )
    np.testing.assert_allclose(spread_vol.sigma(0.0, [0.2, 1.0]), [[0.012], [0.5]])


def test_simple_forward_collateral_rate_regimes(flat_result):
    sched = IndexSchedule(1.0, 0.5)
    expected = (np.exp(0.015) - 1.0) / 0.5
    for t in (0.5, 0.75, 1.0, 1.5):
        np.testing.assert_allclose(
            simple_forward_collateral_rate(flat_result, sched, "USD", "USD", t), expected, rtol=1e-12,
        )


def test_simple_forward_collateral_rate_guards(flat_result):
    with pytest.raises(BeforePeriodStart):
        simple_forward_collateral_rate(flat_result, IndexSchedule(1.0, 0.5), "USD", "USD", 0.25)
    with pytest.raises(MissingState):
        simple_forward_collateral_rate(flat_result, IndexSchedule(1.0, 0.5, 0.5), "USD", "USD", 0.5)
    with pytest.raises(ValueError):
        simple_forward_collateral_rate(flat_result, IndexSchedule(1.0, 0.0), "USD", "USD", 0.5)


def test_payment_lag_rate_with_conditional_discount(flat_result):
    sched = IndexSchedule(1.0, 0.5, 0.5)
    # E[exp(-int r)] over the payment lag on a flat curve
    conditional = np.full(3, np.exp(-0.015))
    value = simple_forward_collateral_rate(flat_result, sched, "USD", "USD", 0.5, conditional)
    np.testing.assert_allclose(value, (np.exp(0.03 - 0.015) - 1.0) / 0.5, rtol=1e-12)


def test_forward_index_spread_of_flat_curve():
    spec = family(0.005)
    result = simulate(index_market(spec), 1.25, 0.25, 2, times=(0.25, 1.0))
    np.testing.assert_allclose(forward_index_spread(result, spec, 1.25, 0.25), np.exp(-0.005), rtol=1e-12)
    np.testing.assert_allclose(forward_index_spread(result, spec, 1.25, 1.25), np.exp(-0.005), rtol=1e-12)


def test_unit_spread_gives_the_discount_index():
    spec = family(0.0)
    result = simulate(index_market(spec), 1.25, 0.25, 2, times=(0.25, 1.0))
    for t in (0.25, 1.0, 1.25):
        np.testing.assert_allclose(
            forward_index_value(result, spec, 1.25, t), discount_index_value(result, spec, 1.25, t), rtol=1e-12,
        )
    np.testing.assert_allclose(forward_index_value(result, spec, 1.25, 0.25), (np.exp(0.005) - 1.0) / 0.25, rtol=1e-12)


def test_forward_index_is_frozen_after_fixing():
    spec = family(0.002)
    result = simulate(index_market(spec), 1.5, 0.25, 2, times=(0.25, 0.75, 1.0, 1.25))
    np.testing.assert_allclose(forward_index_value(result, spec, 1.0, 1.5), forward_index_value(result, spec, 1.0, 1.0))
    np.testing.assert_allclose(forward_index_value(result, spec, 1.0, 0.25), (np.exp(0.005 - 0.0015) - 1.0) / 0.25,
                               rtol=1e-12)


def test_forward_index_before_delta_f_raises():
    spec = family(0.0)
    result = simulate(index_market(spec), 1.25, 0.25, 2)
    with pytest.raises(BeforePeriodStart):
        forward_index_value(result, spec, 1.25, 0.0)


def test_zero_length_index_is_the_short_rate(stochastic_index):
    _, result = stochastic_index
    instant = family(0.0, (0.0, 0.0), delta_f=0.0)
    np.testing.assert_array_equal(forward_index_value(result, instant, 1.0, 0.5), result.short_rate("USD", "USD", 0.5))
    np.testing.assert_array_equal(forward_index_value(result, instant, 1.0, 1.25), result.short_rate("USD", "USD", 1.0))


def test_explicit_spread_matches_the_simulated_spread(stochastic_index):
    spec, result = stochastic_index
    for t in (0.25, 0.5, 1.0, 1.25):
        np.testing.assert_allclose(
            spread_explicit(result, spec, 1.25, t), forward_index_spread(result, spec, 1.25, t), rtol=1e-10,
        )


def test_backward_and_forward_looking_rates(flat_result):
    expected = (np.exp(0.015) - 1.0) / 0.5
    for kind in ("backward_compounded", "forward_looking", "forward_looking_forward"):
        values = spot_rate_examples(flat_result, kind, "USD", "USD", 0.5, 1.0, 0.0)
        np.testing.assert_allclose(values, expected, rtol=1e-12)


def test_in_arrears_forward_meets_both_rates(stochastic_index):
    _, result = stochastic_index

    def rate(kind, t):
        return spot_rate_examples(result, kind, "USD", "USD", 0.5, 1.0, t)

    np.testing.assert_array_equal(rate("in_arrears_forward", 0.5), rate("forward_looking_forward", 0.5))
    np.testing.assert_allclose(rate("in_arrears_forward", 1.0), rate("backward_compounded", 1.0), rtol=1e-12)


def test_spot_rate_dates_must_be_observed(flat_result):
    with pytest.raises(ScheduleOffGrid):
        spot_rate_examples(flat_result, "forward_looking", "USD", "USD", 0.3, 1.0, 0.0)
    with pytest.raises(ValueError):
        spot_rate_examples(flat_result, "forward_looking", "USD", "USD", 1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        spot_rate_examples(flat_result, "swaption", "USD", "USD", 0.5, 1.0, 0.0)


def test_ibor_rate_carries_the_unsecured_spread(flat_result):
    expected = (np.exp(0.02) - 1.0) / 0.5
    fixed = spot_rate_examples(flat_result, "ibor", "USD", "USD", 0.5, 1.0, 0.5)
    np.testing.assert_allclose(fixed, expected, rtol=1e-12)
    forward = spot_rate_examples(flat_result, "ibor", "USD", "USD", 0.5, 1.0, 0.0)
    assert isinstance(forward, Estimate)
    assert forward.value == pytest.approx(expected, rel=1e-12)
    with pytest.raises(MissingState):
        spot_rate_examples(flat_result, "ibor", "USD", "USD", 0.5, 1.0, 0.25)


def test_commodity_average_forward():
    market = MarketModel(
        "USD", {"USD": currency("USD", 0.03)}, brownian(),
        indices={"WTI-AVG": IndexSpec("WTI-AVG", "commodity", "USD", "USD", commodity="WTI")},
        commodities={"WTI": CommoditySpec("WTI", "USD", 100.0, np.zeros(1))},
    )
    result = simulate(market, 1.0, 0.0625, 2, times=(0.5,))
    np.testing.assert_allclose(result.commodity("WTI", 1.0), 100.0 * np.exp(0.03), rtol=1e-12)
    forward = spot_rate_examples(result, "commodity", "USD", "USD", 0.5, 1.0, 0.0, market.indices["WTI-AVG"])
    expected = 100.0 * (np.exp(0.03) - np.exp(0.015)) / (0.03 * 0.5)
    assert forward.value == pytest.approx(expected, rel=1e-5)
    with pytest.raises(ValueError):
        spot_rate_examples(result, "commodity", "USD", "USD", 0.5, 1.0, 0.0)


def test_driver_dimension_for_spread_families():
    spec = family(0.0, (0.0, 0.0))
    assert SpreadVolatility(spec.volatility, VolatilitySpec.zero(2), VolatilitySpec.zero(2), 0.25, 0.0).dim == 2
    assert spec.label == "h[0.25,0,USD,USD]"
    assert spec.schedule(1.0).start == pytest.approx(0.75)
