import numpy as np
import pytest

from XCCY_HJM_Helper.curves import ForwardSurface, InitialCurve, VolatilitySpec
from XCCY_HJM_Helper.driver import DriverSpec, GaussianJumps, PiecewiseLoading, local_exponent
from XCCY_HJM_Helper.exceptions import AdmissibilityViolation
from XCCY_HJM_Helper.fx import (
    FxSpec, check_fx_admissibility, foreign_curve_driver, fx_evolve, fx_log_increment, quanto_drift_correction,
    reciprocal_rate,
)
from XCCY_HJM_Helper.market import MarketModel
from XCCY_HJM_Helper.measures import MeasureId

from conftest import brownian, currency, fx_pair, simulate

USD = MeasureId.spot("USD")


def test_quanto_correction_of_gaussian_driver():
    fxspec = fx_pair("EUR", 1.1, [0.1])
    correction = quanto_drift_correction(VolatilitySpec.constant([0.01]), brownian(), fxspec, 0.0, 1.0)
    assert correction == pytest.approx(-0.001, rel=1e-12)


def test_foreign_driver_drift_carries_the_quanto_shift():
    fxspec = fx_pair("EUR", 1.1, [0.1, 0.0])
    base = DriverSpec.constant(USD, [0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]])
    foreign = foreign_curve_driver(base, fxspec)
    assert foreign.measure == MeasureId.spot("EUR")
    np.testing.assert_allclose(foreign.regimes[0].drift, [0.1, 0.05])


def test_foreign_driver_without_fx_volatility_keeps_characteristics():
    base = brownian()
    foreign = foreign_curve_driver(base, fx_pair("EUR", 1.1))
    assert foreign.regimes == base.regimes
    assert foreign.measure.currency == "EUR"


def test_reciprocal_rate():
    np.testing.assert_allclose(reciprocal_rate([1.25, 0.5]), [0.8, 2.0])


def test_spot_must_be_positive():
    with pytest.raises(ValueError):
        FxSpec("USD", "EUR", 0.0, PiecewiseLoading.constant([0.1]))
    with pytest.raises(ValueError):
        FxSpec("USD", "USD", 1.0, PiecewiseLoading.constant([0.1]))


def test_log_increment_components():
    fxspec = fx_pair("EUR", 1.0, [0.2])
    dx = np.array([[0.1], [-0.1]])
    step = fx_log_increment(fxspec, brownian(), 0.0, 0.5, dx, 0.01, 0.002, 0.005)
    compensator = 0.5 * 0.2 ** 2 * 0.5
    np.testing.assert_allclose(step, 0.01 + 0.002 - 0.005 + np.array([0.02, -0.02]) - compensator)


def test_fx_evolve_one_step():
    pillars = np.array([0.0, 0.5, 1.0])
    usd = ForwardSurface.initial(InitialCurve.flat(0.02), pillars, 1)
    eur = ForwardSurface.initial(InitialCurve.flat(0.01), pillars, 1)
    fxspec = fx_pair("EUR", 1.25, [0.1])
    rate = fx_evolve(np.array([1.25]), fxspec, usd, eur, None, brownian(), np.array([[0.0]]), 0.5)
    np.testing.assert_allclose(rate, 1.25 * np.exp(0.005 - 0.5 * 0.01 * 0.5), rtol=1e-14)


def test_deterministic_fx_follows_the_rate_gap(deterministic_pair_market):
    result = simulate(deterministic_pair_market, 1.0, 0.25, 3, times=(0.5,))
    np.testing.assert_allclose(result.fx("EUR", 1.0), 1.25 * np.exp(0.01), rtol=1e-12)
    np.testing.assert_allclose(result.fx("EUR", 0.5), 1.25 * np.exp(0.005), rtol=1e-12)
    np.testing.assert_array_equal(result.fx("USD", 1.0), 1.0)


def test_fx_discounted_in_foreign_account_is_a_martingale(gaussian_pair_market):
    result = simulate(gaussian_pair_market, 2.0, 0.125, 4000, times=(1.0,))
    for t in (1.0, 2.0):
        values = result.fx("EUR", t) * np.exp(result.log_account("EUR", t) - result.log_coll_account("USD", "EUR", t))
        assert abs(values.mean() - 1.1) < 4 * values.std(ddof=1) / np.sqrt(values.size)


def test_admissibility_rejects_unbounded_tilt():
    driver = DriverSpec.constant(USD, [0.0], [[0.0]], [GaussianJumps(1.0, [1.0], 0.0, 1.0)])
    with pytest.raises(AdmissibilityViolation):
        check_fx_admissibility(fx_pair("EUR", 1.0, [20.0]), driver)


def test_admissibility_rejects_wrong_dimension():
    with pytest.raises(AdmissibilityViolation):
        check_fx_admissibility(fx_pair("EUR", 1.0, [0.1, 0.1]), brownian())


def test_market_surfaces_foreign_driver_failures():
    driver = DriverSpec.constant(USD, [0.0], [[0.0]], [GaussianJumps(1.0, [1.0], 0.0, 1.0)])
    market = MarketModel(
        "USD", {"USD": currency("USD", 0.01), "EUR": currency("EUR", 0.01)}, driver,
        fx={"EUR": fx_pair("EUR", 1.0, [20.0])},
    )
    with pytest.raises(AdmissibilityViolation):
        market.check_admissibility()


def test_fx_compensator_uses_the_base_exponent():
    fxspec = fx_pair("EUR", 1.0, [0.3])
    driver = DriverSpec.constant(USD, [0.0], [[1.0]], [GaussianJumps(2.0, [1.0], 0.0, 0.2)])
    step = fx_log_increment(fxspec, driver, 0.0, 1.0, np.zeros((1, 1)), 0.0, 0.0, 0.0)
    assert float(step[0]) == pytest.approx(-float(local_exponent(driver, 0.0, [0.3])))
