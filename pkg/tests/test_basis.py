import numpy as np
import pytest

from XCCY_HJM_Helper.basis import (
    BasisSpec, BasisSurface, basis_drift, basis_drift_row, coll_account, combined_basis, foreign_coll_bond,
    integrated_basis_drift, spread_bond,
)
from XCCY_HJM_Helper.curves import ForwardSurface, InitialCurve, VolatilitySpec, advance_surface
from XCCY_HJM_Helper.driver import DriverSpec, GaussianJumps
from XCCY_HJM_Helper.exceptions import MissingState, ReversedInterval
from XCCY_HJM_Helper.measures import MeasureId

BROWNIAN = DriverSpec.constant(MeasureId.spot("USD"), [0.0], [[1.0]])
PILLARS = np.arange(6, dtype=float)


def flat_basis(rate, loading=0.0):
    return BasisSpec("USD", "EUR", InitialCurve.flat(rate), VolatilitySpec.constant([loading]))


def test_basis_drift_with_gaussian_driver():
    vol = VolatilitySpec.constant([0.01])
    assert float(basis_drift(vol, vol, BROWNIAN, 0.0, 1.0)) == pytest.approx(3e-4, rel=1e-12)


def test_basis_drift_vanishes_without_basis_volatility():
    vol_c = VolatilitySpec.constant([0.01])
    row = basis_drift_row(vol_c, VolatilitySpec.zero(1), BROWNIAN, 0.0, PILLARS)
    np.testing.assert_array_equal(row, 0.0)


def test_integrated_basis_drift_is_consistent_with_the_drift():
    driver = DriverSpec.constant(MeasureId.spot("USD"), [0.0, 0.01], np.diag([1.0, 0.3]),
                                 [GaussianJumps(0.8, [0.2, 0.1], 0.05, 0.4)])
    vol_c = VolatilitySpec.exponential([0.01, 0.005], 0.3)
    vol_q = VolatilitySpec.constant([0.0, 0.004])
    maturity, h = 2.5, 1e-5
    numeric = (integrated_basis_drift(vol_c, vol_q, driver, 0.5, maturity + h)
               - integrated_basis_drift(vol_c, vol_q, driver, 0.5, maturity - h)) / (2 * h)
    assert float(basis_drift(vol_c, vol_q, driver, 0.5, maturity)) == pytest.approx(float(numeric), rel=1e-6)


def test_flat_spread_bond():
    surface = BasisSurface.from_spec(flat_basis(0.002), PILLARS, 3)
    np.testing.assert_allclose(spread_bond(surface, 0.0, 5.0), np.exp(-0.01), rtol=1e-14)
    np.testing.assert_array_equal(spread_bond(surface, 0.0, 0.0), 1.0)


def test_trivial_spread_bond_is_one():
    np.testing.assert_array_equal(spread_bond(None, 0.0, 3.0, n_paths=4), np.ones(4))
    with pytest.raises(MissingState):
        spread_bond(None, 0.0, 3.0)
    with pytest.raises(ReversedInterval):
        spread_bond(None, 2.0, 1.0, n_paths=1)


def test_same_currency_pair_is_trivial():
    spec = BasisSpec("USD", "USD", InitialCurve.flat(0.01), VolatilitySpec.zero(1))
    assert spec.is_trivial
    assert not flat_basis(0.0).is_trivial
    assert flat_basis(0.0).key == ("USD", "EUR")


def test_foreign_collateral_bond_and_account():
    curve = ForwardSurface.initial(InitialCurve.flat(0.03), PILLARS, 2)
    basis = BasisSurface.from_spec(flat_basis(0.002), PILLARS, 2)
    np.testing.assert_allclose(foreign_coll_bond(curve, basis, 0.0, 5.0), np.exp(-0.16), rtol=1e-14)
    for surface in (curve, basis):
        advance_surface(surface, np.zeros(6), np.zeros((6, 1)), np.zeros((2, 1)), 1.0)
    np.testing.assert_allclose(coll_account(curve, basis, 1.0), np.exp(0.032), rtol=1e-14)
    np.testing.assert_allclose(foreign_coll_bond(curve, basis, 1.0, 5.0), np.exp(-0.128), rtol=1e-14)
    with pytest.raises(MissingState):
        coll_account(curve, basis, 0.0)


def test_negated_pair_swaps_the_currencies():
    reverse = flat_basis(0.01, 0.002).negated()
    assert reverse.key == ("EUR", "USD")
    assert reverse.initial_curve.integral(0.0, 2.0) == pytest.approx(-0.02, rel=1e-14)
    np.testing.assert_array_equal(reverse.volatility.loading, [-0.002])


def test_combined_curves_add_on_every_pillar():
    sloped = BasisSpec("USD", "GBP", InitialCurve([0.0, 1.0, 3.0], [0.0, 0.01, 0.02]), VolatilitySpec.zero(1))
    cross = combined_basis("EUR", "GBP", [sloped, flat_basis(0.004).negated()])
    assert cross.key == ("EUR", "GBP")
    np.testing.assert_allclose(cross.initial_curve.forward([0.0, 0.5, 2.0, 4.0]), [-0.004, 0.001, 0.011, 0.016])
    assert cross.volatility.is_zero


def test_combined_volatilities_need_one_family():
    first = BasisSpec("USD", "GBP", InitialCurve.flat(0.0), VolatilitySpec.constant([0.003]))
    cross = combined_basis("EUR", "GBP", [first, flat_basis(0.0, 0.001).negated()])
    np.testing.assert_allclose(cross.volatility.loading, [0.002])
    reverting = BasisSpec("USD", "GBP", InitialCurve.flat(0.0), VolatilitySpec.exponential([0.003], 0.1))
    with pytest.raises(ValueError):
        combined_basis("EUR", "GBP", [reverting, flat_basis(0.0, 0.001).negated()])
