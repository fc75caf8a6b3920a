"""
Shared builders for small markets and simulations.
"""

import numpy as np
import pytest

from XCCY_HJM_Helper.basis import BasisSpec
from XCCY_HJM_Helper.curves import InitialCurve, VolatilitySpec
from XCCY_HJM_Helper.driver import DriverSpec, PiecewiseLoading
from XCCY_HJM_Helper.engine import SimulationConfig, run_simulation
from XCCY_HJM_Helper.fx import FxSpec
from XCCY_HJM_Helper.market import CurrencySpec, MarketModel
from XCCY_HJM_Helper.measures import MeasureId


def brownian(dim: int = 1, base: str = "USD") -> DriverSpec:
    return DriverSpec.constant(MeasureId.spot(base), np.zeros(dim), np.eye(dim))


def currency(code: str, rate: float, loading=(0.0,), unsecured: float = 0.0,
             vol: VolatilitySpec = None) -> CurrencySpec:
    return CurrencySpec(
        code,
        InitialCurve.flat(rate),
        vol if vol is not None else VolatilitySpec.constant(loading),
        InitialCurve.flat(unsecured),
    )


def fx_pair(ccy: str, spot: float, loading=(0.0,), base: str = "USD") -> FxSpec:
    return FxSpec(base, ccy, spot, PiecewiseLoading.constant(loading))


def basis_pair(base: str, collateral: str, rate: float, loading=(0.0,)) -> BasisSpec:
    return BasisSpec(base, collateral, InitialCurve.flat(rate), VolatilitySpec.constant(loading))


def simulate(market: MarketModel, horizon: float, dt: float, paths: int, times=(), seed: int = 11,
             antithetic: bool = False, chunk_size: int = 5000, threads: int = 1):
    """Run the engine with observation times `times` plus 0 and the horizon."""
    observation = tuple(sorted(set(times) | {0.0, float(horizon)}))
    config = SimulationConfig(
        horizon=horizon, dt=dt, paths=paths, seed=seed, antithetic=antithetic,
        chunk_size=chunk_size, observation_times=observation, threads=threads,
    )
    return run_simulation(market, config)


@pytest.fixture
def flat_usd_market():
    """One currency, flat 3 %, no volatility, 1 % unsecured spread."""
    return MarketModel("USD", {"USD": currency("USD", 0.03, unsecured=0.01)}, brownian())


@pytest.fixture
def deterministic_pair_market():
    """USD 2 %, EUR 1 %, EURUSD 1.25 without FX volatility or basis."""
    return MarketModel(
        "USD",
        {"USD": currency("USD", 0.02), "EUR": currency("EUR", 0.01)},
        brownian(),
        fx={"EUR": fx_pair("EUR", 1.25)},
    )


@pytest.fixture
def gaussian_pair_market():
    """Two stochastic curves, a stochastic basis and a volatile FX rate on a 3-factor Brownian driver."""
    return MarketModel(
        "USD",
        {
            "USD": currency("USD", 0.03, (0.008, 0.0, 0.0)),
            "EUR": currency("EUR", 0.015, vol=VolatilitySpec.exponential((0.0, 0.009, 0.0), 0.1)),
        },
        brownian(3),
        basis={("USD", "EUR"): basis_pair("USD", "EUR", 0.002, (0.0, 0.0, 0.003))},
        fx={"EUR": fx_pair("EUR", 1.1, (0.03, -0.02, 0.08))},
    )
