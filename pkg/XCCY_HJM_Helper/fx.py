"""
FX rates against the base currency and the quanto change of measure for foreign curves.

X^{k0,k}_t = X_0 B^{c,k0}_t Q^{k0,k}_t / B^{c,k}_t * exp(int sigma^X dX - int Psi(sigma^X) ds),
simulated exactly in log space given the accounts.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import BasisSurface
from .curves import ForwardSurface, VolatilitySpec, step_accrual
from .driver import (
    DriverSpec, PiecewiseLoading, girsanov_transform, loaded_increment, local_exponent, local_exponent_gradient,
)
from .exceptions import AdmissibilityViolation, ExponentialMomentUnbounded
from .measures import MeasureId

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FxSpec:
    """X^{base,currency}: units of `base` per unit of `currency`."""
    base: str
    currency: str
    spot: float
    volatility: PiecewiseLoading

    def __post_init__(self):
        if not self.spot > 0:
            raise ValueError(f"FX spot {self.base}/{self.currency} must be > 0, got {self.spot}")
        if self.base == self.currency:
            raise ValueError(f"FX pair needs two currencies, got {self.base}/{self.currency}")

    @property
    def label(self) -> str:
        return f"{self.base}{self.currency}"


def reciprocal_rate(rate):
    """X^{k,k0} := 1 / X^{k0,k}."""
    return 1.0 / np.asarray(rate, dtype=float)


def check_fx_admissibility(fxspec: FxSpec, driver: DriverSpec) -> None:
    """The FX exponential must be a true martingale: Psi(sigma^X) finite and tilts bounded."""
    if fxspec.volatility.dim != driver.dim:
        raise AdmissibilityViolation(
            f"FX {fxspec.label}: loading dimension {fxspec.volatility.dim} differs from driver dimension {driver.dim}"
        )
    try:
        for start in sorted(set(driver.starts) | set(fxspec.volatility.starts)):
            local_exponent(driver, start, fxspec.volatility.at(start))
        girsanov_transform(driver, fxspec.volatility, MeasureId.spot(fxspec.currency))
    except ExponentialMomentUnbounded as e:
        raise AdmissibilityViolation(f"FX {fxspec.label}: {str(e)}")


def fx_log_increment(fxspec: FxSpec, driver: DriverSpec, t: float, dt: float, dx: np.ndarray,
                     accrual_base, accrual_basis, accrual_foreign) -> np.ndarray:
    """
    log X_{t+dt} - log X_t.

    Args:
        fxspec: FX pair specification
        driver: Base-measure driver
        t: Step start
        dt: Step length
        dx: Driver increments under the base measure, shape (n_paths, d)
        accrual_base: Log growth of B^{c,k0} over the step
        accrual_basis: Log growth of Q^{k0,k} over the step
        accrual_foreign: Log growth of B^{c,k} over the step

    Returns:
        Per-path log increment
    """
    sigma = fxspec.volatility.at(t)
    compensator = float(local_exponent(driver, t, sigma)) * dt
    return accrual_base + accrual_basis - accrual_foreign + loaded_increment(dx, sigma) - compensator


def fx_evolve(rate: np.ndarray, fxspec: FxSpec, curve_base: ForwardSurface, curve_foreign: ForwardSurface,
              basis: Optional[BasisSurface], driver: DriverSpec, dx: np.ndarray, dt: float) -> np.ndarray:
    """Advance X from the surfaces' current time t to t + dt; surfaces must still sit at t."""
    t = curve_base.t
    accrual_basis = 0.0 if basis is None or basis.is_trivial else step_accrual(basis, dt)
    log_step = fx_log_increment(
        fxspec, driver, t, dt, dx,
        step_accrual(curve_base, dt), accrual_basis, step_accrual(curve_foreign, dt),
    )
    return np.asarray(rate) * np.exp(log_step)


def foreign_curve_driver(driver_base: DriverSpec, fxspec: FxSpec) -> DriverSpec:
    """
    Characteristics of X under Q^k.

    Curves of currency k have their drift condition under Q^k; evaluated with this
    driver and fed base-measure increments, they carry the quanto adjustment.
    """
    if fxspec.volatility.is_zero:
        return DriverSpec(MeasureId.spot(fxspec.currency), driver_base.regimes, driver_base.starts)
    return girsanov_transform(driver_base, fxspec.volatility, MeasureId.spot(fxspec.currency))


def quanto_drift_correction(vol_k: VolatilitySpec, driver_base: DriverSpec, fxspec: FxSpec,
                            t: float, maturity: float) -> float:
    """-sigma^{c,k}_t(T) . (c sigma^X + int xi (e^{sigma^X . xi} - 1) K(dxi))."""
    sigma_x = fxspec.volatility.at(t)
    shift = local_exponent_gradient(driver_base, t, sigma_x) - local_exponent_gradient(driver_base, t, np.zeros_like(sigma_x))
    return float(-vol_k.sigma(t, maturity) @ shift)
