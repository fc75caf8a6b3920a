"""
Cross-currency basis spreads q^{k0,k3}, spread bonds and foreign-collateral curves.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .config import Config
from .curves import ForwardSurface, InitialCurve, VolatilitySpec, bond_price, surface_integral
from .driver import DriverSpec, local_exponent, local_exponent_gradient
from .exceptions import MissingState, ReversedInterval

logger = logging.getLogger(__name__)

_CONFIG = Config()


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Initial basis curve and volatility of the ordered pair (base, collateral)."""
    base: str
    collateral: str
    initial_curve: InitialCurve
    volatility: VolatilitySpec

    @property
    def is_trivial(self) -> bool:
        return self.base == self.collateral

    @property
    def key(self):
        return (self.base, self.collateral)

    def negated(self) -> "BasisSpec":
        """The reverse pair, q^{collateral,base} = -q^{base,collateral}."""
        return BasisSpec(
            self.collateral, self.base,
            replace(self.initial_curve, values=-self.initial_curve.values),
            replace(self.volatility, loading=-self.volatility.loading),
        )


def combined_basis(base: str, collateral: str, parts: Sequence[BasisSpec]) -> BasisSpec:
    """
    Spec of q^{base,collateral} written as the sum of `parts`.

    Curves add exactly; volatilities add when at most one part is stochastic or
    all share one family and shape.
    """
    curve = InitialCurve.flat(0.0)
    stochastic = [part.volatility for part in parts if not part.volatility.is_zero]
    for part in parts:
        pillars = np.union1d(curve.pillars, part.initial_curve.pillars)
        curve = InitialCurve(pillars, curve.forward(pillars) + part.initial_curve.forward(pillars))

    if not stochastic:
        dim = parts[0].volatility.dim if parts else 0
        return BasisSpec(base, collateral, curve, VolatilitySpec.zero(dim))
    first = stochastic[0]
    for vol in stochastic[1:]:
        if (vol.family, vol.mean_reversion, vol.breakpoints, vol.levels) != (
                first.family, first.mean_reversion, first.breakpoints, first.levels):
            raise ValueError(f"Basis {base}/{collateral}: {first.family} and {vol.family} volatilities do not combine")
    loading = np.sum([vol.loading for vol in stochastic], axis=0)
    return BasisSpec(base, collateral, curve, replace(first, loading=loading))


@dataclass(eq=False)
class BasisSurface(ForwardSurface):
    """Simulated q_t(T) of one pair; `integral` is int q ds."""
    base: str = ""
    collateral: str = ""

    @classmethod
    def from_spec(cls, spec: BasisSpec, pillars, n_paths: int) -> "BasisSurface":
        surface = ForwardSurface.initial(spec.initial_curve, pillars, n_paths, f"q[{spec.base},{spec.collateral}]")
        return cls(surface.pillars, surface.values, surface.integral, 0, 0.0, surface.label, spec.base, spec.collateral)

    @property
    def is_trivial(self) -> bool:
        return self.base == self.collateral


def basis_drift(vol_c: VolatilitySpec, vol_q: VolatilitySpec, driver: DriverSpec, t: float, maturity):
    """alpha^q_t(T) = -(sigma^c + sigma^q) . grad Psi(-Sigma^c - Sigma^q) + sigma^c . grad Psi(-Sigma^c)."""
    sigma_c = vol_c.sigma(t, maturity)
    sigma_q = vol_q.sigma(t, maturity)
    big_c = vol_c.integrated(t, maturity)
    big_q = vol_q.integrated(t, maturity)
    joint = local_exponent_gradient(driver, t, -big_c - big_q)
    alone = local_exponent_gradient(driver, t, -big_c)
    return -np.sum((sigma_c + sigma_q) * joint, axis=-1) + np.sum(sigma_c * alone, axis=-1)


def integrated_basis_drift(vol_c: VolatilitySpec, vol_q: VolatilitySpec, driver: DriverSpec, t: float, maturity):
    """int_t^T alpha^q_t(u) du = Psi(-Sigma^c - Sigma^q) - Psi(-Sigma^c)."""
    big_c = vol_c.integrated(t, maturity)
    big_q = vol_q.integrated(t, maturity)
    return local_exponent(driver, t, -big_c - big_q) - local_exponent(driver, t, -big_c)


def basis_drift_row(vol_c: VolatilitySpec, vol_q: VolatilitySpec, driver: DriverSpec,
                    t: float, pillars: np.ndarray) -> np.ndarray:
    live = pillars >= t - _CONFIG.GRID_TOLERANCE
    row = np.zeros(pillars.size)
    if not vol_q.is_zero:
        row[live] = basis_drift(vol_c, vol_q, driver, t, np.maximum(pillars[live], t))
    return row


def spread_bond(surface: Optional[BasisSurface], t: float, maturity: float, n_paths: Optional[int] = None) -> np.ndarray:
    """Q^{k0,k3}(t, T) = exp(-int_t^T q_t(u) du); identically one for a trivial pair."""
    if maturity < t:
        raise ReversedInterval(f"Spread bond maturity {maturity} before t={t}")
    if surface is None or surface.is_trivial:
        if n_paths is None:
            raise MissingState("Path count needed for a trivial spread bond")
        return np.ones(n_paths)
    if abs(t - surface.t) > _CONFIG.GRID_TOLERANCE:
        raise MissingState(f"{surface.label}: surface is at t={surface.t}, spread bond requested at t={t}")
    if maturity - t <= _CONFIG.GRID_TOLERANCE:
        return np.ones(surface.n_paths)
    return np.exp(-surface_integral(surface, [maturity])[:, 0])


def foreign_coll_bond(curve: ForwardSurface, basis: Optional[BasisSurface], t: float, maturity: float) -> np.ndarray:
    """B^{k0,k3}(t, T) = B^{k0,k0}(t, T) Q^{k0,k3}(t, T)."""
    return bond_price(curve, t, maturity) * spread_bond(basis, t, maturity, curve.n_paths)


def coll_account(curve: ForwardSurface, basis: Optional[BasisSurface], t: float) -> np.ndarray:
    """B^{c,k0,k3}_t = exp(int_0^t (r^{c,k0} + q^{k0,k3}) ds)."""
    if abs(t - curve.t) > _CONFIG.GRID_TOLERANCE:
        raise MissingState(f"{curve.label}: surface is at t={curve.t}, account requested at t={t}")
    log_account = curve.integral.copy()
    if basis is not None and not basis.is_trivial:
        log_account += basis.integral
    return np.exp(log_account)
