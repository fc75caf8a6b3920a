"""
Abstract index forwards, simple forward collateral rates and the multiplicative
forward-index-spread HJM model.

Functions taking `state` read a simulation result through its accessors
(log_bond, log_coll_account, spread_integral, ...); times must be observation times.
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional, Tuple, Union

import numpy as np

from .config import Config
from .curves import InitialCurve, VolatilitySpec
from .driver import DriverSpec, local_exponent, local_exponent_gradient
from .exceptions import BeforePeriodStart, MissingState, ScheduleOffGrid
from .measures import Estimate, MeasureId, density_process, expectation_under

logger = logging.getLogger(__name__)

_CONFIG = Config()


@dataclass(frozen=True)
class IndexSchedule:
    """Fixing T with period start T - delta_f and payment T + delta_p."""
    fixing: float
    delta_f: float
    delta_p: float = 0.0

    def __post_init__(self):
        if self.delta_f < 0 or self.delta_p < 0:
            raise ValueError(f"Adjustments must be >= 0, got delta_f={self.delta_f}, delta_p={self.delta_p}")
        if self.fixing < self.delta_f - _CONFIG.GRID_TOLERANCE:
            raise ValueError(f"Fixing {self.fixing} precedes delta_f={self.delta_f}")

    @property
    def start(self) -> float:
        return self.fixing - self.delta_f

    @property
    def payment(self) -> float:
        return self.fixing + self.delta_p

    @property
    def delta(self) -> float:
        return self.delta_f + self.delta_p

    def fixed_at_payment(self) -> "IndexSchedule":
        """Same period, fixing moved to the payment date."""
        return IndexSchedule(self.payment, self.delta, 0.0)


@dataclass(frozen=True, eq=False)
class SpreadFamilySpec:
    """One HJM family h^{delta_f, delta_p, base, collateral} with its free volatility."""
    delta_f: float
    delta_p: float
    base: str
    collateral: str
    initial_curve: InitialCurve
    volatility: VolatilitySpec

    @property
    def key(self) -> Tuple[float, float, str, str]:
        return (self.delta_f, self.delta_p, self.base, self.collateral)

    @property
    def label(self) -> str:
        return f"h[{self.delta_f:g},{self.delta_p:g},{self.base},{self.collateral}]"

    def schedule(self, fixing: float) -> IndexSchedule:
        return IndexSchedule(fixing, self.delta_f, self.delta_p)


@dataclass(frozen=True, eq=False)
class IndexSpec:
    """Index definition; `spread_family` is set for abstract indices, `commodity` for commodity ones."""
    name: str
    kind: str
    currency: str
    collateral: str
    fixing_adjustment: float = 0.0
    payment_adjustment: float = 0.0
    spread_family: Optional[SpreadFamilySpec] = None
    commodity: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _CONFIG.INDEX_KINDS:
            raise ValueError(f"Unknown index kind {self.kind!r}")
        if self.kind == "abstract" and self.spread_family is None:
            raise ValueError(f"Abstract index {self.name!r} needs a spread family")
        if self.kind == "commodity" and not self.commodity:
            raise ValueError(f"Commodity index {self.name!r} needs a commodity")


@dataclass(frozen=True, eq=False)
class SpreadVolatility:
    """
    Volatility of h: sigma^c + sigma^q of the collateral curve on u - t <= delta_p
    (when delta_p > 0), the family's free volatility beyond.
    """
    free: VolatilitySpec
    curve: VolatilitySpec
    basis: VolatilitySpec
    delta_f: float
    delta_p: float

    @property
    def delta(self) -> float:
        return self.delta_f + self.delta_p

    @property
    def dim(self) -> int:
        return self.free.dim

    def _collateral_sigma(self, t, maturity):
        return self.curve.sigma(t, maturity) + self.basis.sigma(t, maturity)

    def _collateral_integrated(self, t, maturity):
        return self.curve.integrated(t, maturity) + self.basis.integrated(t, maturity)

    def sigma(self, t: float, maturity):
        maturity = np.asarray(maturity, dtype=float)
        free = self.free.sigma(t, maturity)
        if self.delta_p <= 0:
            return free
        locked = (maturity - t <= self.delta_p + _CONFIG.GRID_TOLERANCE)[..., None]
        return np.where(locked, self._collateral_sigma(t, maturity), free)

    def integrated(self, t: float, maturity):
        maturity = np.asarray(maturity, dtype=float)
        if self.delta_p <= 0:
            return self.free.integrated(t, maturity)
        edge = np.minimum(maturity, t + self.delta_p)
        locked = self._collateral_integrated(t, edge)
        beyond = self.free.integrated(t, np.maximum(maturity, edge)) - self.free.integrated(t, edge)
        return locked + beyond

    def pre_fixing(self, t: float, maturity):
        """A_t(u) = Sigma^{c+q}_t(u - delta) while t < u - delta, else zero."""
        start = np.asarray(maturity, dtype=float) - self.delta
        active = (t < start)[..., None]
        return np.where(active, self._collateral_integrated(t, np.maximum(start, t)), 0.0)

    def pre_fixing_slope(self, t: float, maturity):
        start = np.asarray(maturity, dtype=float) - self.delta
        active = (t < start)[..., None]
        return np.where(active, self._collateral_sigma(t, np.maximum(start, t)), 0.0)


def spread_drift(spread_vol: SpreadVolatility, driver: DriverSpec, t: float, maturity):
    """
    alpha^h_t(u) = -(sigma^h + dA) . grad Psi(-Sigma^h - A) + dA . grad Psi(-A), vectorised over u.

    A is the integrated collateral volatility up to the period start u - delta,
    clamped at zero once t passes it.
    """
    sigma = spread_vol.sigma(t, maturity)
    big_h = spread_vol.integrated(t, maturity)
    big_a = spread_vol.pre_fixing(t, maturity)
    slope = spread_vol.pre_fixing_slope(t, maturity)
    joint = local_exponent_gradient(driver, t, -big_h - big_a)
    alone = local_exponent_gradient(driver, t, -big_a)
    return -np.sum((sigma + slope) * joint, axis=-1) + np.sum(slope * alone, axis=-1)


def integrated_spread_drift(spread_vol: SpreadVolatility, driver: DriverSpec, t: float, maturity):
    """int_t^u alpha^h_t(v) dv = Psi(-Sigma^h_t(u) - A_t(u)) - Psi(-A_t(u))."""
    big_h = spread_vol.integrated(t, maturity)
    big_a = spread_vol.pre_fixing(t, maturity)
    return local_exponent(driver, t, -big_h - big_a) - local_exponent(driver, t, -big_a)


def spread_drift_row(spread_vol: SpreadVolatility, driver: DriverSpec, t: float, pillars: np.ndarray) -> np.ndarray:
    live = pillars >= t - _CONFIG.GRID_TOLERANCE
    row = np.zeros(pillars.size)
    row[live] = spread_drift(spread_vol, driver, t, np.maximum(pillars[live], t))
    return row


def spread_load_row(spread_vol: SpreadVolatility, t: float, pillars: np.ndarray) -> np.ndarray:
    live = pillars >= t - _CONFIG.GRID_TOLERANCE
    row = np.zeros((pillars.size, spread_vol.dim))
    row[live] = spread_vol.sigma(t, np.maximum(pillars[live], t))
    return row


def _require_period(sched: IndexSchedule, t: float) -> None:
    if t < sched.delta_f - _CONFIG.GRID_TOLERANCE:
        raise BeforePeriodStart(f"t={t} precedes delta_f={sched.delta_f}")


def _bond_ratio(state: Any, base: str, collateral: str, t: float, near: float, far: float) -> np.ndarray:
    """B(t, near) / B(t, far)."""
    return np.exp(state.log_bond(base, collateral, t, near) - state.log_bond(base, collateral, t, far))


def _account_ratio(state: Any, base: str, collateral: str, later: float, earlier: float) -> np.ndarray:
    return np.exp(state.log_coll_account(base, collateral, later) - state.log_coll_account(base, collateral, earlier))


def simple_forward_collateral_rate(state: Any, sched: IndexSchedule, base: str, collateral: str,
                                   t: float, conditional: Optional[np.ndarray] = None) -> np.ndarray:
    """
    I^{D}_t(T - delta_f, T, T + delta_p) for the collateral curve (base, collateral).

    With delta_p = 0 all three regimes are closed form. With delta_p > 0 the
    pre-fixing regimes need E[exp(-int r) | G_t] over the split discount window,
    passed in as `conditional` (per path) by a nested simulation.

    Args:
        state: Simulation result
        sched: Index schedule
        base: Base currency of the collateral curve
        collateral: Collateral currency
        t: Evaluation time, >= delta_f
        conditional: Nested estimate of the conditional discount expectation

    Returns:
        Per-path rate values
    """
    _require_period(sched, t)
    if sched.delta_f <= 0:
        raise ValueError("The simple forward collateral rate needs delta_f > 0")
    start, fixing, payment = sched.start, sched.fixing, sched.payment
    tol = _CONFIG.GRID_TOLERANCE

    if t > fixing + tol:
        return (_account_ratio(state, base, collateral, fixing, start) - 1.0) / sched.delta_f

    if sched.delta_p <= 0:
        if t <= start + tol:
            return (_bond_ratio(state, base, collateral, t, start, fixing) - 1.0) / sched.delta_f
        realised = _account_ratio(state, base, collateral, t, start)
        return (realised * np.exp(-state.log_bond(base, collateral, t, fixing)) - 1.0) / sched.delta_f

    if conditional is None:
        raise MissingState(
            f"Rate with delta_p={sched.delta_p} at t={t} needs a nested conditional expectation"
        )
    inverse_bond = np.exp(-state.log_bond(base, collateral, t, payment))
    if t <= start + tol:
        return (inverse_bond * conditional - 1.0) / sched.delta_f
    realised = _account_ratio(state, base, collateral, t, start)
    return (realised * inverse_bond * conditional - 1.0) / sched.delta_f


def discount_index_value(state: Any, family: SpreadFamilySpec, fixing: float, t: float) -> np.ndarray:
    """I^D with fixing moved to the payment date, the denominator of the forward index spread."""
    return simple_forward_collateral_rate(
        state, family.schedule(fixing).fixed_at_payment(), family.base, family.collateral, t
    )


def forward_index_spread(state: Any, family: SpreadFamilySpec, fixing: float, t: float) -> np.ndarray:
    """S_t = exp(-int_{delta_f}^t h_s ds - int_t^{T + delta_p} h_t(u) du); constant after payment."""
    sched = family.schedule(fixing)
    _require_period(sched, t)
    t = min(t, sched.payment)
    return np.exp(-state.spread_integral(family.label, t) + state.spread_log_bond(family.label, t, sched.payment))


def forward_index_value(state: Any, family: SpreadFamilySpec, fixing: float, t: float) -> np.ndarray:
    """
    I_t = (S_t (1 + delta I^D_t) - 1) / delta, frozen at its fixing value after T.

    A schedule with delta = 0 is observed and paid at once; its value is the
    collateral short rate r^{c} + q at min(t, T).
    """
    sched = family.schedule(fixing)
    _require_period(sched, t)
    t = min(t, fixing)
    if sched.delta <= 0:
        return state.short_rate(family.base, family.collateral, t)
    spread = forward_index_spread(state, family, fixing, t)
    discount = discount_index_value(state, family, fixing, t)
    return (spread * (1.0 + sched.delta * discount) - 1.0) / sched.delta


def spread_explicit(state: Any, family: SpreadFamilySpec, fixing: float, t: float) -> np.ndarray:
    """Forward index spread from bonds, accounts and the index forward (three regimes)."""
    sched = family.schedule(fixing)
    _require_period(sched, t)
    if sched.delta <= 0:
        raise ValueError("Explicit spread needs delta > 0")
    base, collateral = family.base, family.collateral
    tol = _CONFIG.GRID_TOLERANCE
    t = min(t, sched.payment)
    index = forward_index_value(state, family, fixing, t)
    growth = 1.0 + sched.delta * index
    if t <= sched.start + tol:
        return growth * _bond_ratio(state, base, collateral, t, sched.payment, sched.start)
    discount_to_start = np.exp(
        state.log_coll_account(base, collateral, sched.start) - state.log_coll_account(base, collateral, t)
    )
    return growth * discount_to_start * np.exp(state.log_bond(base, collateral, t, sched.payment))


def _check_on_grid(state: Any, *times: float) -> None:
    for point in times:
        if not state.has_time(point):
            raise ScheduleOffGrid(f"Schedule date {point} is not an observation time")


def _forward_rate_between(state: Any, base: str, collateral: str, t: float, start: float, end: float) -> np.ndarray:
    return (_bond_ratio(state, base, collateral, t, start, end) - 1.0) / (end - start)


def spot_rate_examples(state: Any, kind: str, currency: str, collateral: str, start: float, end: float,
                       t: float, index: Optional[IndexSpec] = None) -> Union[np.ndarray, Estimate]:
    """
    Spot rates and forwards of the standard index kinds.

    Kinds:
        backward_compounded: R(T_{m-1}, T_m) from the collateral account, realised at T_m
        forward_looking: F(T_{m-1}, T_m) = (1 / B(T_{m-1}, T_m) - 1) / delta, fixed at T_{m-1}
        in_arrears_forward: R_m(t)
        forward_looking_forward: F_m(t)
        ibor: forward of the unsecured simple rate under Q^{T_m}
        commodity: forward of the delivery-period average under Q^{T_m}

    Returns:
        Per-path values, or an Estimate for the forwards computed by reweighting
    """
    if end <= start:
        raise ValueError(f"Period [{start}, {end}] is empty")
    delta = end - start
    _check_on_grid(state, start, end, t)
    tol = _CONFIG.GRID_TOLERANCE

    if kind == "backward_compounded":
        return (_account_ratio(state, currency, collateral, end, start) - 1.0) / delta
    if kind == "forward_looking":
        return _forward_rate_between(state, currency, collateral, start, start, end)
    if kind == "in_arrears_forward":
        if t <= start + tol:
            return _forward_rate_between(state, currency, collateral, t, start, end)
        point = min(t, end)
        realised = _account_ratio(state, currency, collateral, point, start)
        return (realised * np.exp(-state.log_bond(currency, collateral, point, end)) - 1.0) / delta
    if kind == "forward_looking_forward":
        point = min(t, start)
        return _forward_rate_between(state, currency, collateral, point, start, end)
    if kind == "ibor":
        fixing = _ibor_fixing(state, currency, collateral, start, end)
        return _forward_by_reweighting(state, fixing, currency, collateral, start, end, t)
    if kind == "commodity":
        if index is None or not index.commodity:
            raise ValueError("Commodity forward needs a commodity index")
        average = (state.commodity_integral(index.commodity, end)
                   - state.commodity_integral(index.commodity, start)) / delta
        return _forward_by_reweighting(state, average, currency, collateral, end, end, t)
    raise ValueError(f"Unknown spot rate kind {kind!r}")


def _ibor_fixing(state: Any, currency: str, collateral: str, start: float, end: float) -> np.ndarray:
    """Unsecured simple rate at the period start: bond on the curve shifted by q_bar."""
    log_bond = state.log_bond(currency, collateral, start, end) - state.unsecured_integral(currency, start, end)
    return (np.exp(-log_bond) - 1.0) / (end - start)


def _forward_by_reweighting(state: Any, fixing: np.ndarray, currency: str, collateral: str,
                            fixed_at: float, payment: float, t: float) -> Union[np.ndarray, Estimate]:
    """E^{Q^{payment}}[fixing | G_t]: pathwise once fixed, reweighted MC at t = 0."""
    if t >= fixed_at - _CONFIG.GRID_TOLERANCE:
        return fixing
    if t > _CONFIG.GRID_TOLERANCE:
        raise MissingState(f"Forward at 0 < t={t} < fixing {fixed_at} needs nested simulation")
    density = density_process(MeasureId.spot(state.base_currency), MeasureId.forward(payment, currency, collateral))
    return expectation_under(fixing, density(state, payment), paired=state.antithetic)
