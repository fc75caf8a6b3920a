"""
Pricing of fully collateralized claims, zero-coupon bonds and cross-currency swaps.

Every value at t > 0 is reported as the base-measure mean of per-path values
(or per-path unbiased estimators) with its standard error; at t = 0 this is the
price itself.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad

from .config import Config
from .exceptions import DegenerateSensitivity, UncollateralizedUnsupported, XccyHjmError
from .indices import IndexSpec, forward_index_value, spot_rate_examples
from .measures import Estimate, expectation_under, rn_spot_foreign

logger = logging.getLogger(__name__)

_CONFIG = Config()

Amount = Union[float, Callable[[Any, float], np.ndarray]]


@dataclass(frozen=True)
class Payment:
    """One cash flow: `amount` units of `currency` paid at `time`; callables read the path state."""
    time: float
    amount: Amount
    currency: str


@dataclass(frozen=True)
class CashflowStream:
    """Cash flows of one claim and the currency its collateral is posted in (None: unsecured)."""
    payments: Tuple[Payment, ...]
    collateral: Optional[str]

    def __post_init__(self):
        object.__setattr__(self, "payments", tuple(sorted(self.payments, key=lambda p: p.time)))
        if any(p.time < 0 for p in self.payments):
            raise ValueError("Payment times must be >= 0")


def _amount(state: Any, payment: Payment) -> np.ndarray:
    if callable(payment.amount):
        return np.asarray(payment.amount(state, payment.time), dtype=float)
    return np.full(state.n_paths, float(payment.amount))


def _closed_form_payment(state: Any, payment: Payment, collateral: str, t: float) -> Optional[np.ndarray]:
    """Value at t of a constant payment whose discounting is a stored bond; None otherwise."""
    if callable(payment.amount):
        return None
    base, ccy = state.base_currency, payment.currency
    if ccy == base:
        return payment.amount * np.exp(state.log_bond(base, collateral, t, payment.time))
    if ccy == collateral:
        return payment.amount * state.fx(ccy, t) * np.exp(state.log_bond(ccy, ccy, t, payment.time))
    return None


def _payment_estimator(state: Any, payment: Payment, collateral: str, t: float) -> np.ndarray:
    """B^{c,k0,k3}_t X^{k0,k2}_T A / B^{c,k0,k3}_T per path."""
    base = state.base_currency
    log_discount = state.log_coll_account(base, collateral, t) - state.log_coll_account(base, collateral, payment.time)
    return np.exp(log_discount) * state.fx(payment.currency, payment.time) * _amount(state, payment)


def price_full_collateral(state: Any, stream: CashflowStream, t: float) -> Estimate:
    """
    Value in the base currency of a fully collateralized stream at t.

    Payments at or before t are excluded. Constant payments in the base or in the
    collateral currency are valued from stored bonds; all others by the pathwise
    estimator B^{c,k0,k3}_t X_T A_T / B^{c,k0,k3}_T.
    """
    if stream.collateral is None:
        raise UncollateralizedUnsupported("Claims without collateral are only priced through the unsecured ZCB")
    values = np.zeros(state.n_paths)
    for payment in stream.payments:
        if payment.time <= t + _CONFIG.GRID_TOLERANCE:
            continue
        closed = _closed_form_payment(state, payment, stream.collateral, t)
        values += closed if closed is not None else _payment_estimator(state, payment, stream.collateral, t)
    return expectation_under(values, paired=state.antithetic)


def claim_martingale_increments(state: Any, stream: CashflowStream, times: Sequence[float]) -> List[np.ndarray]:
    """
    Per-path increments of the discounted gains V_t / B^{c,k0,k3}_t + sum_{T_i <= t} X A / B^{c,k0,k3}.

    Every payment must have a closed form; each increment has mean zero.
    """
    if stream.collateral is None:
        raise UncollateralizedUnsupported("Discounted gains need a collateral account")
    base, collateral = state.base_currency, stream.collateral
    tol = _CONFIG.GRID_TOLERANCE

    def gains(s):
        log_account = state.log_coll_account(base, collateral, s)
        total = np.zeros(state.n_paths)
        for payment in stream.payments:
            if payment.time > s + tol:
                closed = _closed_form_payment(state, payment, collateral, s)
                if closed is None:
                    raise ValueError(f"Payment at {payment.time} in {payment.currency} has no closed form")
                total += closed * np.exp(-log_account)
            else:
                paid = state.log_coll_account(base, collateral, payment.time)
                total += state.fx(payment.currency, payment.time) * _amount(state, payment) * np.exp(-paid)
        return total

    levels = [gains(s) for s in times]
    return [later - earlier for earlier, later in zip(levels, levels[1:])]


class ZcbPrice(NamedTuple):
    """Primary value and the dual-formula value where one exists."""
    value: Estimate
    dual: Optional[Estimate]


def price_zcb(state: Any, case: str, currency: str, collateral: str, maturity: float, t: float) -> ZcbPrice:
    """
    Zero-coupon bond of `currency` collateralized in `collateral`.

    k0k0, k0k3 and unsecured values are in units of `currency`; the k2 cases are in base units.

    Cases:
        k0k0: B^{l,l}(t, T), dual E^{Q^l}[B^c_t / B^c_T] at t = 0
        k0k3: B^{l,k3}(t, T), dual E^{Q^l}[B^{c,l,k3}_t / B^{c,l,k3}_T] at t = 0
        k2k0: X_t B^{k2,k0}(t, T) by B^{c,k0}_t X_T / B^{c,k0}_T, dual under Q^{k2} at t = 0
        k2k2_dual: B^{c,k0,k2}_t X_T / B^{c,k0,k2}_T, dual X_t B^{k2,k2}(t, T) from the k2 curve
        unsecured: B^{l}(t, T) on the curve shifted by the unsecured spread
    """
    if case not in _CONFIG.ZCB_CASES:
        raise ValueError(f"Unknown ZCB case {case!r}, expected one of {_CONFIG.ZCB_CASES}")
    if maturity < t:
        raise ValueError(f"ZCB maturity {maturity} precedes t={t}")
    base, paired = state.base_currency, state.antithetic
    at_zero = t <= _CONFIG.GRID_TOLERANCE

    def mean(values, density=None):
        return expectation_under(values, density, paired=paired)

    if case in ("k0k0", "k0k3"):
        coll = currency if case == "k0k0" else collateral
        value = mean(np.exp(state.log_bond(currency, coll, t, maturity)))
        dual = None
        if at_zero:
            discount = np.exp(-state.log_coll_account(currency, coll, maturity))
            dual = mean(discount, rn_spot_foreign(state, base, currency, maturity))
        return ZcbPrice(value, dual)

    if case == "unsecured":
        shift = state.unsecured_integral(currency, t, maturity)
        value = mean(np.exp(state.log_bond(currency, currency, t, maturity) - shift))
        dual = None
        if at_zero:
            discount = np.exp(-state.log_account(currency, maturity) - state.unsecured_integral(currency, 0.0, maturity))
            dual = mean(discount, rn_spot_foreign(state, base, currency, maturity))
        return ZcbPrice(value, dual)

    if currency == base:
        raise ValueError(f"ZCB case {case} needs a foreign currency, got the base {base}")

    if case == "k2k0":
        log_discount = state.log_account(base, t) - state.log_account(base, maturity)
        value = mean(np.exp(log_discount) * state.fx(currency, maturity))
        dual = None
        if at_zero:
            # q^{k2,k0} = -q^{k0,k2}
            spread = state.log_coll_account(base, currency, maturity) - state.log_account(base, maturity)
            discount = np.exp(-state.log_account(currency, maturity) + spread)
            dual = mean(state.market.fx[currency].spot * discount, rn_spot_foreign(state, base, currency, maturity))
        return ZcbPrice(value, dual)

    log_discount = state.log_coll_account(base, currency, t) - state.log_coll_account(base, currency, maturity)
    value = mean(np.exp(log_discount) * state.fx(currency, maturity))
    dual = mean(state.fx(currency, t) * np.exp(state.log_bond(currency, currency, t, maturity)))
    return ZcbPrice(value, dual)


@dataclass(frozen=True)
class FallbackSpec:
    """Replacement of a discontinued index: `isda_compounded` adds `credit_spread` to the compounded collateral rate."""
    kind: str
    credit_spread: float = 0.0

    def __post_init__(self):
        if self.kind not in _CONFIG.FALLBACK_KINDS:
            raise ValueError(f"Unknown fallback {self.kind!r}, expected one of {_CONFIG.FALLBACK_KINDS}")
        if not np.isfinite(self.credit_spread):
            raise ValueError("Fallback credit spread must be finite")


@dataclass(frozen=True)
class LegSpec:
    """
    One swap leg with payment dates start + n * period.

    `index` names a registered index (None for a fixed leg paying `spread`).
    A resetting leg takes its notional from the other leg, converted at each period start.
    """
    currency: str
    notional: float
    period: float
    index: Optional[str] = None
    spread: float = 0.0
    fixing_adjustment: float = 0.0
    reset: bool = False
    fallback: Optional[FallbackSpec] = None

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"Leg period must be > 0, got {self.period}")
        if not 0.0 <= self.fixing_adjustment <= self.period:
            raise ValueError(f"Fixing adjustment {self.fixing_adjustment} outside [0, {self.period}]")

    def schedule(self, start: float, end: float) -> np.ndarray:
        """t_0 = start, ..., t_N = end."""
        count = int(round((end - start) / self.period))
        if count < 1 or abs(start + count * self.period - end) > _CONFIG.GRID_TOLERANCE * max(1.0, end):
            raise ValueError(f"Period {self.period} does not divide [{start}, {end}]")
        return start + self.period * np.arange(count + 1)

    def with_spread(self, spread: float) -> "LegSpec":
        return replace(self, spread=spread)


@dataclass(frozen=True)
class SwapSpec:
    """Two-leg cross-currency swap; `domestic` is in the base currency, `direction` is +1 or -1."""
    id: str
    kind: str
    direction: int
    collateral: str
    start: float
    end: float
    t: float
    domestic: LegSpec
    foreign: LegSpec
    fair_spread_leg: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _CONFIG.SWAP_KINDS:
            raise ValueError(f"Unknown swap kind {self.kind!r}")
        if self.direction not in (1, -1):
            raise ValueError(f"Direction must be +1 or -1, got {self.direction}")
        if not 0.0 <= self.start < self.end:
            raise ValueError(f"Swap needs 0 <= start < end, got [{self.start}, {self.end}]")
        if self.t > self.end:
            raise ValueError(f"Valuation time {self.t} after the swap end {self.end}")
        if self.fair_spread_leg not in (None, "domestic", "foreign"):
            raise ValueError(f"fair_spread_leg must be 'domestic' or 'foreign', got {self.fair_spread_leg!r}")
        if self.kind == "ccs" and (self.domestic.reset or self.foreign.reset):
            raise ValueError("Constant-notional swaps cannot carry a resetting leg")
        if self.kind == "mtmccs" and self.domestic.reset == self.foreign.reset:
            raise ValueError("A resetting swap needs exactly one resetting leg")

    def dates(self) -> Tuple[float, ...]:
        """Every date the legs read states at."""
        points = {self.t, self.start, self.end}
        for leg in (self.domestic, self.foreign):
            schedule = leg.schedule(self.start, self.end)
            points |= set(schedule.tolist())
            points |= {s + leg.fixing_adjustment for s in schedule[:-1]}
        return tuple(sorted(points))


def _bond(state: Any, leg: LegSpec, collateral: str, t: float, maturity: float) -> np.ndarray:
    return np.exp(state.log_bond(leg.currency, collateral, t, maturity))


def _pathwise_coupon(state: Any, currency: str, collateral: str, s: float, payment: float,
                     payoff: np.ndarray) -> np.ndarray:
    """Unbiased per-path estimator of E^{Q^l}[B^c_s / B^c_T payoff | G_s] from base-measure paths."""
    log_discount = state.log_coll_account(currency, collateral, s) - state.log_coll_account(currency, collateral, payment)
    value = np.exp(log_discount) * payoff
    base = state.base_currency
    if currency != base:
        value *= rn_spot_foreign(state, base, currency, payment) / rn_spot_foreign(state, base, currency, s)
    return value


def _effective_index(state: Any, leg: LegSpec) -> Tuple[Optional[IndexSpec], float]:
    """Index actually paid and the additive credit spread after a fallback."""
    if leg.index is None:
        return None, 0.0
    index = state.market.indices[leg.index]
    if leg.fallback is not None and leg.fallback.kind == "isda_compounded":
        compounded = IndexSpec(f"{leg.index}:fallback", "backward_compounded", leg.currency, leg.currency)
        return compounded, leg.fallback.credit_spread
    return index, 0.0


def _fixing(state: Any, index: IndexSpec, start: float, end: float) -> Tuple[float, Callable[[], np.ndarray]]:
    """Fixing time of the period's index and a reader of its realised value."""
    delta = end - start
    if index.kind == "backward_compounded":
        return end, lambda: spot_rate_examples(state, "backward_compounded", index.currency, index.collateral, start, end, end)
    if index.kind == "forward_looking":
        return start, lambda: spot_rate_examples(state, "forward_looking", index.currency, index.collateral, start, end, start)
    if index.kind == "ibor":
        return start, lambda: spot_rate_examples(state, "ibor", index.currency, index.collateral, start, end, start)
    if index.kind == "commodity":
        name = index.commodity
        return end, lambda: (state.commodity_integral(name, end) - state.commodity_integral(name, start)) / delta
    family = index.spread_family
    fixing = start + family.delta_f
    return fixing, lambda: forward_index_value(state, family, fixing, fixing)


def index_payoff_value(state: Any, leg: LegSpec, collateral: str, start: float, end: float, s: float) -> np.ndarray:
    """
    delta * E^{Q^l}[B^{c,l,k3}_s / B^{c,l,k3}_{t_n} I_n | G_s] per path for the period (start, end], s <= end.

    Closed forms: collateral-rate indices on the swap's collateral curve telescope to
    B(s, start) - B(s, end) before the period; abstract indices collateralized like the
    swap give delta I_s B(s, end); a fixed index gives delta I B(s, end). Otherwise the
    pathwise estimator is used.
    """
    index, credit_spread = _effective_index(state, leg)
    delta = end - start
    if index is None:
        return np.zeros(state.n_paths)
    tol = _CONFIG.GRID_TOLERANCE
    value = delta * credit_spread * _bond(state, leg, collateral, s, end) if credit_spread else 0.0

    same_curve = index.currency == leg.currency and index.collateral == collateral
    if same_curve and index.kind in ("backward_compounded", "forward_looking") and s <= start + tol:
        return value + _bond(state, leg, collateral, s, start) - _bond(state, leg, collateral, s, end)
    if same_curve and index.kind == "backward_compounded":
        realised = np.exp(state.log_coll_account(leg.currency, collateral, s)
                          - state.log_coll_account(leg.currency, collateral, start))
        return value + realised - _bond(state, leg, collateral, s, end)

    fixed_at, read = _fixing(state, index, start, end)
    if index.kind == "abstract" and s >= index.spread_family.delta_f - tol and (
            s >= fixed_at - tol or same_curve):
        forward = forward_index_value(state, index.spread_family, fixed_at, min(s, fixed_at))
        return value + delta * forward * _bond(state, leg, collateral, s, end)
    if s >= fixed_at - tol:
        return value + delta * read() * _bond(state, leg, collateral, s, end)
    return value + _pathwise_coupon(state, leg.currency, collateral, s, end, delta * read())


def ccs_leg_value(state: Any, leg: LegSpec, collateral: str, start: float, end: float, t: float) -> np.ndarray:
    """
    N (-B(t, tau_s) 1{t <= tau_s} + B(t, tau_e) + sum_n 1{t <= t_n} [delta_n (I_n + S_0) B(t, t_n)]).

    Per-path value in the leg currency; the index term is read through index_payoff_value.
    """
    tol = _CONFIG.GRID_TOLERANCE
    schedule = leg.schedule(start, end)
    total = _bond(state, leg, collateral, t, end)
    if t <= start + tol:
        total = total - _bond(state, leg, collateral, t, start)
    for period_start, period_end in zip(schedule[:-1], schedule[1:]):
        if t > period_end + tol:
            continue
        delta = period_end - period_start
        total = total + index_payoff_value(state, leg, collateral, period_start, period_end, t)
        total = total + delta * leg.spread * _bond(state, leg, collateral, t, period_end)
    return leg.notional * total


def _cross_rate(state: Any, leg: LegSpec, other: LegSpec, t: float) -> np.ndarray:
    """X^{l,kappa}_t, units of the leg currency per unit of the notional currency."""
    base = state.base_currency
    if leg.currency == base:
        return state.fx(other.currency, t)
    return 1.0 / state.fx(leg.currency, t)


def mtm_leg_value(state: Any, leg: LegSpec, other: LegSpec, collateral: str, start: float, end: float,
                  t: float) -> np.ndarray:
    """
    Resetting leg: N^kappa sum_n 1{t <= t_n} (E[B^c_t / B^c_{t_n} X_{t_{n-1}} (1 + delta (I + S_0))]
    - E[B^c_t / B^c_{t_{n-1}} X_{t_{n-1}}]).

    Periods starting after t are valued at their start and carried back with the
    pathwise estimator.
    """
    tol = _CONFIG.GRID_TOLERANCE
    schedule = leg.schedule(start, end)
    total = np.zeros(state.n_paths)
    for period_start, period_end in zip(schedule[:-1], schedule[1:]):
        if t > period_end + tol:
            continue
        delta = period_end - period_start
        if t >= period_start - tol:
            rate = _cross_rate(state, leg, other, period_start)
            coupon = (_bond(state, leg, collateral, t, period_end) * (1.0 + delta * leg.spread)
                      + index_payoff_value(state, leg, collateral, period_start, period_end, t))
            carried = np.exp(state.log_coll_account(leg.currency, collateral, t)
                             - state.log_coll_account(leg.currency, collateral, period_start))
            total += rate * (coupon - carried)
        else:
            rate = _cross_rate(state, leg, other, period_start)
            at_start = (_bond(state, leg, collateral, period_start, period_end) * (1.0 + delta * leg.spread)
                        + index_payoff_value(state, leg, collateral, period_start, period_end, period_start)
                        - 1.0)
            total += _pathwise_coupon(state, leg.currency, collateral, t, period_start, rate * at_start)
    return other.notional * total


def _leg_value(state: Any, spec: SwapSpec, leg: LegSpec, other: LegSpec, t: float) -> np.ndarray:
    if leg.reset:
        return mtm_leg_value(state, leg, other, spec.collateral, spec.start, spec.end, t)
    return ccs_leg_value(state, leg, spec.collateral, spec.start, spec.end, t)


def fallback_leg(state: Any, spec: SwapSpec, leg_name: str, fallback: FallbackSpec, t: Optional[float] = None) -> Estimate:
    """Value in the leg currency of one leg with its index replaced according to `fallback`."""
    leg = getattr(spec, leg_name)
    other = spec.foreign if leg_name == "domestic" else spec.domestic
    t = spec.t if t is None else t
    return expectation_under(_leg_value(state, spec, replace(leg, fallback=fallback), other, t), paired=state.antithetic)


class SwapLegs(NamedTuple):
    """Per-path contract value and both legs, the foreign one converted to base units."""
    value: np.ndarray
    domestic: np.ndarray
    foreign: np.ndarray


def swap_paths(state: Any, spec: SwapSpec, t: Optional[float] = None) -> SwapLegs:
    """phi (S^{k0}_t - X^{k0,k}_t S^k_t) per path."""
    t = spec.t if t is None else t
    if spec.domestic.currency != state.base_currency:
        raise ValueError(f"Domestic leg must be in {state.base_currency}, got {spec.domestic.currency}")
    domestic = _leg_value(state, spec, spec.domestic, spec.foreign, t)
    foreign = state.fx(spec.foreign.currency, t) * _leg_value(state, spec, spec.foreign, spec.domestic, t)
    return SwapLegs(spec.direction * (domestic - foreign), domestic, foreign)


def price_ccs(state: Any, spec: SwapSpec, t: Optional[float] = None) -> Tuple[Estimate, float, float]:
    """Contract value with the mean domestic leg and the mean converted foreign leg."""
    legs = swap_paths(state, spec, t)
    return expectation_under(legs.value, paired=state.antithetic), float(np.mean(legs.domestic)), float(np.mean(legs.foreign))


def price_mtmccs(state: Any, spec: SwapSpec, t: Optional[float] = None) -> Tuple[Estimate, float, float]:
    """Resetting swap; same decomposition as price_ccs."""
    if spec.kind != "mtmccs":
        raise ValueError(f"Swap {spec.id} is not a resetting swap")
    return price_ccs(state, spec, t)


def fair_spread(state: Any, spec: SwapSpec, leg_name: str) -> Estimate:
    """
    Spread on `leg_name` that sets the contract value at spec.t to zero.

    The value is affine in the spread; both evaluations share the same paths and
    the error follows from the delta method on the ratio of means.
    """
    leg = getattr(spec, leg_name)
    at_zero = replace(spec, **{leg_name: leg.with_spread(0.0)})
    at_one = replace(spec, **{leg_name: leg.with_spread(1.0)})
    intercept = swap_paths(state, at_zero).value
    slope = swap_paths(state, at_one).value - intercept

    mean_slope = float(np.mean(slope))
    scale = max(1.0, abs(leg.notional), float(np.mean(np.abs(slope))))
    if abs(mean_slope) <= _CONFIG.EXACT_TOLERANCE * scale:
        raise DegenerateSensitivity(f"Swap {spec.id}: value does not depend on the {leg_name} spread")
    spread = -float(np.mean(intercept)) / mean_slope
    residual = (intercept + spread * slope) / -mean_slope
    return Estimate(spread, expectation_under(residual, paired=state.antithetic).std_error)


def asymmetric_collateral_price(payments: Sequence[Tuple[float, float]], borrow_rate: float, lend_rate: float,
                                t: float = 0.0) -> float:
    """
    Fully collateralized value with deterministic rates and different borrowing and lending collateral rates.

    Between payments the value grows at the borrowing rate while positive and the
    lending rate while negative; each payment adds its amount. Solved exactly by
    backward recursion.
    """
    value = 0.0
    clock = None
    for time, amount in sorted(payments, key=lambda p: p[0], reverse=True):
        if time <= t:
            break
        if clock is not None:
            value = _discount_signed(value, borrow_rate, lend_rate, clock - time)
        value += amount
        clock = time
    if clock is None:
        return 0.0
    return _discount_signed(value, borrow_rate, lend_rate, clock - t)


def _discount_signed(value: float, borrow_rate: float, lend_rate: float, span: float) -> float:
    rate = borrow_rate if value >= 0 else lend_rate
    return value * np.exp(-rate * span)


def asymmetric_collateral_quadrature(payments: Sequence[Tuple[float, float]], borrow_rate: float, lend_rate: float,
                                     funding_rate: float, t: float = 0.0) -> Estimate:
    """
    General collateralized pricing formula by quadrature:
    B_t (sum A_i / B_{T_i} + int_t^T [(r - r^b) S^+ - (r - r^l) S^-] / B_s ds) with S = C the collateral.

    Returns the value with the quadrature's error estimate as standard error.
    """
    live = sorted((time, amount) for time, amount in payments if time > t)
    if not live:
        return Estimate(0.0, 0.0)

    def path_value(s):
        return asymmetric_collateral_price(live, borrow_rate, lend_rate, s)

    def integrand(s):
        value = path_value(s)
        spread = (funding_rate - borrow_rate) * max(value, 0.0) - (funding_rate - lend_rate) * max(-value, 0.0)
        return spread * np.exp(-funding_rate * (s - t))

    horizon = live[-1][0]
    points = [time for time, _ in live if t < time < horizon] or None
    integral, error = quad(integrand, t, horizon, points=points, limit=200)
    cash = sum(amount * np.exp(-funding_rate * (time - t)) for time, amount in live)
    return Estimate(float(cash + integral), float(max(error, 1e-9 * max(1.0, abs(cash)))))


@dataclass(frozen=True)
class ZcbRequest:
    id: str
    case: str
    currency: str
    collateral: str
    maturity: float
    t: float = 0.0


@dataclass(frozen=True)
class SpotRateRequest:
    id: str
    kind: str
    currency: str
    collateral: str
    start: float
    end: float
    t: float = 0.0
    index: Optional[str] = None


class PricingRow(NamedTuple):
    instrument_id: str
    t: float
    value: float
    std_error: float
    leg_k0: float
    leg_k: float
    fair_spread: float


def _price_zcb_row(state: Any, request: ZcbRequest) -> List[PricingRow]:
    price = price_zcb(state, request.case, request.currency, request.collateral, request.maturity, request.t)
    rows = [PricingRow(request.id, request.t, price.value.value, price.value.std_error, np.nan, np.nan, np.nan)]
    if price.dual is not None:
        rows.append(PricingRow(f"{request.id}:dual", request.t, price.dual.value, price.dual.std_error,
                               np.nan, np.nan, np.nan))
    return rows


def _price_swap_row(state: Any, spec: SwapSpec) -> List[PricingRow]:
    value, leg_k0, leg_k = price_ccs(state, spec)
    spread = np.nan
    rows = []
    if spec.fair_spread_leg:
        estimate = fair_spread(state, spec, spec.fair_spread_leg)
        spread = estimate.value
        rows.append(PricingRow(f"{spec.id}:fair_spread", spec.t, estimate.value, estimate.std_error,
                               np.nan, np.nan, estimate.value))
    rows.insert(0, PricingRow(spec.id, spec.t, value.value, value.std_error, leg_k0, leg_k, spread))
    return rows


def _price_spot_rate_row(state: Any, request: SpotRateRequest) -> List[PricingRow]:
    index = state.market.indices[request.index] if request.index else None
    result = spot_rate_examples(state, request.kind, request.currency, request.collateral,
                                request.start, request.end, request.t, index)
    estimate = result if isinstance(result, Estimate) else expectation_under(result, paired=state.antithetic)
    return [PricingRow(request.id, request.t, estimate.value, estimate.std_error, np.nan, np.nan, np.nan)]


def price_book(state: Any, zcbs: Sequence[ZcbRequest] = (), swaps: Sequence[SwapSpec] = (),
               spot_rates: Sequence[SpotRateRequest] = (), threads: int = 1) -> List[PricingRow]:
    """
    Price every requested instrument; rows keep the request order.

    Args:
        state: Simulation result
        zcbs: ZCB requests
        swaps: Swap definitions
        spot_rates: Spot rate and index forward requests
        threads: Worker threads across instruments

    Returns:
        Pricing rows, duals and fair spreads following their instrument
    """
    jobs = ([(_price_zcb_row, r) for r in zcbs] + [(_price_swap_row, s) for s in swaps]
            + [(_price_spot_rate_row, r) for r in spot_rates])

    def run(job):
        pricer, request = job
        try:
            return pricer(state, request)
        except XccyHjmError:
            raise
        except Exception as e:
            logger.error(f"Pricing {request.id} failed: {str(e)}")
            raise XccyHjmError(f"Pricing {request.id} failed: {str(e)}")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, jobs))
    rows = [row for group in results for row in group]
    logger.info(f"Priced {len(jobs)} instrument(s), {len(rows)} row(s)")
    return rows
