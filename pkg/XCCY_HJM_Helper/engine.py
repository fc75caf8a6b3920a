"""
Simulation engine for XCCY HJM Helper package.

Builds the time grid, simulates every curve, basis, spread, FX and commodity
state path by path in parallel chunks, keeps the states at the observation
times, and runs the martingale diagnostics and the Gaussian HJM oracle.
"""

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import TYPE_CHECKING, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad

from .basis import BasisSurface, basis_drift_row, integrated_basis_drift
from .config import Config
from .curves import (
    ForwardSurface, advance_surface, drift_row, integrated_drift, load_row, step_accrual, surface_integral,
)
from .driver import IncrementSampler, loaded_increment, local_exponent
from .exceptions import (
    EmptyGrid, MissingState, ReversedInterval, SimulationError, XccyHjmError,
)
from .fx import fx_log_increment
from .indices import (
    forward_index_spread, forward_index_value, simple_forward_collateral_rate,
    spread_drift_row, spread_load_row,
)
from .measures import Estimate, MeasureId, density_process, expectation_under, rn_spot_foreign
from .pricing import (
    CashflowStream, Payment, asymmetric_collateral_price, asymmetric_collateral_quadrature,
    claim_martingale_increments, price_zcb,
)

if TYPE_CHECKING:
    from .market import MarketModel

logger = logging.getLogger(__name__)

_CONFIG = Config()


def default_threads() -> int:
    """Thread count from the environment, one when unset."""
    raw = os.environ.get(_CONFIG.THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw)) if raw.strip() else 1
    except ValueError:
        logger.warning(f"Ignoring non-integer {_CONFIG.THREADS_ENV_VAR}={raw!r}")
        return 1


@dataclass(frozen=True)
class SimulationConfig:
    """Grid, path count, seed and parallel layout of one run."""
    horizon: float
    dt: float = _CONFIG.DEFAULT_DT
    paths: int = _CONFIG.DEFAULT_PATHS
    seed: int = _CONFIG.DEFAULT_SEED
    scheme: str = "euler"
    chunk_size: int = _CONFIG.DEFAULT_CHUNK_SIZE
    antithetic: bool = False
    observation_times: Tuple[float, ...] = ()
    threads: int = 1
    # Added to every curve drift; a mutation hook for the verification suite
    drift_bias: float = 0.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"Horizon must be > 0, got {self.horizon}")
        if not self.dt > 0:
            raise ValueError(f"Step dt must be > 0, got {self.dt}")
        if self.paths < 2:
            raise ValueError(f"At least two paths are needed, got {self.paths}")
        if self.scheme not in _CONFIG.SCHEMES:
            raise ValueError(f"Unknown scheme {self.scheme!r}, expected one of {_CONFIG.SCHEMES}")
        if self.chunk_size < 1 or self.threads < 1:
            raise ValueError("Chunk size and thread count must be >= 1")
        if self.antithetic and (self.paths % 2 or self.chunk_size % 2):
            raise ValueError("Antithetic sampling needs even path count and chunk size")
        object.__setattr__(self, "observation_times", tuple(sorted(float(t) for t in self.observation_times)))

    def config_hash(self, market_hash: str = "") -> str:
        """Hash of everything the paths depend on; the parallel layout is left out."""
        settings = {k: v for k, v in asdict(self).items() if k not in ("threads", "chunk_size")}
        payload = json.dumps({"simulation": settings, "market": market_hash}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_time_grid(horizon: float, dt: float, dates: Sequence[float] = ()) -> np.ndarray:
    """
    Regular grid of step dt on [0, horizon] merged with the given dates.

    Dates are kept exactly; regular points closer than the grid tolerance to a
    date are dropped.
    """
    if not horizon > 0 or not dt > 0:
        raise EmptyGrid(f"Grid needs horizon > 0 and dt > 0, got horizon={horizon}, dt={dt}")
    tol = _CONFIG.GRID_TOLERANCE
    dates = np.asarray([d for d in dates if -tol <= d <= horizon + tol], dtype=float)
    anchors = np.unique(np.clip(np.concatenate([[0.0, float(horizon)], dates]), 0.0, horizon))

    count = int(np.floor(horizon / dt + tol))
    regular = np.arange(count + 1) * dt
    distance = np.min(np.abs(regular[:, None] - anchors[None, :]), axis=1)
    points = np.sort(np.concatenate([anchors, regular[distance > tol]]))
    grid = points[np.concatenate([[True], np.diff(points) > tol])]
    if grid.size < 2:
        raise EmptyGrid("Time grid collapsed to a single point")
    return grid


def _grid_index(grid: np.ndarray, t: float) -> int:
    index = int(np.argmin(np.abs(grid - t)))
    if abs(grid[index] - t) > _CONFIG.GRID_TOLERANCE:
        raise MissingState(f"t={t} is not a grid point")
    return index


@dataclass
class _StepPlan:
    """Deterministic per-step drift and loading rows shared by every path."""
    t: float
    dt: float
    curve_rows: Dict[str, Tuple[np.ndarray, np.ndarray]]
    basis_rows: Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray]]
    spread_rows: Dict[str, Tuple[np.ndarray, np.ndarray]]
    commodity_terms: Dict[str, Tuple[np.ndarray, float]]


def _build_plan(market: "MarketModel", grid: np.ndarray, drift_bias: float = 0.0) -> List[_StepPlan]:
    plan = []
    for t, dt in zip(grid[:-1], np.diff(grid)):
        live = (grid >= t - _CONFIG.GRID_TOLERANCE).astype(float)
        curve_rows = {}
        for ccy, spec in market.currencies.items():
            driver = market.currency_driver(ccy)
            drift = drift_row(spec.volatility, driver, t, grid) + drift_bias * live
            curve_rows[ccy] = (drift, load_row(spec.volatility, t, grid))

        basis_rows = {}
        for key, spec in market.basis.items():
            if spec.is_trivial:
                continue
            driver = market.currency_driver(spec.base)
            vol_c = market.currencies[spec.base].volatility
            basis_rows[key] = (
                basis_drift_row(vol_c, spec.volatility, driver, t, grid),
                load_row(spec.volatility, t, grid),
            )

        spread_rows = {}
        for family in market.spread_families:
            spread_vol = market.spread_volatility(family)
            driver = market.currency_driver(family.base)
            spread_rows[family.label] = (
                spread_drift_row(spread_vol, driver, t, grid),
                spread_load_row(spread_vol, t, grid),
            )

        commodity_terms = {}
        for name, spec in market.commodities.items():
            compensator = float(local_exponent(market.currency_driver(spec.currency), t, spec.loading))
            commodity_terms[name] = (spec.loading, -(spec.convenience_yield + compensator) * dt)

        plan.append(_StepPlan(float(t), float(dt), curve_rows, basis_rows, spread_rows, commodity_terms))
    return plan


class _PathBatch:
    """Every simulated state of a block of paths, advanced one grid step at a time."""

    def __init__(self, market: "MarketModel", grid: np.ndarray, n_paths: int):
        self.market = market
        self.curves = {
            ccy: ForwardSurface.initial(spec.initial_curve, grid, n_paths, f"f[{ccy}]")
            for ccy, spec in market.currencies.items()
        }
        self.basis = {
            key: BasisSurface.from_spec(spec, grid, n_paths)
            for key, spec in market.basis.items() if not spec.is_trivial
        }
        self.spreads = {
            family.label: ForwardSurface.initial(family.initial_curve, grid, n_paths, family.label, family.delta_f)
            for family in market.spread_families
        }
        self.log_fx = {ccy: np.full(n_paths, np.log(spec.spot)) for ccy, spec in market.fx.items()}
        self.log_density = {ccy: np.zeros(n_paths) for ccy in market.fx}
        self.log_commodity = {name: np.full(n_paths, np.log(spec.spot)) for name, spec in market.commodities.items()}
        self.commodity_integral = {name: np.zeros(n_paths) for name in market.commodities}

    def subset(self, paths: np.ndarray) -> "_PathBatch":
        clone = object.__new__(_PathBatch)
        clone.market = self.market
        clone.curves = {key: surface.subset(paths) for key, surface in self.curves.items()}
        clone.basis = {key: surface.subset(paths) for key, surface in self.basis.items()}
        clone.spreads = {key: surface.subset(paths) for key, surface in self.spreads.items()}
        for name in ("log_fx", "log_density", "log_commodity", "commodity_integral"):
            setattr(clone, name, {key: values[paths].copy() for key, values in getattr(self, name).items()})
        return clone

    def log_coll_account(self, base: str, collateral: str) -> np.ndarray:
        log_account = self.curves[base].integral.copy()
        for key, sign in self.market.basis_terms(base, collateral):
            log_account += sign * self.basis[key].integral
        return log_account

    def advance(self, step: _StepPlan, dx: np.ndarray) -> None:
        dt = step.dt
        base = self.market.base_currency
        base_accrual = step_accrual(self.curves[base], dt)

        for ccy, fxspec in self.market.fx.items():
            basis = self.basis.get((base, ccy))
            basis_accrual = 0.0 if basis is None else step_accrual(basis, dt)
            foreign_accrual = step_accrual(self.curves[ccy], dt)
            log_step = fx_log_increment(
                fxspec, self.market.driver, step.t, dt, dx, base_accrual, basis_accrual, foreign_accrual
            )
            self.log_fx[ccy] += log_step
            self.log_density[ccy] += log_step - base_accrual - basis_accrual + foreign_accrual

        for name, spec in self.market.commodities.items():
            sigma, drift = step.commodity_terms[name]
            before = np.exp(self.log_commodity[name])
            shock = loaded_increment(dx, sigma)
            self.log_commodity[name] += step_accrual(self.curves[spec.currency], dt) + drift + shock
            self.commodity_integral[name] += 0.5 * (before + np.exp(self.log_commodity[name])) * dt

        for ccy, surface in self.curves.items():
            advance_surface(surface, *step.curve_rows[ccy], dx, dt)
        for key, surface in self.basis.items():
            advance_surface(surface, *step.basis_rows[key], dx, dt)
        for label, surface in self.spreads.items():
            advance_surface(surface, *step.spread_rows[label], dx, dt)


class _Recorder:
    """Stores batch states at the observation times; bonds for every observation maturity."""

    def __init__(self, n_paths: int, times: np.ndarray):
        self.n_paths = n_paths
        self.times = times
        self.data: Dict[str, np.ndarray] = {}

    def _slot(self, key: str, with_maturity: bool) -> np.ndarray:
        if key not in self.data:
            shape = (self.n_paths, self.times.size) + ((self.times.size,) if with_maturity else ())
            self.data[key] = np.full(shape, np.nan)
        return self.data[key]

    def _bonds(self, key: str, j: int, surface: ForwardSurface) -> None:
        t = self.times[j]
        live = self.times >= t - _CONFIG.GRID_TOLERANCE
        slot = self._slot(key, True)
        slot[:, j, live] = -surface_integral(surface, np.maximum(self.times[live], t))

    def record(self, batch: _PathBatch, j: int) -> None:
        for ccy, surface in batch.curves.items():
            self._bonds(f"curve/{ccy}", j, surface)
            self._slot(f"curve_account/{ccy}", False)[:, j] = surface.integral
            self._slot(f"curve_short/{ccy}", False)[:, j] = surface.short_rate
        for (base, collateral), surface in batch.basis.items():
            self._bonds(f"basis/{base}/{collateral}", j, surface)
            self._slot(f"basis_account/{base}/{collateral}", False)[:, j] = surface.integral
            self._slot(f"basis_short/{base}/{collateral}", False)[:, j] = surface.short_rate
        for label, surface in batch.spreads.items():
            self._bonds(f"spread/{label}", j, surface)
            self._slot(f"spread_integral/{label}", False)[:, j] = surface.integral
        for ccy in batch.log_fx:
            self._slot(f"fx/{ccy}", False)[:, j] = batch.log_fx[ccy]
            self._slot(f"density/{ccy}", False)[:, j] = batch.log_density[ccy]
        for name in batch.log_commodity:
            self._slot(f"commodity/{name}", False)[:, j] = batch.log_commodity[name]
            self._slot(f"commodity_integral/{name}", False)[:, j] = batch.commodity_integral[name]


@dataclass(eq=False)
class SimResult:
    """
    States of all paths at the observation times plus provenance.

    Bonds are stored for every pair (t, T) of observation times with T >= t;
    accessors return per-path arrays and raise MissingState for unstored times.
    """
    market: "MarketModel"
    config: SimulationConfig
    grid: np.ndarray
    times: np.ndarray
    data: Dict[str, np.ndarray]
    config_hash: str

    @property
    def n_paths(self) -> int:
        return next(iter(self.data.values())).shape[0]

    @property
    def base_currency(self) -> str:
        return self.market.base_currency

    @property
    def antithetic(self) -> bool:
        return self.config.antithetic

    @property
    def seed(self) -> int:
        return self.config.seed

    def has_time(self, t: float) -> bool:
        return bool(np.any(np.abs(self.times - t) <= _CONFIG.GRID_TOLERANCE))

    def obs_index(self, t: float) -> int:
        index = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[index] - t) > _CONFIG.GRID_TOLERANCE:
            raise MissingState(f"No state stored at t={t}")
        return index

    def head(self, n_paths: int) -> "SimResult":
        """The first n_paths paths as a result of their own."""
        return replace(self, data={key: values[:n_paths] for key, values in self.data.items()})

    def _series(self, key: str) -> np.ndarray:
        if key not in self.data:
            raise MissingState(f"Simulation result carries no {key!r}")
        return self.data[key]

    def _basis(self, kind: str, base: str, collateral: str, *index) -> np.ndarray:
        """Series `kind` of q^{base,collateral} from the stored pairs; 0.0 when no stored pair enters."""
        total = 0.0
        for (pair_base, pair_coll), sign in self.market.basis_terms(base, collateral):
            total = total + sign * self._series(f"{kind}/{pair_base}/{pair_coll}")[(slice(None),) + index]
        return total

    def log_account(self, ccy: str, t: float) -> np.ndarray:
        return self._series(f"curve_account/{ccy}")[:, self.obs_index(t)].copy()

    def log_coll_account(self, base: str, collateral: str, t: float) -> np.ndarray:
        j = self.obs_index(t)
        return self._series(f"curve_account/{base}")[:, j] + self._basis("basis_account", base, collateral, j)

    def log_bond(self, base: str, collateral: str, t: float, maturity: float) -> np.ndarray:
        """log B^{base,collateral}(t, T)."""
        if maturity < t - _CONFIG.GRID_TOLERANCE:
            raise ReversedInterval(f"Bond maturity {maturity} before t={t}")
        j, m = self.obs_index(t), self.obs_index(maturity)
        return self._series(f"curve/{base}")[:, j, m] + self._basis("basis", base, collateral, j, m)

    def short_rate(self, base: str, collateral: str, t: float) -> np.ndarray:
        j = self.obs_index(t)
        return self._series(f"curve_short/{base}")[:, j] + self._basis("basis_short", base, collateral, j)

    def log_fx(self, ccy: str, t: float) -> np.ndarray:
        if ccy == self.base_currency:
            return np.zeros(self.n_paths)
        return self._series(f"fx/{ccy}")[:, self.obs_index(t)].copy()

    def fx(self, ccy: str, t: float) -> np.ndarray:
        return np.exp(self.log_fx(ccy, t))

    def log_density(self, ccy: str, t: float) -> np.ndarray:
        if ccy == self.base_currency:
            return np.zeros(self.n_paths)
        return self._series(f"density/{ccy}")[:, self.obs_index(t)].copy()

    def unsecured_integral(self, ccy: str, start: float, end: float) -> float:
        return self.market.currencies[ccy].unsecured_spread.integral(start, end)

    def spread_integral(self, label: str, t: float) -> np.ndarray:
        return self._series(f"spread_integral/{label}")[:, self.obs_index(t)].copy()

    def spread_log_bond(self, label: str, t: float, maturity: float) -> np.ndarray:
        return self._series(f"spread/{label}")[:, self.obs_index(t), self.obs_index(maturity)].copy()

    def commodity(self, name: str, t: float) -> np.ndarray:
        return np.exp(self._series(f"commodity/{name}")[:, self.obs_index(t)])

    def commodity_integral(self, name: str, t: float) -> np.ndarray:
        return self._series(f"commodity_integral/{name}")[:, self.obs_index(t)].copy()

    def path_table(self, quantities: Sequence[str] = _CONFIG.SIMULATION_QUANTITIES) -> pd.DataFrame:
        """Long table (path_id, t, quantity, value) ordered by path, time and quantity."""
        columns: List[Tuple[str, np.ndarray]] = []
        for kind in quantities:
            for ccy in self.market.currencies:
                if kind == "short_rate":
                    columns.append((f"short_rate/{ccy}", self._series(f"curve_short/{ccy}")))
                elif kind == "account":
                    columns.append((f"account/{ccy}", np.exp(self._series(f"curve_account/{ccy}"))))
                elif kind == "fx" and ccy in self.market.fx:
                    columns.append((f"fx/{ccy}", np.exp(self._series(f"fx/{ccy}"))))
                elif kind == "density" and ccy in self.market.fx:
                    columns.append((f"density/{ccy}", np.exp(self._series(f"density/{ccy}"))))
        if not columns:
            raise MissingState(f"No simulated quantity matches {list(quantities)}")

        names = [name for name, _ in columns]
        values = np.stack([array for _, array in columns], axis=-1)
        n, n_obs, n_q = values.shape
        return pd.DataFrame({
            "path_id": np.repeat(np.arange(n), n_obs * n_q),
            "t": np.tile(np.repeat(self.times, n_q), n),
            "quantity": np.tile(names, n * n_obs),
            "value": values.reshape(-1),
        }, columns=list(_CONFIG.SIMULATION_COLUMNS))


def _chunk_bounds(config: SimulationConfig) -> List[Tuple[int, int]]:
    return [(start, min(start + config.chunk_size, config.paths)) for start in range(0, config.paths, config.chunk_size)]


def _default_observation_times(market: "MarketModel", horizon: float) -> Tuple[float, ...]:
    """The horizon and every market date inside it; bonds are stored for each pair of these."""
    tol = _CONFIG.GRID_TOLERANCE
    return tuple(d for d in market.dates if d <= horizon + tol) + (float(horizon),)


def _simulate_chunk(market: "MarketModel", grid: np.ndarray, plan: List[_StepPlan], sampler: IncrementSampler,
                    config: SimulationConfig, bounds: Tuple[int, int], times: np.ndarray,
                    lookup: Dict[int, int]) -> Dict[str, np.ndarray]:
    start, end = bounds
    increments = np.stack([sampler.sample(config.seed, p, config.antithetic) for p in range(start, end)])
    batch = _PathBatch(market, grid, end - start)
    recorder = _Recorder(end - start, times)
    if 0 in lookup:
        recorder.record(batch, lookup[0])
    for i, step in enumerate(plan):
        batch.advance(step, increments[:, i, :])
        if i + 1 in lookup:
            recorder.record(batch, lookup[i + 1])
    logger.debug(f"Simulated paths [{start}, {end})")
    return recorder.data


def run_simulation(market: "MarketModel", config: SimulationConfig) -> SimResult:
    """
    Simulate every state of `market` under the base spot measure.

    The result is a deterministic function of (market, config): each path draws
    from generators keyed by its own index, so chunking and thread count do not
    change any value. Without observation times, states are kept at 0, the
    market dates and the horizon.

    Args:
        market: Market model
        config: Simulation configuration

    Returns:
        SimResult holding the states at the observation times
    """
    grid = build_time_grid(config.horizon, config.dt, tuple(market.dates) + config.observation_times)
    requested = config.observation_times or _default_observation_times(market, config.horizon)
    times = np.array(sorted({float(grid[_grid_index(grid, t)]) for t in requested} | {0.0}))
    lookup = {_grid_index(grid, t): j for j, t in enumerate(times)}
    logger.info(
        f"Simulating {config.paths} paths on {grid.size - 1} steps, "
        f"{times.size} observation times, {config.threads} thread(s)"
    )

    try:
        market.check_admissibility()
        plan = _build_plan(market, grid, config.drift_bias)
        sampler = IncrementSampler(market.driver, grid)
        chunks = _chunk_bounds(config)
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(
                lambda bounds: _simulate_chunk(market, grid, plan, sampler, config, bounds, times, lookup),
                chunks,
            ))
    except XccyHjmError:
        raise
    except Exception as e:
        logger.error(f"Simulation failed: {str(e)}")
        raise SimulationError(f"Simulation failed: {str(e)}")

    data = {key: np.concatenate([part[key] for part in parts], axis=0) for key in parts[0]}
    logger.info(f"Simulation finished: {len(chunks)} chunk(s), {len(data)} stored series")
    return SimResult(market, config, grid, times, data, config.config_hash(market.source_hash))


def nested_conditional_discount(result: SimResult, currency: str, collateral: str, t: float,
                                windows: Sequence[Tuple[float, float]], n_outer: int, n_inner: int) -> np.ndarray:
    """
    E[exp(-sum of int r^{c} over the windows) | G_t] for the first n_outer paths.

    Each outer path is re-simulated to t, then n_inner inner paths restart from its
    state with generators from the nested stream family.

    Returns:
        Array of shape (n_outer,)
    """
    if not windows:
        raise ValueError("Nested discounting needs at least one window")
    if any(start < t - _CONFIG.GRID_TOLERANCE or end < start for start, end in windows):
        raise ReversedInterval(f"Discount windows {list(windows)} must start at or after t={t}")
    if n_outer > result.n_paths:
        raise ValueError(f"{n_outer} outer paths requested, {result.n_paths} simulated")

    market, config, grid = result.market, result.config, result.grid
    plan = _build_plan(market, grid, config.drift_bias)
    sampler = IncrementSampler(market.driver, grid)
    i_t = _grid_index(grid, t)
    marks = {_grid_index(grid, point) for window in windows for point in window}
    i_end = max(marks)

    outer = np.stack([sampler.sample(config.seed, p, config.antithetic) for p in range(n_outer)])
    batch = _PathBatch(market, grid, n_outer)
    for i in range(i_t):
        batch.advance(plan[i], outer[:, i, :])

    inner_batch = batch.subset(np.repeat(np.arange(n_outer), n_inner))
    inner = np.stack([
        sampler.sample(config.seed, k, tag=_CONFIG.NESTED_STREAM_TAG) for k in range(n_outer * n_inner)
    ])
    accounts = {}
    if i_t in marks:
        accounts[i_t] = inner_batch.log_coll_account(currency, collateral)
    for i in range(i_t, i_end):
        inner_batch.advance(plan[i], inner[:, i, :])
        if i + 1 in marks:
            accounts[i + 1] = inner_batch.log_coll_account(currency, collateral)

    exponent = sum(
        accounts[_grid_index(grid, end)] - accounts[_grid_index(grid, start)] for start, end in windows
    )
    logger.info(f"Nested estimate at t={t}: {n_outer} outer x {n_inner} inner paths")
    return np.exp(-exponent).reshape(n_outer, n_inner).mean(axis=1)


@dataclass(frozen=True)
class CheckSpec:
    """One martingale or oracle check of the verification report."""
    kind: str
    currency: str = ""
    collateral: str = ""
    maturity: float = 0.0
    index: str = ""
    fixing: float = 0.0
    times: Tuple[float, ...] = ()
    case: str = ""
    outer_paths: int = _CONFIG.DEFAULT_OUTER_PATHS
    inner_paths: int = _CONFIG.DEFAULT_INNER_PATHS
    borrow_rate: float = 0.0
    lend_rate: float = 0.0
    funding_rate: float = 0.0
    payments: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in _CONFIG.CHECK_KINDS:
            raise ValueError(f"Unknown check kind {self.kind!r}")
        object.__setattr__(self, "times", tuple(sorted(float(t) for t in self.times)))

    @property
    def name(self) -> str:
        if self.index:
            return f"{self.kind}[{self.index},T={self.fixing:g}]"
        pair = self.currency if not self.collateral or self.collateral == self.currency else f"{self.currency}/{self.collateral}"
        parts = [pair] if pair else []
        if self.maturity:
            parts.append(f"T={self.maturity:g}")
        if self.case:
            parts.append(self.case)
        return f"{self.kind}[{','.join(parts)}]"


def check_dates(check: CheckSpec, market: "MarketModel") -> Tuple[float, ...]:
    """Dates a check needs on the observation grid."""
    dates = {0.0, check.maturity, *check.times}
    if check.kind == "asymmetric_collateral":
        return (0.0,)
    if check.index:
        sched = market.index_schedule(check.index, check.fixing)
        dates |= {sched.start, sched.fixing, sched.payment, sched.delta_f}
    return tuple(sorted(d for d in dates if d >= 0.0))


def default_checks(market: "MarketModel", horizon: float) -> List[CheckSpec]:
    """Discounted-bond checks for every currency and FX martingale checks for every pair."""
    checks = [CheckSpec("discounted_bond", currency=ccy, maturity=horizon) for ccy in market.currencies]
    checks += [CheckSpec("fx_martingale", currency=ccy) for ccy in market.fx]
    return checks


class CheckResult(NamedTuple):
    name: str
    t: float
    target: float
    estimate: float
    std_error: float
    z: float
    passed: bool


def z_score(estimate: float, target: float, std_error: float) -> float:
    """
    (estimate - target) / SE.

    An SE and a gap both within rounding of the target give 0; otherwise a zero
    SE gives +-inf.
    """
    gap = estimate - target
    floor = _CONFIG.EXACT_TOLERANCE * max(1.0, abs(target))
    if abs(gap) <= floor and std_error <= floor:
        return 0.0
    if std_error > 0:
        return gap / std_error
    return float(np.copysign(np.inf, gap))


def _threshold(result: SimResult) -> float:
    return _CONFIG.Z_THRESHOLD_JUMPS if result.market.driver.has_jumps else _CONFIG.Z_THRESHOLD


def _row(result: SimResult, name: str, t: float, target: float, estimate: Estimate) -> CheckResult:
    z = z_score(estimate.value, target, estimate.std_error)
    return CheckResult(name, float(t), float(target), estimate.value, estimate.std_error, z, bool(abs(z) <= _threshold(result)))


def _check_times(check: CheckSpec, result: SimResult, lower: float = 0.0, upper: float = np.inf) -> List[float]:
    candidates = check.times or tuple(result.times)
    tol = _CONFIG.GRID_TOLERANCE
    return [float(t) for t in candidates if lower - tol <= t <= upper + tol]


def _under_currency(result: SimResult, samples: np.ndarray, ccy: str, t: float) -> Estimate:
    """Estimate under Q^ccy from base-measure paths."""
    density = None if ccy == result.base_currency else rn_spot_foreign(result, result.base_currency, ccy, t)
    return expectation_under(samples, density, paired=result.antithetic)


def _initial(values: np.ndarray) -> float:
    return float(values[0])


def _check_discounted_bond(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, maturity = check.currency, check.maturity
    target = float(np.exp(_initial(result.log_bond(ccy, ccy, 0.0, maturity))))
    rows = []
    for t in _check_times(check, result, upper=maturity):
        samples = np.exp(result.log_bond(ccy, ccy, t, maturity) - result.log_account(ccy, t))
        rows.append(_row(result, check.name, t, target, _under_currency(result, samples, ccy, t)))
    return rows


def _check_foreign_collateral_bond(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, collateral, maturity = check.currency, check.collateral, check.maturity
    target = float(np.exp(_initial(result.log_bond(ccy, collateral, 0.0, maturity))))
    rows = []
    for t in _check_times(check, result, upper=maturity):
        samples = np.exp(result.log_bond(ccy, collateral, t, maturity) - result.log_coll_account(ccy, collateral, t))
        rows.append(_row(result, check.name, t, target, _under_currency(result, samples, ccy, t)))
    return rows


def _check_spread_bond_forward(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, collateral, maturity = check.currency, check.collateral, check.maturity

    def log_spread_bond(t):
        return result.log_bond(ccy, collateral, t, maturity) - result.log_bond(ccy, ccy, t, maturity)

    target = float(np.exp(_initial(log_spread_bond(0.0))))
    density = density_process(MeasureId.spot(result.base_currency), MeasureId.forward(maturity, ccy, ccy))
    rows = []
    for t in _check_times(check, result, upper=maturity):
        spread_account = result.log_coll_account(ccy, collateral, t) - result.log_account(ccy, t)
        samples = np.exp(log_spread_bond(t) - spread_account)
        estimate = expectation_under(samples, density(result, t), paired=result.antithetic)
        rows.append(_row(result, check.name, t, target, estimate))
    return rows


def _check_fx_martingale(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, base = check.currency, result.base_currency
    target = result.market.fx[ccy].spot
    rows = []
    for t in _check_times(check, result):
        samples = result.fx(ccy, t) * np.exp(result.log_account(ccy, t) - result.log_coll_account(base, ccy, t))
        rows.append(_row(result, check.name, t, target, expectation_under(samples, paired=result.antithetic)))
    return rows


def _ratio_estimate(result: SimResult, samples: np.ndarray, measure: MeasureId, t: float, since: float) -> Estimate:
    density = density_process(MeasureId.spot(result.base_currency), measure)
    weights = density(result, t) / density(result, since)
    return expectation_under(samples, weights, paired=result.antithetic)


def _check_index_spread(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    family = result.market.family_for(check.index)
    sched = family.schedule(check.fixing)
    measure = MeasureId.forward(sched.start, family.base, family.collateral)
    start = forward_index_spread(result, family, check.fixing, family.delta_f)
    times = check.times or (sched.start, sched.fixing, sched.payment)
    rows = []
    for t in times:
        if t < family.delta_f - _CONFIG.GRID_TOLERANCE:
            continue
        samples = forward_index_spread(result, family, check.fixing, t) / start
        rows.append(_row(result, check.name, t, 1.0, _ratio_estimate(result, samples, measure, t, family.delta_f)))
    return rows


def _check_index_forward(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    family = result.market.family_for(check.index)
    sched = family.schedule(check.fixing)
    measure = MeasureId.forward(sched.payment, family.base, family.collateral)
    start = forward_index_value(result, family, check.fixing, family.delta_f)
    rows = []
    for t in _check_times(check, result, lower=family.delta_f, upper=sched.payment):
        samples = forward_index_value(result, family, check.fixing, t) - start
        rows.append(_row(result, check.name, t, 0.0, _ratio_estimate(result, samples, measure, t, family.delta_f)))
    return rows


def _check_expectation_hypothesis(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, maturity = check.currency, check.maturity
    target = float(np.exp(_initial(result.log_bond(ccy, ccy, 0.0, maturity))))
    samples = np.exp(-result.log_account(ccy, maturity))
    return [_row(result, check.name, 0.0, target, _under_currency(result, samples, ccy, maturity))]


def _check_forward_density(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    collateral = check.collateral or check.currency
    density = density_process(
        MeasureId.spot(result.base_currency), MeasureId.forward(check.maturity, check.currency, collateral)
    )
    return [
        _row(result, check.name, t, 1.0, expectation_under(density(result, t), paired=result.antithetic))
        for t in _check_times(check, result)
    ]


def _check_claim_martingale(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    stream = CashflowStream((Payment(check.maturity, 1.0, check.currency),), check.collateral or check.currency)
    times = _check_times(check, result, upper=check.maturity)
    increments = claim_martingale_increments(result, stream, times)
    return [
        _row(result, check.name, t, 0.0, expectation_under(values, paired=result.antithetic))
        for t, values in zip(times[1:], increments)
    ]


def _check_zcb_duality(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    price = price_zcb(result, "k2k2_dual", check.currency, check.currency, check.maturity, 0.0)
    return [_row(result, check.name, 0.0, price.dual.value, price.value)]


def _check_gaussian_oracle(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    ccy, maturity = check.currency, check.maturity
    kind = check.case or "bond"
    collateral = check.collateral or ccy
    rows = []
    for t in _check_times(check, result, upper=maturity):
        if t <= _CONFIG.GRID_TOLERANCE:
            continue
        oracle = gaussian_oracle(result.market, ccy, t, maturity, kind, collateral)
        log_values = result.log_bond(ccy, collateral, t, maturity)
        if kind == "spread_bond":
            log_values = log_values - result.log_bond(ccy, ccy, t, maturity)
        rows.append(_row(result, f"{check.name}:mean", t, oracle.mean, expectation_under(np.exp(log_values))))

        variance = float(np.var(log_values, ddof=1))
        n = log_values.size
        spread = variance * np.sqrt(2.0 / (n - 1))
        if oracle.log_variance > 0:
            passed = abs(variance / oracle.log_variance - 1.0) <= _CONFIG.VARIANCE_TOLERANCE
        else:
            passed = variance <= _CONFIG.EXACT_TOLERANCE
        z = z_score(variance, oracle.log_variance, spread)
        rows.append(CheckResult(f"{check.name}:log_variance", float(t), oracle.log_variance, variance, spread, z, passed))
    return rows


def _check_nested_collateral_rate(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    index = result.market.indices[check.index]
    sched = result.market.index_schedule(check.index, check.fixing)
    ccy, collateral = index.currency, index.collateral
    if ccy != result.base_currency:
        raise ValueError(f"Nested collateral rate check needs an index in {result.base_currency}, got {ccy}")
    if sched.delta_p <= 0:
        raise ValueError(f"Nested collateral rate check needs a payment adjustment > 0 on {check.index!r}")

    n_outer = min(check.outer_paths, result.n_paths)
    outer = result.head(n_outer)
    realised = simple_forward_collateral_rate(outer, sched, ccy, collateral, sched.payment)
    density = density_process(MeasureId.spot(ccy), MeasureId.forward(sched.payment, ccy, collateral))
    rows = []
    for t in _check_times(check, result, lower=sched.delta_f, upper=sched.fixing):
        if t <= sched.start + _CONFIG.GRID_TOLERANCE:
            windows = [(t, sched.start), (sched.fixing, sched.payment)]
        else:
            windows = [(sched.fixing, sched.payment)]
        conditional = nested_conditional_discount(result, ccy, collateral, t, windows, n_outer, check.inner_paths)
        nested = simple_forward_collateral_rate(outer, sched, ccy, collateral, t, conditional)
        ratio = density(outer, sched.payment) / density(outer, t)
        samples = ratio * (1.0 + sched.delta_f * realised) - (1.0 + sched.delta_f * nested)
        rows.append(_row(result, check.name, t, 0.0, expectation_under(samples)))
    return rows


def _check_asymmetric_collateral(result: SimResult, check: CheckSpec) -> List[CheckResult]:
    payments = check.payments or ((check.maturity, 1.0),)
    rows = []
    for t in check.times or (0.0,):
        recursion = asymmetric_collateral_price(payments, check.borrow_rate, check.lend_rate, t)
        quadrature = asymmetric_collateral_quadrature(
            payments, check.borrow_rate, check.lend_rate, check.funding_rate, t
        )
        rows.append(_row(result, f"{check.name}:quadrature", t, recursion, quadrature))

        # Equal rates collapse to plain discounting at that rate
        symmetric = asymmetric_collateral_price(payments, check.borrow_rate, check.borrow_rate, t)
        plain = sum(a * np.exp(-check.borrow_rate * (s - t)) for s, a in payments if s > t)
        rows.append(_row(result, f"{check.name}:symmetric", t, float(plain), Estimate(symmetric, 0.0)))
    return rows


_CHECKS: Dict[str, Callable[[SimResult, CheckSpec], List[CheckResult]]] = {
    "discounted_bond": _check_discounted_bond,
    "foreign_collateral_bond": _check_foreign_collateral_bond,
    "spread_bond_forward": _check_spread_bond_forward,
    "fx_martingale": _check_fx_martingale,
    "index_spread": _check_index_spread,
    "index_forward": _check_index_forward,
    "expectation_hypothesis": _check_expectation_hypothesis,
    "forward_density": _check_forward_density,
    "claim_martingale": _check_claim_martingale,
    "zcb_duality": _check_zcb_duality,
    "gaussian_oracle": _check_gaussian_oracle,
    "nested_collateral_rate": _check_nested_collateral_rate,
    "asymmetric_collateral": _check_asymmetric_collateral,
}


def martingale_report(result: SimResult, checks: Sequence[CheckSpec]) -> List[CheckResult]:
    """
    Run every check; z = (estimate - target) / SE per check and time.

    Targets are model values at t = 0 computed without simulation noise.
    """
    rows: List[CheckResult] = []
    for check in checks:
        try:
            rows.extend(_CHECKS[check.kind](result, check))
        except XccyHjmError:
            raise
        except Exception as e:
            logger.error(f"Check {check.name} failed to evaluate: {str(e)}")
            raise SimulationError(f"Check {check.name} failed to evaluate: {str(e)}")
    failed = sum(not row.passed for row in rows)
    logger.info(f"Verification: {len(rows)} rows, {failed} failed")
    return rows


class GaussianOracle(NamedTuple):
    log_mean: float
    log_variance: float

    @property
    def mean(self) -> float:
        return float(np.exp(self.log_mean + 0.5 * self.log_variance))


def gaussian_oracle(market: "MarketModel", currency: str, t: float, maturity: float,
                    kind: str = "bond", collateral: Optional[str] = None) -> GaussianOracle:
    """
    Closed-form law of log B(t, T) (or log Q(t, T)) under the base measure for a Brownian driver.

    log B(t, T) = -int_t^T f_0 - int_0^t [Psi^l_s(-Sigma_s(T)) - Psi^l_s(-Sigma_s(t))] ds
                  - int_0^t (Sigma_s(T) - Sigma_s(t)) . dX_s,
    with Psi^l the exponent of the curve's own measure and dX the base-measure driver.
    """
    if maturity < t:
        raise ReversedInterval(f"Oracle needs T >= t, got t={t}, T={maturity}")
    base_driver = market.driver
    if base_driver.has_jumps:
        raise ValueError("The Gaussian oracle needs a Brownian driver")
    driver = market.currency_driver(currency)
    vol_c = market.currencies[currency].volatility

    if kind == "bond":
        vol, initial = vol_c, market.currencies[currency].initial_curve

        def drift_integral(s, u):
            return float(integrated_drift(vol, driver, s, u))
    elif kind == "spread_bond":
        if (currency, collateral) not in market.basis:
            raise ValueError(f"The spread bond law needs a configured basis pair, got {currency}/{collateral}")
        basis = market.basis[(currency, collateral)]
        vol, initial = basis.volatility, basis.initial_curve

        def drift_integral(s, u):
            return float(integrated_basis_drift(vol_c, vol, driver, s, u))
    else:
        raise ValueError(f"Unknown oracle kind {kind!r}")

    if t <= 0.0:
        return GaussianOracle(-initial.integral(0.0, maturity), 0.0)

    def gap(s):
        return vol.integrated(s, maturity) - vol.integrated(s, t)

    def drift_term(s):
        mean_increment = float(gap(s) @ base_driver.characteristics_at(s).drift)
        return drift_integral(s, maturity) - drift_integral(s, t) + mean_increment

    def variance_term(s):
        g = gap(s)
        return float(g @ base_driver.characteristics_at(s).diffusion @ g)

    points = [p for p in base_driver.breakpoints if 0.0 < p < t] or None
    drift_total, _ = quad(drift_term, 0.0, t, points=points, limit=200)
    variance, _ = quad(variance_term, 0.0, t, points=points, limit=200)
    log_mean = -initial.integral(t, maturity) - drift_total
    return GaussianOracle(float(log_mean), float(variance))
