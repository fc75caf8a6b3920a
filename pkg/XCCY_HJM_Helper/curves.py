"""
HJM bond-price model per currency: initial curves, deterministic volatility
families, the drift condition and the simulated forward surface.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .config import Config
from .driver import DriverSpec, loaded_increment, local_exponent, local_exponent_gradient
from .exceptions import GridExhausted, MissingState, ReversedInterval

logger = logging.getLogger(__name__)

_CONFIG = Config()


@dataclass(frozen=True, eq=False)
class InitialCurve:
    """Initial instantaneous forward curve, linear between pillars, flat outside."""
    pillars: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pillars = np.atleast_1d(np.asarray(self.pillars, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if pillars.shape != values.shape or pillars.ndim != 1:
            raise ValueError("Curve pillars and values must be vectors of equal length")
        if np.any(np.diff(pillars) <= 0):
            raise ValueError("Curve pillars must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("Curve values must be finite")
        object.__setattr__(self, "pillars", pillars)
        object.__setattr__(self, "values", values)

    @classmethod
    def flat(cls, rate: float) -> "InitialCurve":
        return cls(np.array([0.0]), np.array([float(rate)]))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def forward(self, maturity):
        return np.interp(maturity, self.pillars, self.values)

    def integral(self, start: float, end: float) -> float:
        """Exact integral of the interpolant over [start, end]."""
        if end < start:
            raise ReversedInterval(f"Integral over [{start}, {end}] is reversed")
        if end == start:
            return 0.0
        inner = self.pillars[(self.pillars > start) & (self.pillars < end)]
        knots = np.concatenate([[start], inner, [end]])
        values = self.forward(knots)
        return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(knots)))

    def discount(self, maturity: float) -> float:
        return float(np.exp(-self.integral(0.0, maturity)))


@dataclass(frozen=True, eq=False)
class VolatilitySpec:
    """
    sigma_t(T) = shape(T - t) * loading.

    Families: constant (shape 1), exponential (Hull-White, e^{-a x}) and piecewise
    (levels by time-to-maturity bucket, buckets split at `breakpoints`).
    """
    family: str
    loading: np.ndarray
    mean_reversion: float = 0.0
    breakpoints: Tuple[float, ...] = ()
    levels: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in _CONFIG.VOL_FAMILIES:
            raise ValueError(f"Unknown volatility family {self.family!r}")
        object.__setattr__(self, "loading", np.atleast_1d(np.asarray(self.loading, dtype=float)))
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if self.family == "piecewise":
            if len(self.levels) != len(self.breakpoints) + 1:
                raise ValueError("Piecewise volatility needs one more level than breakpoints")
            if any(b <= a for a, b in zip((0.0,) + self.breakpoints, self.breakpoints)):
                raise ValueError("Piecewise volatility breakpoints must be positive and increasing")

    @classmethod
    def zero(cls, dim: int) -> "VolatilitySpec":
        return cls("constant", np.zeros(dim))

    @classmethod
    def constant(cls, loading) -> "VolatilitySpec":
        return cls("constant", loading)

    @classmethod
    def exponential(cls, loading, mean_reversion: float) -> "VolatilitySpec":
        return cls("exponential", loading, float(mean_reversion))

    @classmethod
    def piecewise(cls, loading, breakpoints, levels) -> "VolatilitySpec":
        return cls("piecewise", loading, 0.0, tuple(breakpoints), tuple(levels))

    @property
    def dim(self) -> int:
        return self.loading.size

    @property
    def is_zero(self) -> bool:
        if not np.any(self.loading):
            return True
        return self.family == "piecewise" and not any(self.levels)

    def shape(self, horizon):
        horizon = np.asarray(horizon, dtype=float)
        if self.family == "constant":
            return np.ones_like(horizon)
        if self.family == "exponential":
            return np.exp(-self.mean_reversion * horizon)
        buckets = np.searchsorted(self.breakpoints, horizon, side="right")
        return np.asarray(self.levels)[buckets]

    def integrated_shape(self, horizon):
        """int_0^x shape(u) du, exact."""
        horizon = np.asarray(horizon, dtype=float)
        if self.family == "constant":
            return horizon.copy()
        if self.family == "exponential":
            a = self.mean_reversion
            if a == 0.0:
                return horizon.copy()
            return -np.expm1(-a * horizon) / a
        edges = np.concatenate([[0.0], self.breakpoints])
        widths = np.clip(horizon[..., None] - edges, 0.0, None)
        uppers = np.concatenate([np.diff(edges), [np.inf]])
        return np.sum(np.minimum(widths, uppers) * np.asarray(self.levels), axis=-1)

    def sigma(self, t: float, maturity):
        """sigma_t(T) with shape (..., d)."""
        return self.shape(np.asarray(maturity, dtype=float) - t)[..., None] * self.loading

    def integrated(self, t: float, maturity):
        """Sigma_t(T) = int_t^T sigma_t(u) du with shape (..., d)."""
        return self.integrated_shape(np.asarray(maturity, dtype=float) - t)[..., None] * self.loading


def integrated_vol(vol: VolatilitySpec, t: float, maturity: float) -> np.ndarray:
    """Sigma_t(T), exact for every family."""
    if maturity < t:
        raise ReversedInterval(f"Integrated volatility needs T >= t, got t={t}, T={maturity}")
    return vol.integrated(t, maturity)


def hjm_drift(vol: VolatilitySpec, driver: DriverSpec, t: float, maturity):
    """alpha_t(T) = -sigma_t(T) . grad Psi_t(-Sigma_t(T)); vectorised over T."""
    sigma = vol.sigma(t, maturity)
    gradient = local_exponent_gradient(driver, t, -vol.integrated(t, maturity))
    return -np.sum(sigma * gradient, axis=-1)


def integrated_drift(vol: VolatilitySpec, driver: DriverSpec, t: float, maturity):
    """int_t^T alpha_t(u) du = Psi_t(-Sigma_t(T))."""
    return local_exponent(driver, t, -vol.integrated(t, maturity))


def drift_row(vol: VolatilitySpec, driver: DriverSpec, t: float, pillars: np.ndarray) -> np.ndarray:
    """Drift at time t for every pillar; zero on matured pillars."""
    live = pillars >= t - _CONFIG.GRID_TOLERANCE
    row = np.zeros(pillars.size)
    if not vol.is_zero:
        row[live] = hjm_drift(vol, driver, t, np.maximum(pillars[live], t))
    return row


def load_row(vol: VolatilitySpec, t: float, pillars: np.ndarray) -> np.ndarray:
    """sigma_t(T_j) for every pillar, shape (M, d); zero on matured pillars."""
    live = pillars >= t - _CONFIG.GRID_TOLERANCE
    row = np.zeros((pillars.size, vol.dim))
    row[live] = vol.sigma(t, np.maximum(pillars[live], t))
    return row


@dataclass(eq=False)
class ForwardSurface:
    """
    Simulated forward curve on the pillar grid for a batch of paths.

    `values[:, j]` holds f_t(T_j); columns before `step` are matured and frozen.
    `integral` is the running int r ds, accrued from `accrue_from` on.
    """
    pillars: np.ndarray
    values: np.ndarray
    integral: np.ndarray
    step: int = 0
    accrue_from: float = 0.0
    label: str = ""

    @classmethod
    def initial(cls, curve: InitialCurve, pillars, n_paths: int, label: str = "", accrue_from: float = 0.0):
        pillars = np.asarray(pillars, dtype=float)
        values = np.tile(curve.forward(pillars), (n_paths, 1))
        return cls(pillars, values, np.zeros(n_paths), 0, float(accrue_from), label)

    @property
    def t(self) -> float:
        return float(self.pillars[self.step])

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def short_rate(self) -> np.ndarray:
        """f_t(t), the rate accruing the running integral."""
        return self.values[:, self.step]

    def copy(self) -> "ForwardSurface":
        return replace(self, values=self.values.copy(), integral=self.integral.copy())

    def subset(self, paths) -> "ForwardSurface":
        return replace(self, values=self.values[paths].copy(), integral=self.integral[paths].copy())


def step_accrual(surface: ForwardSurface, dt: float) -> np.ndarray:
    """
    Log growth of the account over [t, t + dt]: 0.5 (f_t(t) + f_t(t + dt)) dt.

    The trapezoid on the time-t curve, not the left point r_t dt: the recorded
    short rate times dt falls short of this growth by 0.5 (f_t(t + dt) - f_t(t)) dt.
    """
    i = surface.step
    return 0.5 * (surface.values[:, i] + surface.values[:, i + 1]) * dt


def advance_surface(surface: ForwardSurface, drift: np.ndarray, loading: np.ndarray,
                    dx: np.ndarray, dt: float) -> None:
    """
    In-place Euler step f_{t+dt}(T_j) = f_t(T_j) + alpha_t(T_j) dt + sigma_t(T_j) . dX.

    Args:
        surface: Surface at time t, advanced to the next pillar
        drift: alpha_t on every pillar, shape (M,)
        loading: sigma_t on every pillar, shape (M, d)
        dx: Driver increments, shape (n_paths, d)
        dt: Step length, must land on the next pillar
    """
    i = surface.step
    if i + 1 >= surface.pillars.size:
        raise GridExhausted(f"{surface.label}: no pillar left after t={surface.t}")
    if abs(surface.pillars[i + 1] - surface.t - dt) > _CONFIG.GRID_TOLERANCE:
        raise GridExhausted(
            f"{surface.label}: step dt={dt} from t={surface.t} misses the next pillar {surface.pillars[i + 1]}"
        )
    if surface.t >= surface.accrue_from - _CONFIG.GRID_TOLERANCE:
        surface.integral += step_accrual(surface, dt)
    surface.values[:, i + 1:] += drift[i + 1:] * dt + loaded_increment(dx, loading[i + 1:])
    surface.step = i + 1


def evolve_curve(surface: ForwardSurface, vol: VolatilitySpec, driver: DriverSpec,
                 dt: float, increment: np.ndarray) -> ForwardSurface:
    """One Euler step of the surface; returns a new surface, dt = 0 is the identity."""
    result = surface.copy()
    if dt == 0.0:
        return result
    if dt < 0.0:
        raise ReversedInterval(f"Step length must be >= 0, got {dt}")
    t = surface.t
    dx = np.broadcast_to(np.asarray(increment, dtype=float), (surface.n_paths, driver.dim))
    advance_surface(result, drift_row(vol, driver, t, surface.pillars), load_row(vol, t, surface.pillars), dx, dt)
    return result


def surface_integral(surface: ForwardSurface, maturities) -> np.ndarray:
    """
    Trapezoid int_t^T f_t(u) du on the pillar grid for each maturity.

    Returns:
        Array of shape (n_paths, len(maturities))
    """
    maturities = np.atleast_1d(np.asarray(maturities, dtype=float))
    t = surface.t
    if np.any(maturities < t - _CONFIG.GRID_TOLERANCE):
        raise ReversedInterval(f"{surface.label}: maturity before t={t}")
    pillars = surface.pillars[surface.step:]
    if np.any(maturities > pillars[-1] + _CONFIG.GRID_TOLERANCE):
        raise GridExhausted(f"{surface.label}: maturity beyond the last pillar {pillars[-1]}")
    values = surface.values[:, surface.step:]

    segments = 0.5 * (values[:, 1:] + values[:, :-1]) * np.diff(pillars)
    cumulative = np.concatenate([np.zeros((values.shape[0], 1)), np.cumsum(segments, axis=1)], axis=1)

    target = np.clip(maturities, t, pillars[-1])
    left = np.clip(np.searchsorted(pillars, target, side="right") - 1, 0, pillars.size - 1)
    right = np.minimum(left + 1, pillars.size - 1)
    width = np.where(right > left, pillars[right] - pillars[left], 1.0)
    h = target - pillars[left]
    f_left = values[:, left]
    f_end = f_left + (values[:, right] - f_left) * (h / width)
    return cumulative[:, left] + 0.5 * (f_left + f_end) * h


def bond_price(surface: ForwardSurface, t: float, maturity: float) -> np.ndarray:
    """B(t, T) = exp(-int_t^T f_t(u) du) per path."""
    if maturity < t:
        raise ReversedInterval(f"Bond maturity {maturity} before t={t}")
    if abs(t - surface.t) > _CONFIG.GRID_TOLERANCE:
        raise MissingState(f"{surface.label}: surface is at t={surface.t}, bond requested at t={t}")
    if maturity - t <= _CONFIG.GRID_TOLERANCE:
        return np.ones(surface.n_paths)
    return np.exp(-surface_integral(surface, [maturity])[:, 0])


def account(surface: ForwardSurface) -> np.ndarray:
    """exp(int r ds) up to the surface's current time."""
    return np.exp(surface.integral)
