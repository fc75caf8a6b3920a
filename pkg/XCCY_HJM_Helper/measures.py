"""
Pricing measures and their Radon-Nikodym density processes.

Densities are evaluated pathwise on a simulation result. Only spot-to-spot and
spot-to-forward edges are implemented; forward measures of a foreign base are
composed as spot-foreign times forward.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from .exceptions import ZeroTotalWeight

logger = logging.getLogger(__name__)

SPOT = "spot"
FORWARD = "forward"
UNSECURED_FORWARD = "unsecured_forward"


@dataclass(frozen=True)
class MeasureId:
    """Identifies Q^k, the extended forward measure Q^{T,k0,k3} or the unsecured forward measure."""
    kind: str
    currency: str
    maturity: Optional[float] = None
    collateral: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (SPOT, FORWARD, UNSECURED_FORWARD):
            raise ValueError(f"Unknown measure kind: {self.kind!r}")
        if self.kind != SPOT and (self.maturity is None or self.maturity < 0):
            raise ValueError(f"{self.kind} measure needs a maturity T >= 0")

    @classmethod
    def spot(cls, currency: str) -> "MeasureId":
        return cls(SPOT, currency)

    @classmethod
    def forward(cls, maturity: float, base: str, collateral: Optional[str] = None) -> "MeasureId":
        return cls(FORWARD, base, float(maturity), collateral or base)

    @classmethod
    def unsecured_forward(cls, maturity: float, base: str) -> "MeasureId":
        return cls(UNSECURED_FORWARD, base, float(maturity))

    @property
    def label(self) -> str:
        if self.kind == SPOT:
            return f"Q^{self.currency}"
        if self.kind == FORWARD:
            return f"Q^{{{self.maturity:g},{self.currency},{self.collateral}}}"
        return f"Q^{{{self.maturity:g},{self.currency},unsecured}}"


class Estimate(NamedTuple):
    """Monte Carlo estimate with its standard error."""
    value: float
    std_error: float


@dataclass(frozen=True)
class DensityProcess:
    """Density of `target` with respect to `source`, evaluated per path at time t."""
    source: MeasureId
    target: MeasureId
    evaluator: Callable[[Any, float], np.ndarray]

    def __call__(self, state: Any, t: float) -> np.ndarray:
        return self.evaluator(state, t)


def rn_spot_foreign(state: Any, k0: str, k2: str, t: float) -> np.ndarray:
    """
    dQ^{k2}/dQ^{k0} restricted to G_t.

    The unsecured account ratio is taken as B^{c,k0} Q^{k0,k2} / B^{c,k2}, which makes
    the density the stochastic exponential carried by the FX rate. Densities against
    the simulation base are stored in log form, so any pair is a ratio of two of them.
    """
    if k0 == k2:
        return np.ones(state.n_paths)
    return np.exp(state.log_density(k2, t) - state.log_density(k0, t))


def rn_forward(state: Any, maturity: float, k0: str, k3: str, t: float) -> np.ndarray:
    """
    dQ^{T,k0,k3}/dQ^{k0} restricted to G_t, frozen after T.

    Args:
        state: Simulation result carrying bonds and collateral accounts
        maturity: Forward date T
        k0: Base currency
        k3: Collateral currency
        t: Evaluation time

    Returns:
        Per-path density values
    """
    log_initial = state.log_bond(k0, k3, 0.0, maturity)
    if t <= maturity:
        log_ratio = state.log_bond(k0, k3, t, maturity) - state.log_coll_account(k0, k3, t)
    else:
        log_ratio = -state.log_coll_account(k0, k3, maturity)
    return np.exp(log_ratio - log_initial)


def rn_unsecured_forward(state: Any, maturity: float, k0: str, t: float) -> np.ndarray:
    """Density of the unsecured forward measure, with B^{k0} = B^{c,k0} exp(int q_bar)."""
    end = min(t, maturity)
    log_initial = state.log_bond(k0, k0, 0.0, maturity) - state.unsecured_integral(k0, 0.0, maturity)
    log_account = state.log_coll_account(k0, k0, end) + state.unsecured_integral(k0, 0.0, end)
    if t <= maturity:
        log_bond = state.log_bond(k0, k0, t, maturity) - state.unsecured_integral(k0, t, maturity)
    else:
        log_bond = np.zeros(state.n_paths)
    return np.exp(log_bond - log_account - log_initial)


def density_process(source: MeasureId, target: MeasureId) -> DensityProcess:
    """Build the density of `target` against a spot `source` measure."""
    if source.kind != SPOT:
        raise ValueError(f"Densities are only defined against spot measures, got {source.label}")

    k0 = source.currency
    if target.kind == SPOT:
        def evaluator(state, t):
            return rn_spot_foreign(state, k0, target.currency, t)
    elif target.kind == FORWARD:
        def evaluator(state, t):
            forward = rn_forward(state, target.maturity, target.currency, target.collateral, t)
            return rn_spot_foreign(state, k0, target.currency, t) * forward
    else:
        def evaluator(state, t):
            forward = rn_unsecured_forward(state, target.maturity, target.currency, t)
            return rn_spot_foreign(state, k0, target.currency, t) * forward

    return DensityProcess(source, target, evaluator)


def expectation_under(samples, density=None, paired: bool = False) -> Estimate:
    """
    Self-normalised importance estimate sum(w v) / sum(w) with a delta-method standard error.

    Args:
        samples: Per-path values
        density: Per-path density values; None means plain sample mean
        paired: Treat consecutive paths as antithetic pairs when estimating the error

    Returns:
        Estimate of the reweighted mean
    """
    values = np.asarray(samples, dtype=float)
    weights = np.ones_like(values) if density is None else np.asarray(density, dtype=float)
    if weights.shape != values.shape:
        raise ValueError(f"Samples {values.shape} and densities {weights.shape} differ in shape")

    total = weights.sum()
    if total == 0.0:
        raise ZeroTotalWeight("Importance weights sum to zero")
    estimate = float(np.dot(weights, values) / total)

    residual = weights * (values - estimate)
    scale = weights
    if paired and values.size >= 4 and values.size % 2 == 0:
        residual = residual.reshape(-1, 2).sum(axis=1)
        scale = scale.reshape(-1, 2).sum(axis=1)
    n = residual.size
    if n < 2:
        return Estimate(estimate, 0.0)
    std_error = float(np.sqrt(n / (n - 1) * np.sum(residual ** 2)) / scale.sum())
    return Estimate(estimate, std_error)
