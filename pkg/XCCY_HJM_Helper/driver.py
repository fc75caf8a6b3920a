"""
Driving Ito semimartingale X given by its differential characteristics (b, c, K).

Time dependence is piecewise constant: a DriverSpec holds a tuple of regimes with
start times. Jumps are finite-activity compound Poisson components whose scalar
sizes are mapped into R^d by a loading vector. The truncation function is
chi(xi) = xi * 1{|xi_i| <= 1}, applied componentwise.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtr

from .config import Config
from .exceptions import EmptyGrid, ExponentialMomentUnbounded
from .measures import MeasureId

logger = logging.getLogger(__name__)

_CONFIG = Config()


def _as_vector(values, name: str) -> np.ndarray:
    array = np.atleast_1d(np.asarray(values, dtype=float))
    if array.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must be finite")
    return array


def _check_exponent(exponent) -> None:
    if np.any(np.asarray(exponent) > _CONFIG.MAX_EXPONENT):
        raise ExponentialMomentUnbounded(
            f"Exponential moment exponent {float(np.max(exponent)):.3g} exceeds {_CONFIG.MAX_EXPONENT:g}"
        )


def _check_tilted_intensity(intensity: float) -> None:
    if not np.isfinite(intensity) or intensity > _CONFIG.MAX_TILTED_INTENSITY:
        raise ExponentialMomentUnbounded(
            f"Tilted jump intensity {intensity:.3g} exceeds {_CONFIG.MAX_TILTED_INTENSITY:g}"
        )


@dataclass(frozen=True, eq=False)
class TwoPointJumps:
    """Compound Poisson component with sizes `up` w.p. `p_up` and `down` otherwise."""
    intensity: float
    loading: np.ndarray
    up: float
    down: float
    p_up: float
    family: str = field(default="two_point", init=False)

    def __post_init__(self):
        object.__setattr__(self, "loading", _as_vector(self.loading, "jump loading"))
        if self.intensity < 0:
            raise ValueError(f"Jump intensity must be >= 0, got {self.intensity}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError(f"p_up must lie in [0, 1], got {self.p_up}")

    def moment(self, theta):
        """E[exp(theta J)] for scalar or array theta."""
        theta = np.asarray(theta, dtype=float)
        _check_exponent(np.maximum(theta * self.up, theta * self.down))
        return self.p_up * np.exp(theta * self.up) + (1.0 - self.p_up) * np.exp(theta * self.down)

    def moment_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        _check_exponent(np.maximum(theta * self.up, theta * self.down))
        return (self.p_up * self.up * np.exp(theta * self.up)
                + (1.0 - self.p_up) * self.down * np.exp(theta * self.down))

    def mean_size(self) -> float:
        return self.p_up * self.up + (1.0 - self.p_up) * self.down

    def truncated_mean(self) -> np.ndarray:
        """E[chi(l J)] per unit intensity."""
        result = np.zeros_like(self.loading)
        for size, prob in ((self.up, self.p_up), (self.down, 1.0 - self.p_up)):
            jump = self.loading * size
            result += np.where(np.abs(jump) <= 1.0, jump, 0.0) * prob
        return result

    def tilt(self, theta: float) -> "TwoPointJumps":
        """Exponentially tilted component: K'(dxi) = exp(theta J) K(dxi)."""
        total = float(self.moment(theta))
        intensity = self.intensity * total
        _check_tilted_intensity(intensity)
        p_up = self.p_up * float(np.exp(theta * self.up)) / total
        return replace(self, intensity=intensity, p_up=p_up)

    @staticmethod
    def draw_sums(rng: np.random.Generator, counts: np.ndarray, components: Sequence["TwoPointJumps"]) -> np.ndarray:
        """Sum of `counts[i]` jump sizes drawn with the parameters of `components[i]`."""
        p_up = np.array([c.p_up for c in components])
        up = np.array([c.up for c in components])
        down = np.array([c.down for c in components])
        n_up = rng.binomial(counts, p_up)
        return up * n_up + down * (counts - n_up)


@dataclass(frozen=True, eq=False)
class GaussianJumps:
    """Compound Poisson component with Normal(mean, std^2) sizes."""
    intensity: float
    loading: np.ndarray
    mean: float
    std: float
    family: str = field(default="gaussian", init=False)

    def __post_init__(self):
        object.__setattr__(self, "loading", _as_vector(self.loading, "jump loading"))
        if self.intensity < 0:
            raise ValueError(f"Jump intensity must be >= 0, got {self.intensity}")
        if self.std < 0:
            raise ValueError(f"Jump std must be >= 0, got {self.std}")

    def moment(self, theta):
        theta = np.asarray(theta, dtype=float)
        exponent = theta * self.mean + 0.5 * theta ** 2 * self.std ** 2
        _check_exponent(exponent)
        return np.exp(exponent)

    def moment_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.mean + theta * self.std ** 2) * self.moment(theta)

    def mean_size(self) -> float:
        return self.mean

    def truncated_mean(self) -> np.ndarray:
        result = np.zeros_like(self.loading)
        for i, weight in enumerate(self.loading):
            if weight == 0.0:
                continue
            bound = 1.0 / abs(weight)
            if self.std == 0.0:
                partial = self.mean if abs(self.mean) <= bound else 0.0
            else:
                lower = (-bound - self.mean) / self.std
                upper = (bound - self.mean) / self.std
                density = np.exp(-0.5 * upper ** 2) - np.exp(-0.5 * lower ** 2)
                partial = (self.mean * (ndtr(upper) - ndtr(lower))
                           - self.std * density / np.sqrt(2.0 * np.pi))
            result[i] = weight * partial
        return result

    def tilt(self, theta: float) -> "GaussianJumps":
        intensity = self.intensity * float(self.moment(theta))
        _check_tilted_intensity(intensity)
        return replace(self, intensity=intensity, mean=self.mean + theta * self.std ** 2)

    @staticmethod
    def draw_sums(rng: np.random.Generator, counts: np.ndarray, components: Sequence["GaussianJumps"]) -> np.ndarray:
        mean = np.array([c.mean for c in components])
        std = np.array([c.std for c in components])
        z = rng.standard_normal(counts.shape)
        return counts * mean + std * np.sqrt(counts) * z


JumpComponent = Union[TwoPointJumps, GaussianJumps]


@dataclass(frozen=True, eq=False)
class Characteristics:
    """Constant characteristics (b, c, K) of one regime."""
    drift: np.ndarray
    diffusion: np.ndarray
    jumps: Tuple[JumpComponent, ...] = ()

    def __post_init__(self):
        drift = _as_vector(self.drift, "drift")
        diffusion = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        dim = drift.size
        if diffusion.shape != (dim, dim):
            raise ValueError(f"Diffusion must be {dim}x{dim}, got {diffusion.shape}")
        if not np.allclose(diffusion, diffusion.T, atol=1e-14):
            raise ValueError("Diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(diffusion).min() < -1e-12:
            raise ValueError("Diffusion matrix must be positive semidefinite")
        for jump in self.jumps:
            if jump.loading.size != dim:
                raise ValueError(f"Jump loading has dimension {jump.loading.size}, driver has {dim}")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def dim(self) -> int:
        return self.drift.size

    def exponent(self, beta) -> np.ndarray:
        """Psi(beta) in closed form; beta may carry leading batch axes."""
        beta = np.asarray(beta, dtype=float)
        value = beta @ self.drift + 0.5 * np.einsum("...i,ij,...j->...", beta, self.diffusion, beta)
        for jump in self.jumps:
            theta = beta @ jump.loading
            value = value + jump.intensity * (jump.moment(theta) - 1.0 - beta @ jump.truncated_mean())
        return value

    def gradient(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        value = self.drift + beta @ self.diffusion
        for jump in self.jumps:
            theta = beta @ jump.loading
            slope = np.asarray(jump.moment_derivative(theta))[..., None] * jump.loading
            value = value + jump.intensity * (slope - jump.truncated_mean())
        return value

    def compensator(self) -> np.ndarray:
        """Sum of lambda * E[chi(xi)] over components."""
        total = np.zeros(self.dim)
        for jump in self.jumps:
            total += jump.intensity * jump.truncated_mean()
        return total

    def diffusion_root(self) -> np.ndarray:
        """A with A A^T = c."""
        values, vectors = np.linalg.eigh(self.diffusion)
        return vectors * np.sqrt(np.clip(values, 0.0, None))

    @property
    def has_jumps(self) -> bool:
        return any(jump.intensity > 0 for jump in self.jumps)


@dataclass(frozen=True, eq=False)
class DriverSpec:
    """Piecewise-constant characteristics of X under `measure`."""
    measure: MeasureId
    regimes: Tuple[Characteristics, ...]
    starts: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        starts = tuple(float(s) for s in self.starts)
        if len(starts) != len(self.regimes) or not starts or starts[0] != 0.0:
            raise ValueError("Driver regimes need one start each, the first at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("Driver regime starts must be strictly increasing")
        dims = {regime.dim for regime in self.regimes}
        if len(dims) != 1:
            raise ValueError(f"All regimes must share one dimension, got {sorted(dims)}")
        families = {tuple(j.family for j in regime.jumps) for regime in self.regimes}
        if len(families) != 1:
            raise ValueError("All regimes must carry the same jump families in the same order")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "regimes", tuple(self.regimes))

    @classmethod
    def constant(cls, measure: MeasureId, drift, diffusion, jumps: Sequence[JumpComponent] = ()) -> "DriverSpec":
        return cls(measure, (Characteristics(drift, diffusion, tuple(jumps)),), (0.0,))

    @property
    def dim(self) -> int:
        return self.regimes[0].dim

    @property
    def n_jump_components(self) -> int:
        return len(self.regimes[0].jumps)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.starts[1:]

    @property
    def has_jumps(self) -> bool:
        return any(regime.has_jumps for regime in self.regimes)

    @property
    def is_brownian(self) -> bool:
        return not self.has_jumps

    def characteristics_at(self, t: float) -> Characteristics:
        index = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.regimes[max(index, 0)]


@dataclass(frozen=True, eq=False)
class PiecewiseLoading:
    """Deterministic piecewise-constant vector process, e.g. an FX volatility."""
    starts: Tuple[float, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        starts = tuple(float(s) for s in self.starts)
        if len(starts) != vectors.shape[0] or not starts or starts[0] != 0.0:
            raise ValueError("Loading pieces need one start each, the first at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("Loading starts must be strictly increasing")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def constant(cls, vector) -> "PiecewiseLoading":
        return cls((0.0,), np.atleast_2d(np.asarray(vector, dtype=float)))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.starts[1:]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.vectors)

    def at(self, t: float) -> np.ndarray:
        index = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.vectors[max(index, 0)]

    def negated(self) -> "PiecewiseLoading":
        return PiecewiseLoading(self.starts, -self.vectors)


def local_exponent(spec: DriverSpec, t: float, beta) -> np.ndarray:
    """Psi_t(beta) = beta.b + 1/2 beta'c beta + int (e^{beta.xi} - 1 - beta.chi(xi)) K(dxi)."""
    return spec.characteristics_at(t).exponent(beta)


def local_exponent_gradient(spec: DriverSpec, t: float, beta) -> np.ndarray:
    """grad Psi_t(beta) = b + c beta + int (e^{beta.xi} xi - chi(xi)) K(dxi)."""
    return spec.characteristics_at(t).gradient(beta)


def loaded_increment(dx: np.ndarray, loading) -> np.ndarray:
    """
    Per-path sigma . dX, accumulated component by component.

    Each path's value depends only on its own row of dx, so it does not change
    with how many paths share the batch.

    Args:
        dx: Driver increments, shape (n_paths, d)
        loading: One loading (d,) or one per pillar (M, d)

    Returns:
        Shape (n_paths,) or (n_paths, M)
    """
    loading = np.asarray(loading, dtype=float)
    total = np.zeros(dx.shape[:-1] + loading.shape[:-1])
    for k in range(loading.shape[-1]):
        if loading.ndim == 1:
            total += dx[..., k] * loading[k]
        else:
            total += dx[..., k, None] * loading[:, k]
    return total


def transformed_exponent(spec: DriverSpec, t: float, beta, sigma) -> np.ndarray:
    """Local exponent under the measure tilted by sigma: Psi(beta + sigma) - Psi(sigma)."""
    characteristics = spec.characteristics_at(t)
    sigma = np.asarray(sigma, dtype=float)
    return characteristics.exponent(np.asarray(beta, dtype=float) + sigma) - characteristics.exponent(sigma)


def mean_drift(spec: DriverSpec, t: float) -> np.ndarray:
    """Drift of X itself, grad Psi_t(0) = b + int (xi - chi(xi)) K(dxi)."""
    return local_exponent_gradient(spec, t, np.zeros(spec.dim))


def _tilt_regime(characteristics: Characteristics, sigma: np.ndarray) -> Characteristics:
    jumps = tuple(jump.tilt(float(sigma @ jump.loading)) for jump in characteristics.jumps)
    shift = characteristics.diffusion @ sigma
    for old, new in zip(characteristics.jumps, jumps):
        shift = shift + new.intensity * new.truncated_mean() - old.intensity * old.truncated_mean()
    return Characteristics(characteristics.drift + shift, characteristics.diffusion, jumps)


def girsanov_transform(spec: DriverSpec, sigma_x: PiecewiseLoading, target: MeasureId) -> DriverSpec:
    """
    Characteristics of X under the measure with density E(int sigma dX - int Psi(sigma) dt).

    b' = b + c sigma + int chi(xi)(e^{sigma.xi} - 1) K(dxi); K' = e^{sigma.xi} K; c unchanged.

    Args:
        spec: Characteristics under the source measure
        sigma_x: Deterministic tilting loading
        target: Label of the resulting measure

    Returns:
        DriverSpec under `target` on the merged regime breakpoints
    """
    if sigma_x.dim != spec.dim:
        raise ValueError(f"Tilt has dimension {sigma_x.dim}, driver has {spec.dim}")
    starts = tuple(sorted(set(spec.starts) | set(sigma_x.starts)))
    regimes = tuple(_tilt_regime(spec.characteristics_at(s), sigma_x.at(s)) for s in starts)
    logger.debug(f"Girsanov transform to {target.label} over {len(starts)} regime(s)")
    return DriverSpec(target, regimes, starts)


def path_generators(seed: int, key: int, n_streams: int, tag: int = 0) -> List[np.random.Generator]:
    """Independent counter-based generators for one path, one per stream id."""
    suffix = [int(tag)] if tag else []
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(key), stream] + suffix)))
        for stream in range(n_streams)
    ]


def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise EmptyGrid("Time grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise EmptyGrid("Time grid must be strictly increasing")
    return grid


class IncrementSampler:
    """
    Euler-level sampler of increments of X on a fixed grid.

    Each step draws b dt - sum(lambda E[chi]) dt + sqrt(dt) A z + sum(l * S), where S is
    the exact compound Poisson sum over the step. Stream 0 of a path carries the
    Brownian normals, stream 1 + j the jump component j.
    """

    def __init__(self, spec: DriverSpec, grid):
        self.spec = spec
        self.grid = _validate_grid(grid)
        self.dt = np.diff(self.grid)
        step_regimes = [spec.characteristics_at(t) for t in self.grid[:-1]]

        self.drift = np.array([
            (ch.drift - ch.compensator()) * dt for ch, dt in zip(step_regimes, self.dt)
        ])
        self.roots = np.array([ch.diffusion_root() * np.sqrt(dt) for ch, dt in zip(step_regimes, self.dt)])
        self.jump_steps = [
            [ch.jumps[j] for ch in step_regimes] for j in range(spec.n_jump_components)
        ]
        self.jump_means = [
            np.array([c.intensity for c in comps]) * self.dt for comps in self.jump_steps
        ]

    @property
    def n_steps(self) -> int:
        return self.dt.size

    @property
    def n_streams(self) -> int:
        return _CONFIG.JUMP_STREAM_OFFSET + self.spec.n_jump_components

    def sample(self, seed: int, path_index: int, antithetic: bool = False, tag: int = 0) -> np.ndarray:
        """
        Increments (n_steps, dim) of one path.

        With antithetic sampling, paths 2m and 2m + 1 share generators and the
        second path negates the Brownian normals. A nonzero tag selects an
        independent family of streams for the same path index.
        """
        key = path_index // 2 if antithetic else path_index
        generators = path_generators(seed, key, self.n_streams, tag)

        z = generators[_CONFIG.BROWNIAN_STREAM].standard_normal((self.n_steps, self.spec.dim))
        if antithetic and path_index % 2 == 1:
            z = -z
        increments = self.drift + np.einsum("kij,kj->ki", self.roots, z)

        for j, components in enumerate(self.jump_steps):
            rng = generators[_CONFIG.JUMP_STREAM_OFFSET + j]
            counts = rng.poisson(self.jump_means[j])
            if not counts.any():
                continue
            sums = type(components[0]).draw_sums(rng, counts, components)
            loadings = np.array([c.loading for c in components])
            increments += loadings * sums[:, None]
        return increments


def simulate_increments(spec: DriverSpec, grid, rng_seed: int, path_index: int) -> np.ndarray:
    """One path of increments of X; a deterministic function of (seed, path_index, grid)."""
    return IncrementSampler(spec, grid).sample(rng_seed, path_index)


def exponential_martingale_log(spec: DriverSpec, grid, increments: np.ndarray, loading: PiecewiseLoading) -> np.ndarray:
    """Cumulative log of exp(int sigma dX - int Psi(sigma) dt) at every grid point."""
    grid = _validate_grid(grid)
    steps = []
    for i, (t, dt) in enumerate(zip(grid[:-1], np.diff(grid))):
        sigma = loading.at(t)
        steps.append(loaded_increment(increments[..., i, :], sigma) - float(local_exponent(spec, t, sigma)) * dt)
    steps = np.stack(steps, axis=-1)
    zeros = np.zeros(steps.shape[:-1] + (1,))
    return np.concatenate([zeros, np.cumsum(steps, axis=-1)], axis=-1)
