import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from XCCY_HJM_Helper.driver import (
    Characteristics, DriverSpec, GaussianJumps, IncrementSampler, PiecewiseLoading, TwoPointJumps,
    exponential_martingale_log, girsanov_transform, loaded_increment, local_exponent, local_exponent_gradient,
    mean_drift, simulate_increments, transformed_exponent,
)
from XCCY_HJM_Helper.exceptions import EmptyGrid, ExponentialMomentUnbounded
from XCCY_HJM_Helper.measures import MeasureId

USD = MeasureId.spot("USD")


def symmetric_jumps(intensity=2.0):
    return TwoPointJumps(intensity, [1.0], 0.5, -0.5, 0.5)


def test_exponent_of_pure_diffusion():
    spec = DriverSpec.constant(USD, [0.0], [[1.0]])
    assert float(local_exponent(spec, 0.0, [0.5])) == pytest.approx(0.125)


def test_exponent_of_symmetric_two_point_jumps():
    spec = DriverSpec.constant(USD, [0.0], [[0.0]], [symmetric_jumps()])
    assert float(local_exponent(spec, 0.0, [1.0])) == pytest.approx(2.0 * (np.cosh(0.5) - 1.0), rel=1e-12)


def test_gaussian_jump_exponent_matches_quadrature():
    jump = GaussianJumps(1.5, [1.0], 0.2, 0.6)
    spec = DriverSpec.constant(USD, [0.0], [[0.0]], [jump])
    beta = 0.7

    def integrand(x):
        truncated = x if abs(x) <= 1.0 else 0.0
        return (np.exp(beta * x) - 1.0 - beta * truncated) * norm.pdf(x, 0.2, 0.6)

    expected = 1.5 * sum(quad(integrand, a, b, limit=200)[0]
                         for a, b in ((-np.inf, -1.0), (-1.0, 1.0), (1.0, np.inf)))
    assert float(local_exponent(spec, 0.0, [beta])) == pytest.approx(expected, rel=1e-8)


def test_gradient_of_brownian_driver_is_c_beta():
    c = np.array([[2.0, 0.5], [0.5, 1.0]])
    spec = DriverSpec.constant(USD, [0.0, 0.0], c)
    beta = np.array([0.3, -0.2])
    np.testing.assert_allclose(local_exponent_gradient(spec, 0.0, beta), c @ beta, rtol=1e-12, atol=1e-15)


def test_gradient_matches_finite_difference_with_jumps():
    spec = DriverSpec.constant(USD, [0.01], [[0.04]], [symmetric_jumps(), GaussianJumps(0.5, [1.0], -0.1, 0.3)])
    beta, h = 0.4, 1e-6
    numeric = (local_exponent(spec, 0.0, [beta + h]) - local_exponent(spec, 0.0, [beta - h])) / (2 * h)
    assert float(local_exponent_gradient(spec, 0.0, [beta])[0]) == pytest.approx(float(numeric), rel=1e-7)


def test_exponent_accepts_batches_of_beta():
    spec = DriverSpec.constant(USD, [0.0, 0.0], np.eye(2))
    betas = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    np.testing.assert_allclose(local_exponent(spec, 0.0, betas), [0.5, 2.0, 1.0])


def test_mean_drift_of_brownian_driver_is_b():
    spec = DriverSpec.constant(USD, [0.01, -0.02], np.eye(2))
    np.testing.assert_allclose(mean_drift(spec, 0.0), [0.01, -0.02])


def test_moment_overflow_raises():
    spec = DriverSpec.constant(USD, [0.0], [[0.0]], [TwoPointJumps(1.0, [1.0], 10.0, -1.0, 0.5)])
    with pytest.raises(ExponentialMomentUnbounded):
        local_exponent(spec, 0.0, [100.0])


def test_regimes_switch_at_their_start():
    calm = Characteristics([0.0], [[0.01]])
    stressed = Characteristics([0.0], [[0.04]])
    spec = DriverSpec(USD, (calm, stressed), (0.0, 1.0))
    assert float(local_exponent(spec, 0.5, [1.0])) == pytest.approx(0.005)
    assert float(local_exponent(spec, 1.0, [1.0])) == pytest.approx(0.02)
    assert spec.breakpoints == (1.0,)


def test_regimes_must_share_jump_families():
    with pytest.raises(ValueError, match="jump families"):
        DriverSpec(
            USD,
            (Characteristics([0.0], [[1.0]], (symmetric_jumps(),)),
             Characteristics([0.0], [[1.0]], (GaussianJumps(1.0, [1.0], 0.0, 0.1),))),
            (0.0, 1.0),
        )


def test_first_regime_starts_at_zero():
    with pytest.raises(ValueError):
        DriverSpec(USD, (Characteristics([0.0], [[1.0]]),), (0.5,))


def test_diffusion_must_be_positive_semidefinite():
    with pytest.raises(ValueError, match="semidefinite"):
        Characteristics([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_girsanov_shifts_brownian_drift_by_c_sigma():
    c = np.array([[1.0, 0.3], [0.3, 0.5]])
    spec = DriverSpec.constant(USD, [0.01, 0.0], c)
    sigma = np.array([0.1, 0.2])
    tilted = girsanov_transform(spec, PiecewiseLoading.constant(sigma), MeasureId.spot("EUR"))
    np.testing.assert_allclose(tilted.regimes[0].drift, [0.01, 0.0] + c @ sigma, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(tilted.regimes[0].diffusion, c)
    assert tilted.measure == MeasureId.spot("EUR")


@pytest.mark.parametrize("jump", [
    TwoPointJumps(2.0, [1.0, 0.5], 0.5, -0.8, 0.3),
    GaussianJumps(1.0, [0.7, -0.2], 0.1, 0.9),
])
def test_girsanov_exponent_is_shifted_exponent(jump):
    """Psi under the tilted measure equals Psi(beta + sigma) - Psi(sigma)."""
    spec = DriverSpec.constant(USD, [0.01, -0.03], [[0.04, 0.01], [0.01, 0.09]], [jump])
    sigma = np.array([0.3, -0.4])
    tilted = girsanov_transform(spec, PiecewiseLoading.constant(sigma), MeasureId.spot("EUR"))
    for beta in ([0.2, 0.1], [-0.5, 0.3], [1.0, -1.0]):
        expected = float(transformed_exponent(spec, 0.0, beta, sigma))
        assert float(local_exponent(tilted, 0.0, beta)) == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_girsanov_merges_loading_breakpoints():
    spec = DriverSpec.constant(USD, [0.0], [[1.0]])
    loading = PiecewiseLoading((0.0, 2.0), [[0.1], [0.3]])
    tilted = girsanov_transform(spec, loading, MeasureId.spot("EUR"))
    assert tilted.starts == (0.0, 2.0)
    assert tilted.characteristics_at(3.0).drift[0] == pytest.approx(0.3)


def test_tilted_intensity_bound_raises():
    spec = DriverSpec.constant(USD, [0.0], [[0.0]], [GaussianJumps(1.0, [1.0], 0.0, 1.0)])
    with pytest.raises(ExponentialMomentUnbounded):
        girsanov_transform(spec, PiecewiseLoading.constant([20.0]), MeasureId.spot("EUR"))


def test_increments_of_pure_drift():
    spec = DriverSpec.constant(USD, [0.1], [[0.0]])
    increments = simulate_increments(spec, [0.0, 0.5, 1.0], rng_seed=3, path_index=0)
    np.testing.assert_allclose(increments, [[0.05], [0.05]])


def test_increments_are_keyed_by_seed_and_path():
    spec = DriverSpec.constant(USD, [0.0, 0.0], np.eye(2), [TwoPointJumps(5.0, [1.0, 0.0], 0.5, -0.5, 0.5)])
    sampler = IncrementSampler(spec, np.linspace(0.0, 1.0, 9))
    first = sampler.sample(42, 7)
    np.testing.assert_array_equal(first, sampler.sample(42, 7))
    np.testing.assert_array_equal(first, IncrementSampler(spec, np.linspace(0.0, 1.0, 9)).sample(42, 7))
    assert not np.allclose(first, sampler.sample(42, 8))
    assert not np.allclose(first, sampler.sample(43, 7))
    assert not np.allclose(first, sampler.sample(42, 7, tag=5))


def test_antithetic_pairs_negate_brownian_part():
    spec = DriverSpec.constant(USD, [0.0, 0.0], [[1.0, 0.2], [0.2, 0.5]])
    sampler = IncrementSampler(spec, np.linspace(0.0, 2.0, 11))
    total = sampler.sample(5, 4, antithetic=True) + sampler.sample(5, 5, antithetic=True)
    np.testing.assert_allclose(total, 0.0, atol=1e-15)


def test_brownian_increments_have_unit_variance_per_year():
    spec = DriverSpec.constant(USD, [0.0], [[1.0]])
    sampler = IncrementSampler(spec, np.linspace(0.0, 1.0, 11))
    totals = np.array([sampler.sample(1, p).sum() for p in range(4000)])
    assert abs(totals.mean()) < 4 * np.sqrt(1.0 / 4000)
    assert totals.var(ddof=1) == pytest.approx(1.0, abs=0.1)


def test_two_point_jump_increments_match_compound_poisson_moments():
    spec = DriverSpec.constant(USD, [0.0], [[0.0]], [symmetric_jumps()])
    sampler = IncrementSampler(spec, np.linspace(0.0, 1.0, 5))
    totals = np.array([sampler.sample(2, p).sum() for p in range(4000)])
    # lambda T E[J^2] = 2 * 0.25
    assert totals.var(ddof=1) == pytest.approx(0.5, abs=0.1)
    assert set(np.round(np.unique(totals * 2.0), 9)).issubset(set(np.arange(-20.0, 21.0)))


def test_loaded_increment_matches_the_dot_product():
    dx = np.random.default_rng(3).standard_normal((5, 3))
    sigma = np.array([0.02, -0.03, 0.07])
    np.testing.assert_allclose(loaded_increment(dx, sigma), dx @ sigma, rtol=1e-12, atol=1e-15)
    loadings = np.arange(12.0).reshape(4, 3) / 100
    np.testing.assert_allclose(loaded_increment(dx, loadings), dx @ loadings.T, rtol=1e-12, atol=1e-15)


def test_loaded_increment_does_not_depend_on_the_batch():
    dx = np.random.default_rng(4).standard_normal((101, 3))
    loadings = np.random.default_rng(5).standard_normal((9, 3))
    whole = loaded_increment(dx, loadings)
    for start, end in [(0, 7), (7, 14), (50, 101), (100, 101)]:
        np.testing.assert_array_equal(loaded_increment(dx[start:end], loadings), whole[start:end])
    np.testing.assert_array_equal(loaded_increment(dx[3:4], loadings[0]), whole[3:4, 0])


def test_stochastic_exponential_has_unit_mean():
    spec = DriverSpec.constant(USD, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [TwoPointJumps(1.0, [0.5, 0.0], 0.4, -0.2, 0.5)])
    grid = np.linspace(0.0, 1.0, 6)
    sampler = IncrementSampler(spec, grid)
    increments = np.stack([sampler.sample(9, p) for p in range(4000)])
    loading = PiecewiseLoading.constant([0.3, -0.1])
    log_values = exponential_martingale_log(spec, grid, increments, loading)
    assert log_values.shape == (4000, grid.size)
    np.testing.assert_array_equal(log_values[:, 0], 0.0)
    values = np.exp(log_values[:, -1])
    assert abs(values.mean() - 1.0) < 4 * values.std(ddof=1) / np.sqrt(values.size)


def test_grid_needs_two_increasing_points():
    spec = DriverSpec.constant(USD, [0.0], [[1.0]])
    with pytest.raises(EmptyGrid):
        IncrementSampler(spec, [0.0])
    with pytest.raises(EmptyGrid):
        IncrementSampler(spec, [0.0, 1.0, 1.0])
