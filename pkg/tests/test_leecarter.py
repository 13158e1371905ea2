"""Principal-component baseline and its residual-resampling bootstrap."""

import numpy as np
import pytest

from codaboot import (
    ClrSeries,
    ConfigurationError,
    DomainError,
    RankError,
    fit_lc,
    lc_bootstrap_forecast,
    lc_bootstrap_path,
    trapezoid_weights,
)
from codaboot.bootstrap import _fit_ets
from codaboot.coda import inverse_clr


def _centred_series(values, grid, radix=1000.0):
    w = trapezoid_weights(grid)
    eta = grid[-1] - grid[0]
    centred = values - ((values @ w) / eta)[:, None]
    return ClrSeries(
        years=np.arange(values.shape[0]), grid=grid, values=centred, radix=radix
    )


def _rank1_series(seed=1, n=20, d=8):
    rng = np.random.default_rng(seed)
    grid = np.arange(float(d))
    f = rng.normal(size=d)
    beta = np.cumsum(rng.normal(size=n)) * 2.0
    return _centred_series(np.outer(beta, f), grid)


def test_rank1_fit_is_exact():
    series = _rank1_series()
    fit = fit_lc(series, n_components=1)
    assert np.max(np.abs(fit.residuals)) < 1e-10
    assert np.linalg.norm(fit.components[0]) == pytest.approx(1.0, abs=1e-12)
    peak = np.argmax(np.abs(fit.components[0]))
    assert fit.components[0, peak] > 0.0
    np.testing.assert_allclose(fit.reconstruction(), series.values, rtol=0, atol=1e-10)


def test_truncation_error_equals_tail_singular_energy():
    rng = np.random.default_rng(6)
    grid = np.arange(4.0)
    series = _centred_series(rng.normal(size=(5, 4)), grid)
    fit = fit_lc(series, n_components=2)
    singular = np.linalg.svd(
        series.values - series.values.mean(axis=0), compute_uv=False
    )
    tail = float(np.sum(singular[2:] ** 2))
    assert float(np.sum(fit.residuals**2)) == pytest.approx(tail, rel=1e-10)
    # The kept triplets match the SVD up to the fixed sign convention.
    np.testing.assert_allclose(
        np.abs(np.linalg.norm(fit.scores, axis=0)), singular[:2], rtol=1e-10
    )


def test_reconstruction_identity_for_any_rank():
    rng = np.random.default_rng(30)
    grid = np.linspace(0.0, 5.0, 6)
    series = _centred_series(rng.normal(size=(9, 6)), grid)
    for k in (1, 2, 5):
        fit = fit_lc(series, n_components=k)
        np.testing.assert_allclose(fit.reconstruction(), series.values, rtol=0, atol=1e-10)


def test_fit_lc_validation():
    series = _rank1_series(n=6, d=4)
    with pytest.raises(RankError):
        fit_lc(series, 0)
    with pytest.raises(RankError):
        fit_lc(series, 5)
    with pytest.raises(DomainError):
        fit_lc(series.values, 1)


def test_bootstrap_replicates_follow_the_documented_recipe():
    # Re-run the documented per-replicate algorithm with the same seed and
    # compare every sample curve bit for bit.
    rng0 = np.random.default_rng(14)
    grid = np.arange(6.0)
    series = _centred_series(
        np.cumsum(rng0.normal(size=(15, 6)), axis=0) + 0.1 * rng0.normal(size=(15, 6)),
        grid,
    )
    fit = fit_lc(series, n_components=2)
    h_max, b = 3, 4
    path = lc_bootstrap_path(fit, max_horizon=h_max, n_samples=b, rng_seed=99)

    fitted = fit.mean_curve + fit.scores @ fit.components
    pooled = fit.residuals.ravel()
    rng = np.random.default_rng(99)
    n, d = fit.residuals.shape
    for rep in range(b):
        draws = pooled[rng.integers(0, pooled.size, (n, d))]
        pseudo = fitted + draws
        mean_curve = pseudo.mean(axis=0)
        left, singular, right = np.linalg.svd(pseudo - mean_curve, full_matrices=False)
        components = right[:2].copy()
        scores = left[:, :2] * singular[:2]
        for k in range(2):
            peak = np.argmax(np.abs(components[k]))
            if components[k, peak] < 0.0:
                components[k] = -components[k]
                scores[:, k] = -scores[:, k]
        future = np.empty((h_max, 2))
        for k in range(2):
            level, trend = _fit_ets(scores[:, k])
            future[:, k] = level + trend * np.arange(1, h_max + 1)
        curves = mean_curve + future @ components
        for h in range(1, h_max + 1):
            expected = inverse_clr(curves[h - 1], grid, series.radix)
            np.testing.assert_allclose(
                path[h - 1].samples[rep], expected, rtol=0, atol=1e-10
            )


def test_zero_residuals_collapse_the_bands():
    series = _rank1_series(seed=8, n=25)
    fit = fit_lc(series, n_components=1)
    fc = lc_bootstrap_forecast(fit, horizon=2, n_samples=50, rng_seed=0)
    np.testing.assert_allclose(fc.lower[0.8], fc.upper[0.8], rtol=0, atol=1e-8)
    np.testing.assert_allclose(fc.lower[0.8], fc.point, rtol=0, atol=1e-8)


def test_path_prefix_matches_shorter_path_and_single_horizon():
    rng = np.random.default_rng(21)
    grid = np.arange(5.0)
    series = _centred_series(np.cumsum(rng.normal(size=(12, 5)), axis=0), grid)
    fit = fit_lc(series, n_components=1)
    long_path = lc_bootstrap_path(fit, max_horizon=5, n_samples=40, rng_seed=3)
    short_path = lc_bootstrap_path(fit, max_horizon=3, n_samples=40, rng_seed=3)
    for h in range(1, 4):
        np.testing.assert_array_equal(
            long_path[h - 1].samples, short_path[h - 1].samples
        )
    single = lc_bootstrap_forecast(fit, horizon=3, n_samples=40, rng_seed=3)
    np.testing.assert_array_equal(single.samples, short_path[2].samples)


def test_samples_conserve_the_radix():
    rng = np.random.default_rng(2)
    grid = np.arange(7.0)
    series = _centred_series(
        np.cumsum(rng.normal(size=(14, 7)), axis=0) + 0.2 * rng.normal(size=(14, 7)),
        grid,
        radix=100000.0,
    )
    fit = fit_lc(series, n_components=2)
    fc = lc_bootstrap_forecast(fit, horizon=2, n_samples=200, rng_seed=5)
    w = trapezoid_weights(grid)
    np.testing.assert_allclose(fc.samples @ w, np.full(200, 100000.0), rtol=1e-10)
    assert np.all(fc.samples > 0.0)
    for level in fc.levels:
        np.testing.assert_array_equal(
            fc.lower[level], np.quantile(fc.samples, (1.0 - level) / 2.0, axis=0)
        )


def test_determinism_and_mode_separation():
    rng = np.random.default_rng(33)
    grid = np.arange(6.0)
    series = _centred_series(
        np.cumsum(rng.normal(size=(13, 6)), axis=0) + 0.3 * rng.normal(size=(13, 6)),
        grid,
    )
    fit = fit_lc(series, n_components=1)
    one = lc_bootstrap_forecast(fit, horizon=1, n_samples=60, rng_seed=4)
    two = lc_bootstrap_forecast(fit, horizon=1, n_samples=60, rng_seed=4)
    np.testing.assert_array_equal(one.samples, two.samples)
    rows = lc_bootstrap_forecast(fit, horizon=1, n_samples=60, rng_seed=4, resample="rows")
    assert not np.array_equal(one.samples, rows.samples)


def test_bootstrap_validation():
    fit = fit_lc(_rank1_series(), 1)
    with pytest.raises(ConfigurationError):
        lc_bootstrap_path(fit, 2, resample="columns")
    with pytest.raises(ConfigurationError):
        lc_bootstrap_path(fit, 2, levels=(0.0,))
    with pytest.raises(DomainError):
        lc_bootstrap_path(fit, 0)
