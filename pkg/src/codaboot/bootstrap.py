"""Bootstrap prediction intervals built on the fitted factor model.

Forecast uncertainty is propagated through three additive sources: the
h-step-ahead forecast errors of the primary scores, the same for the
residual-stage scores, and the final residual curves themselves.  Score
errors come from in-sample pools: for horizon ``h`` the series is refit
on every prefix ending ``h`` steps before an observed value, and the
realised forecast errors form the pool.  A bootstrap replicate adds one
resampled error to each central score forecast, resamples one whole
residual curve, assembles the clr curve, and maps it back to death
counts.  Pointwise empirical quantiles of the replicates give the
prediction bands.

All randomness in one assembly flows from a single seeded generator in a
fixed order: one block of pool draws per primary component (in component
order), one per residual component, then the residual-curve row indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coda import inverse_clr
from .errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    PoolError,
)

SCORE_METHODS = ("random_walk_drift", "ar_aic", "ets_like")

_AR_MAX_ORDER = 5

# Parameter grid for the exponential-smoothing fit.  A fixed grid keeps
# the fit deterministic to the bit across platforms and is plenty for a
# two-parameter least-squares surface.
_ETS_GRID = np.linspace(0.05, 1.0, 20)


def _check_method(method):
    if method not in SCORE_METHODS:
        raise ConfigurationError(
            f"method must be one of {SCORE_METHODS}, got {method!r}"
        )


def _forecast_rw_drift(x, horizons):
    m = x.size
    drift = (x[-1] - x[0]) / (m - 1) if m > 1 else 0.0
    return x[-1] + drift * np.arange(1, horizons + 1)


def _fit_ar_aic(x):
    """Select an AR order by AIC and return (mean, coefficients)."""
    m = x.size
    mean = x.mean()
    xd = x - mean
    max_order = min(_AR_MAX_ORDER, m - 2)
    if max_order < 1:
        return mean, np.empty(0)
    best_aic = np.inf
    best_coef = np.empty(0)
    for order in range(0, max_order + 1):
        target = xd[order:]
        n_eff = target.size
        if order == 0:
            rss = float(target @ target)
            coef = np.empty(0)
        else:
            lagged = np.column_stack([xd[order - j - 1 : m - j - 1] for j in range(order)])
            coef, *_ = np.linalg.lstsq(lagged, target, rcond=None)
            resid = target - lagged @ coef
            rss = float(resid @ resid)
        sigma2 = max(rss / n_eff, 1e-300)
        aic = n_eff * np.log(sigma2) + 2.0 * (order + 1)
        if aic < best_aic:
            best_aic = aic
            best_coef = coef
    return mean, best_coef


def _forecast_ar_aic(x, horizons):
    mean, coef = _fit_ar_aic(x)
    order = coef.size
    if order == 0:
        return np.full(horizons, mean)
    history = list(x[-order:] - mean)
    out = np.empty(horizons)
    for h in range(horizons):
        nxt = float(np.dot(coef, history[::-1][:order]))
        out[h] = mean + nxt
        history.append(nxt)
    return out


def _fit_ets(x):
    """Least-squares additive-trend exponential smoothing.

    Smoothing parameters are chosen by minimising the sum of squared
    one-step errors over a fixed grid; ties resolve to the first grid
    point, so the fit is deterministic.  Returns (level, trend).
    """
    m = x.size
    if m == 1:
        return float(x[0]), 0.0
    alphas, betas = np.meshgrid(_ETS_GRID, _ETS_GRID, indexing="ij")
    alphas = alphas.ravel()
    betas = betas.ravel()
    level = np.full(alphas.size, x[0])
    trend = np.full(alphas.size, x[1] - x[0])
    sse = np.zeros(alphas.size)
    for t in range(1, m):
        predicted = level + trend
        err = x[t] - predicted
        sse += err**2
        level = predicted + alphas * err
        trend = trend + alphas * betas * err
    best = int(np.argmin(sse))
    level = x[0]
    trend_v = x[1] - x[0]
    a = alphas[best]
    b = betas[best]
    for t in range(1, m):
        err = x[t] - (level + trend_v)
        level = level + trend_v + a * err
        trend_v = trend_v + a * b * err
    return float(level), float(trend_v)


def _forecast_ets(x, horizons):
    level, trend = _fit_ets(x)
    return level + trend * np.arange(1, horizons + 1)


_FORECASTERS = {
    "random_walk_drift": _forecast_rw_drift,
    "ar_aic": _forecast_ar_aic,
    "ets_like": _forecast_ets,
}


def _forecast_any_length(x, method, horizons):
    """Forecast a prefix of any length, degrading gracefully below the
    public minimum: a single observation is extrapolated flat, and the
    autoregressive order shrinks with the data."""
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return np.full(horizons, x[0])
    return _FORECASTERS[method](x, horizons)


def forecast_scores(score_series, method, horizons):
    """Central h-step-ahead forecasts of one score series.

    Parameters
    ----------
    score_series : array_like
        Observed scores, at least 5 of them.
    method : str
        ``"random_walk_drift"`` extrapolates the endpoint with the
        average historical step and suits integrated scores;
        ``"ar_aic"`` fits an autoregression with the order (up to 5)
        chosen by AIC and reverts to the mean, for stationary scores;
        ``"ets_like"`` extrapolates the level and trend of an
        additive-trend exponential smoother.
    horizons : int
        Number of steps ahead, at least 1.

    Returns
    -------
    ndarray
        Forecasts for steps ``1 .. horizons``.
    """
    _check_method(method)
    x = np.asarray(score_series, dtype=float)
    if x.ndim != 1:
        raise DomainError("score series must be one-dimensional")
    if x.size < 5:
        raise InsufficientDataError(f"need at least 5 scores, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("scores must be finite")
    h = int(horizons)
    if h < 1:
        raise DomainError(f"horizons must be at least 1, got {horizons}")
    return _forecast_any_length(x, method, h)


def _prefix_forecast_table(x, method, max_horizon):
    """Forecasts from every proper prefix: row ``i`` holds the
    ``1 .. max_horizon`` step forecasts made from ``x[: i + 1]``."""
    n = x.size
    table = np.empty((n - 1, max_horizon))
    for i in range(n - 1):
        table[i] = _forecast_any_length(x[: i + 1], method, max_horizon)
    return table


def build_error_pool(score_series, method, horizon):
    """In-sample h-step forecast errors of one score series.

    For every target time ``t = h+1 .. n`` the forecaster is refit on the
    prefix ending at ``t - h`` and the realised error
    ``x_t - forecast`` enters the pool, so the pool has exactly
    ``n - h`` entries and never looks past the data it forecasts.

    Parameters
    ----------
    score_series : array_like
    method : str
        One of :data:`SCORE_METHODS`; the same method used for the
        central forecast.
    horizon : int
        Steps ahead, with ``n - horizon >= 3``.

    Returns
    -------
    ndarray
        The ``n - horizon`` errors in time order.
    """
    _check_method(method)
    x = np.asarray(score_series, dtype=float)
    h = int(horizon)
    if h < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    if x.size - h < 3:
        raise InsufficientDataError(
            f"need at least horizon + 3 = {h + 3} scores, got {x.size}"
        )
    table = _prefix_forecast_table(x, method, h)
    targets = x[h:]
    return targets - table[: x.size - h, h - 1]


@dataclass(frozen=True)
class ErrorPool:
    """In-sample forecast-error pools for every horizon and component.

    ``primary[h - 1]`` is an ``(n - h, r)`` array whose column ``k`` is
    the horizon-``h`` pool of primary component ``k``; ``residual``
    holds the same layout for the residual-stage components.
    """

    max_horizon: int
    primary: tuple
    residual: tuple

    def primary_slice(self, horizon, component):
        return self.primary[horizon - 1][:, component]

    def residual_slice(self, horizon, component):
        return self.residual[horizon - 1][:, component]


def build_error_pools(
    fit, max_horizon, primary_method="random_walk_drift", residual_method="ar_aic"
):
    """Error pools for all components of a fit, horizons ``1 .. max_horizon``.

    Equivalent to calling :func:`build_error_pool` per component and
    horizon, but each prefix is refit only once for all horizons.
    """
    _check_method(primary_method)
    _check_method(residual_method)
    h_max = int(max_horizon)
    n = fit.n
    if h_max < 1:
        raise DomainError(f"max_horizon must be at least 1, got {max_horizon}")
    if n - h_max < 3:
        raise InsufficientDataError(
            f"need at least max_horizon + 3 = {h_max + 3} curves, got {n}"
        )

    def pools_for(scores, method):
        k = scores.shape[1]
        tables = [
            _prefix_forecast_table(scores[:, j], method, h_max) for j in range(k)
        ]
        out = []
        for h in range(1, h_max + 1):
            errors = np.empty((n - h, k))
            for j in range(k):
                errors[:, j] = scores[h:, j] - tables[j][: n - h, h - 1]
            out.append(errors)
        return tuple(out)

    return ErrorPool(
        max_horizon=h_max,
        primary=pools_for(fit.primary_scores, primary_method),
        residual=pools_for(fit.residual_scores, residual_method),
    )


def bootstrap_scores(central, pool, n_samples, rng_seed):
    """Score draws: the central forecast plus resampled pool errors.

    Draws are ``central + pool[i]`` with ``i`` uniform with replacement,
    so shifting every pool entry by a constant shifts every draw by the
    same constant.

    Parameters
    ----------
    central : float
        Central forecast for the target horizon.
    pool : array_like
        Nonempty error pool.
    n_samples : int
    rng_seed : int or numpy.random.SeedSequence

    Returns
    -------
    ndarray
        ``n_samples`` draws.
    """
    errors = np.asarray(pool, dtype=float)
    if errors.ndim != 1 or errors.size == 0:
        raise PoolError("error pool must be a nonempty vector")
    b = int(n_samples)
    if b < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    rng = np.random.default_rng(rng_seed)
    return float(central) + errors[rng.integers(0, errors.size, b)]


def bootstrap_residual_curves(final_residuals, n_samples, rng_seed):
    """Whole-curve resample of the final residuals.

    Each draw is one complete row, so the cross-age dependence of the
    residuals is preserved.
    """
    residuals = np.asarray(final_residuals, dtype=float)
    if residuals.ndim != 2 or residuals.shape[0] == 0:
        raise PoolError("final residuals must be a nonempty matrix of curves")
    b = int(n_samples)
    if b < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    rng = np.random.default_rng(rng_seed)
    return residuals[rng.integers(0, residuals.shape[0], b)]


@dataclass(frozen=True)
class BootstrapForecast:
    """Bootstrap forecast of one death-count curve.

    ``samples`` holds the ``n_samples`` bootstrapped curves; ``lower``
    and ``upper`` map each nominal level to its pointwise empirical
    quantile bounds, taken at ``(1 - level) / 2`` and
    ``1 - (1 - level) / 2`` with linear interpolation.
    """

    horizon: int
    grid: np.ndarray
    radix: float
    point: np.ndarray
    samples: np.ndarray
    levels: tuple
    lower: dict
    upper: dict
    rng_seed: object = None


def _check_levels(levels):
    out = tuple(float(l) for l in levels)
    if not out:
        raise ConfigurationError("at least one nominal level is required")
    for level in out:
        if not 0.0 < level < 1.0:
            raise ConfigurationError(f"levels must lie strictly in (0, 1), got {level}")
    return out


def assemble_forecast(
    fit,
    horizon,
    n_samples=1000,
    levels=(0.8, 0.95),
    rng_seed=0,
    primary_method="random_walk_drift",
    residual_method="ar_aic",
    error_pool=None,
):
    """Assemble the bootstrap forecast of the curve ``horizon`` steps ahead.

    One generator seeded from ``rng_seed`` drives all draws in the order
    documented in the module docstring, so a given ``(fit, horizon,
    n_samples, rng_seed)`` always yields the same replicates.

    Parameters
    ----------
    fit : DfmFit
    horizon : int
        Steps ahead, with ``fit.n - horizon >= 3``.
    n_samples : int
        Number of bootstrap replicates.
    levels : iterable of float
        Nominal coverage levels, each strictly between 0 and 1.
    rng_seed : int or numpy.random.SeedSequence
    primary_method, residual_method : str
        Forecasters for the two score groups.
    error_pool : ErrorPool, optional
        Reuse pools built by :func:`build_error_pools`; they must cover
        ``horizon``.

    Returns
    -------
    BootstrapForecast
    """
    _check_method(primary_method)
    _check_method(residual_method)
    h = int(horizon)
    b = int(n_samples)
    if h < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    if b < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    if fit.n - h < 3:
        raise InsufficientDataError(
            f"need at least horizon + 3 = {h + 3} curves, got {fit.n}"
        )
    levels = _check_levels(levels)
    if error_pool is None:
        error_pool = build_error_pools(
            fit, h, primary_method=primary_method, residual_method=residual_method
        )
    elif error_pool.max_horizon < h:
        raise PoolError(
            f"error pool covers horizons up to {error_pool.max_horizon}, need {h}"
        )

    rng = np.random.default_rng(rng_seed)
    clr_point = fit.mean_curve.copy()
    clr_samples = np.tile(fit.mean_curve, (b, 1))

    for k in range(fit.n_primary):
        central = _forecast_any_length(fit.primary_scores[:, k], primary_method, h)[-1]
        pool = error_pool.primary_slice(h, k)
        draws = central + pool[rng.integers(0, pool.size, b)]
        clr_point += central * fit.primary_basis.functions[k]
        clr_samples += np.outer(draws, fit.primary_basis.functions[k])

    for k in range(fit.n_residual):
        central = _forecast_any_length(fit.residual_scores[:, k], residual_method, h)[-1]
        pool = error_pool.residual_slice(h, k)
        draws = central + pool[rng.integers(0, pool.size, b)]
        clr_point += central * fit.residual_basis.functions[k]
        clr_samples += np.outer(draws, fit.residual_basis.functions[k])

    rows = rng.integers(0, fit.n, b)
    clr_samples += fit.final_residuals[rows]

    point = inverse_clr(clr_point, fit.grid, fit.radix)
    samples = inverse_clr(clr_samples, fit.grid, fit.radix)
    lower = {}
    upper = {}
    for level in levels:
        alpha = (1.0 - level) / 2.0
        lower[level] = np.quantile(samples, alpha, axis=0)
        upper[level] = np.quantile(samples, 1.0 - alpha, axis=0)
    return BootstrapForecast(
        horizon=h,
        grid=fit.grid,
        radix=fit.radix,
        point=point,
        samples=samples,
        levels=levels,
        lower=lower,
        upper=upper,
        rng_seed=rng_seed,
    )


def bootstrap_forecast_path(
    fit,
    max_horizon,
    n_samples=1000,
    levels=(0.8, 0.95),
    rng_seed=0,
    primary_method="random_walk_drift",
    residual_method="ar_aic",
):
    """Bootstrap forecasts for every horizon ``1 .. max_horizon``.

    Error pools are built once and shared; each horizon receives its own
    child of ``rng_seed`` (children are spawned in horizon order), so the
    path is reproducible as a whole and per horizon.

    Returns
    -------
    list of BootstrapForecast
    """
    h_max = int(max_horizon)
    if h_max < 1:
        raise DomainError(f"max_horizon must be at least 1, got {max_horizon}")
    pools = build_error_pools(
        fit, h_max, primary_method=primary_method, residual_method=residual_method
    )
    if isinstance(rng_seed, np.random.SeedSequence):
        root = rng_seed
    else:
        root = np.random.SeedSequence(rng_seed)
    seeds = root.spawn(h_max)
    return [
        assemble_forecast(
            fit,
            horizon=h,
            n_samples=n_samples,
            levels=levels,
            rng_seed=seeds[h - 1],
            primary_method=primary_method,
            residual_method=residual_method,
            error_pool=pools,
        )
        for h in range(1, h_max + 1)
    ]
