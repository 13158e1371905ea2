"""Principal-component baseline with a full-refit residual bootstrap.

The model is the classic one: centre the clr matrix, take its leading
singular triplets, and call the right singular vectors the age components
and the scaled left singular vectors the period scores.  Prediction
uncertainty comes from resampling the entries of the residual matrix,
adding them back onto the fitted values, refitting the whole
decomposition (mean included) on each pseudo-sample, extrapolating the
refit scores with the additive-trend exponential smoother, and reading
pointwise quantiles off the back-transformed curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coda import ClrSeries, inverse_clr
from .errors import ConfigurationError, DomainError, RankError
from .bootstrap import BootstrapForecast, _check_levels, _fit_ets

RESAMPLE_MODES = ("entries", "rows")


@dataclass(frozen=True)
class LcFit:
    """Truncated singular-value decomposition of a centred clr matrix.

    ``mean_curve + scores @ components + residuals`` reproduces the
    input curves exactly.  Components are rows of ``components``,
    oriented so each one's entry of largest magnitude is positive.
    """

    years: np.ndarray
    grid: np.ndarray
    radix: float
    mean_curve: np.ndarray
    components: np.ndarray
    scores: np.ndarray
    residuals: np.ndarray

    @property
    def n(self) -> int:
        return self.years.size

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def reconstruction(self):
        return self.mean_curve + self.scores @ self.components + self.residuals


def _decompose(values, n_components):
    mean_curve = values.mean(axis=0)
    centered = values - mean_curve
    left, singular, right = np.linalg.svd(centered, full_matrices=False)
    components = right[:n_components].copy()
    scores = left[:, :n_components] * singular[:n_components]
    for k in range(n_components):
        peak = np.argmax(np.abs(components[k]))
        if components[k, peak] < 0.0:
            components[k] = -components[k]
            scores[:, k] = -scores[:, k]
    residuals = centered - scores @ components
    return mean_curve, components, scores, residuals


def fit_lc(series, n_components=1):
    """Fit the principal-component baseline to a clr curve series.

    Parameters
    ----------
    series : ClrSeries
    n_components : int
        Number of singular triplets kept, between 1 and ``min(n, D)``.

    Returns
    -------
    LcFit
    """
    if not isinstance(series, ClrSeries):
        raise DomainError("series must be a ClrSeries")
    k = int(n_components)
    limit = min(series.values.shape)
    if k < 1 or k > limit:
        raise RankError(f"n_components must be in [1, {limit}], got {n_components}")
    mean_curve, components, scores, residuals = _decompose(series.values, k)
    return LcFit(
        years=series.years,
        grid=series.grid,
        radix=series.radix,
        mean_curve=mean_curve,
        components=components,
        scores=scores,
        residuals=residuals,
    )


def _extrapolate_scores(scores, horizons):
    out = np.empty((horizons, scores.shape[1]))
    for k in range(scores.shape[1]):
        level, trend = _fit_ets(scores[:, k])
        out[:, k] = level + trend * np.arange(1, horizons + 1)
    return out


def lc_bootstrap_path(
    fit,
    max_horizon,
    n_samples=1000,
    levels=(0.8, 0.95),
    rng_seed=0,
    resample="entries",
):
    """Bootstrap forecasts of the baseline for horizons ``1 .. max_horizon``.

    Each replicate, in order: resample the residual matrix (entrywise
    i.i.d. from the pooled entries by default, or whole rows with
    ``resample="rows"``), add it to the fitted values, refit the
    decomposition on the pseudo-sample, extrapolate every refit score
    series, and rebuild the forecast curves.  One generator seeded from
    ``rng_seed`` is consumed replicate by replicate, and the residual
    draw does not depend on the horizon, so the replicates for horizon
    ``h`` are identical whichever ``max_horizon >= h`` they were produced
    under.

    Returns
    -------
    list of BootstrapForecast
    """
    h_max = int(max_horizon)
    b = int(n_samples)
    if h_max < 1:
        raise DomainError(f"max_horizon must be at least 1, got {max_horizon}")
    if b < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    if resample not in RESAMPLE_MODES:
        raise ConfigurationError(
            f"resample must be one of {RESAMPLE_MODES}, got {resample!r}"
        )
    levels = _check_levels(levels)

    n, d = fit.residuals.shape
    k = fit.n_components
    fitted = fit.mean_curve + fit.scores @ fit.components
    pooled = fit.residuals.ravel()
    rng = np.random.default_rng(rng_seed)

    clr_samples = np.empty((h_max, b, d))
    for rep in range(b):
        if resample == "entries":
            draws = pooled[rng.integers(0, pooled.size, (n, d))]
        else:
            draws = fit.residuals[rng.integers(0, n, n)]
        pseudo = fitted + draws
        mean_curve, components, scores, _ = _decompose(pseudo, k)
        future = _extrapolate_scores(scores, h_max)
        clr_samples[:, rep, :] = mean_curve + future @ components

    point_scores = _extrapolate_scores(fit.scores, h_max)
    clr_points = fit.mean_curve + point_scores @ fit.components

    out = []
    for h in range(1, h_max + 1):
        samples = inverse_clr(clr_samples[h - 1], fit.grid, fit.radix)
        point = inverse_clr(clr_points[h - 1], fit.grid, fit.radix)
        lower = {}
        upper = {}
        for level in levels:
            alpha = (1.0 - level) / 2.0
            lower[level] = np.quantile(samples, alpha, axis=0)
            upper[level] = np.quantile(samples, 1.0 - alpha, axis=0)
        out.append(
            BootstrapForecast(
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
        )
    return out


def lc_bootstrap_forecast(
    fit, horizon, n_samples=1000, levels=(0.8, 0.95), rng_seed=0, resample="entries"
):
    """Bootstrap forecast of the baseline ``horizon`` steps ahead.

    Equal to the last element of :func:`lc_bootstrap_path` run to the
    same horizon with the same seed.
    """
    return lc_bootstrap_path(
        fit,
        max_horizon=horizon,
        n_samples=n_samples,
        levels=levels,
        rng_seed=rng_seed,
        resample=resample,
    )[-1]
