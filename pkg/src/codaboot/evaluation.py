"""Expanding-window evaluation of interval forecasts.

The harness walks an expanding training window over a death-count grid:
with ``n`` years, an initial window of ``w`` and a maximum horizon of
``H`` it fits on the first ``w, w+1, .., n-1`` years and forecasts up to
``min(H, years remaining)`` steps from each fit, so horizon ``h``
receives exactly ``n - w - h + 1`` forecasts.  Every forecast is scored
against the held-out curve by the empirical coverage probability (ECP):
one minus the fraction of (window, age) points falling strictly outside
the band.  The coverage probability difference (CPD) is the absolute gap
to the nominal level, and both are averaged across horizons for the
summary.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coda import ClrSeries, clr
from .dfm import component_counts, fit_dfm
from .bootstrap import bootstrap_forecast_path
from .errors import ConfigurationError, DomainError, ShapeError
from .leecarter import fit_lc, lc_bootstrap_path
from .lifetable import LifeTableGrid


def ecp(holdouts, lowers, uppers, horizon, max_horizon):
    """Empirical coverage probability of a batch of interval forecasts.

    Parameters
    ----------
    holdouts : array_like
        Observed curves, shape ``(n_windows, D)`` with
        ``n_windows = max_horizon + 1 - horizon``.
    lowers, uppers : array_like
        Matching interval bounds, same shape.
    horizon, max_horizon : int
        Identify where in the expanding-window scheme this batch sits;
        used to validate the expected number of windows.

    Returns
    -------
    float
        ``1 - misses / (n_windows * D)`` where a miss is an observation
        strictly below its lower bound or strictly above its upper
        bound; values on a bound count as covered.
    """
    h = int(horizon)
    h_max = int(max_horizon)
    if h < 1 or h > h_max:
        raise DomainError(f"horizon must be in [1, {h_max}], got {horizon}")
    d = np.atleast_2d(np.asarray(holdouts, dtype=float))
    lo = np.atleast_2d(np.asarray(lowers, dtype=float))
    up = np.atleast_2d(np.asarray(uppers, dtype=float))
    if d.shape != lo.shape or d.shape != up.shape:
        raise ShapeError("holdouts and bounds must share one shape")
    expected = h_max + 1 - h
    if d.shape[0] != expected:
        raise ShapeError(
            f"horizon {h} of a max-horizon-{h_max} scheme has {expected} windows,"
            f" got {d.shape[0]}"
        )
    misses = int(np.sum(d > up)) + int(np.sum(d < lo))
    return 1.0 - misses / d.size


def cpd(ecp_value, nominal):
    """Absolute difference between achieved and nominal coverage."""
    e = float(ecp_value)
    c = float(nominal)
    if not 0.0 <= e <= 1.0 or not 0.0 <= c <= 1.0:
        raise DomainError("coverage values must lie in [0, 1]")
    return abs(e - c)


def average_metrics(ecp_values, nominal):
    """Across-horizon mean ECP and mean CPD.

    The mean CPD always dominates the deviation of the mean ECP:
    ``mean |e_h - c| >= |mean e_h - c|``.
    """
    values = np.asarray(ecp_values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise DomainError("need a nonempty vector of per-horizon coverages")
    deviations = [cpd(e, nominal) for e in values]
    return float(values.mean()), float(np.mean(deviations))


@dataclass(frozen=True)
class MethodConfig:
    """One forecasting method entry of a backtest plan."""

    model: str = "dfm"
    components: object = "six"
    n_samples: int = 1000
    primary_method: str = "random_walk_drift"
    residual_method: str = "ar_aic"
    bandwidth: float | None = None
    # Fixed-count experiments keep the residual stage on so the component
    # budget never depends on a test decision mid-backtest.
    force_residual_stage: bool = True
    lc_resample: str = "entries"
    label: str = ""

    def resolved_label(self):
        if self.label:
            return self.label
        return f"{self.model}-{self.components}"


@dataclass(frozen=True)
class BacktestPlan:
    """Expanding-window layout plus the methods to run through it."""

    initial_window: int
    max_horizon: int = 20
    levels: tuple = (0.8, 0.95)
    configs: tuple = (MethodConfig(),)

    def __post_init__(self):
        if int(self.initial_window) < 10:
            raise ConfigurationError(
                f"initial_window must be at least 10, got {self.initial_window}"
            )
        if int(self.max_horizon) < 1:
            raise ConfigurationError(
                f"max_horizon must be at least 1, got {self.max_horizon}"
            )
        if not self.configs:
            raise ConfigurationError("plan needs at least one method config")
        for level in self.levels:
            if not 0.0 < float(level) < 1.0:
                raise ConfigurationError(
                    f"levels must lie strictly in (0, 1), got {level}"
                )


@dataclass(frozen=True)
class BacktestRow:
    """Per-horizon and summary coverage of one (method, level) pair."""

    label: str
    model: str
    components: str
    level: float
    horizons: np.ndarray
    window_counts: np.ndarray
    ecp_by_horizon: np.ndarray
    cpd_by_horizon: np.ndarray
    ecp_bar: float
    cpd_bar: float


@dataclass(frozen=True)
class BacktestReport:
    """All rows of one backtest run."""

    plan: BacktestPlan
    n_years: int
    rows: tuple


def _forecast_dfm(series, config, horizons, levels, rng_seed):
    counts = component_counts(config.components)
    fitted = fit_dfm(
        series,
        counts.r,
        counts.residual,
        bandwidth=config.bandwidth,
        force_residual_stage=config.force_residual_stage,
    )
    return bootstrap_forecast_path(
        fitted,
        max_horizon=horizons,
        n_samples=config.n_samples,
        levels=levels,
        rng_seed=rng_seed,
        primary_method=config.primary_method,
        residual_method=config.residual_method,
    )


def _forecast_lc(series, config, horizons, levels, rng_seed):
    counts = component_counts(config.components)
    fitted = fit_lc(series, n_components=counts.r)
    return lc_bootstrap_path(
        fitted,
        max_horizon=horizons,
        n_samples=config.n_samples,
        levels=levels,
        rng_seed=rng_seed,
        resample=config.lc_resample,
    )


# Maps a MethodConfig.model name to a callable producing the per-horizon
# forecasts of one window.  Tests may register additional entries to
# drive the harness with scripted bounds.
MODEL_FORECASTERS = {
    "dfm": _forecast_dfm,
    "lc": _forecast_lc,
}


def run_backtest(grid, plan, rng_seed=0, n_jobs=1):
    """Run every configured method through the expanding-window scheme.

    Randomness is pre-split per (config, window) from ``rng_seed``, so
    the report does not depend on ``n_jobs`` or on the order in which
    windows finish.

    Parameters
    ----------
    grid : LifeTableGrid
    plan : BacktestPlan
        Requires ``initial_window + max_horizon <= n_years``.
    rng_seed : int
    n_jobs : int
        Worker threads for the window loop; 1 runs serially.

    Returns
    -------
    BacktestReport
    """
    if not isinstance(grid, LifeTableGrid):
        raise DomainError("grid must be a LifeTableGrid")
    n = grid.n_years
    w0 = int(plan.initial_window)
    h_max = int(plan.max_horizon)
    if w0 + h_max > n:
        raise ConfigurationError(
            f"initial_window + max_horizon must not exceed {n} years,"
            f" got {w0} + {h_max}"
        )
    for config in plan.configs:
        if config.model not in MODEL_FORECASTERS:
            raise ConfigurationError(
                f"unknown model {config.model!r};"
                f" registered: {sorted(MODEL_FORECASTERS)}"
            )
    smallest_budget = w0 - min(h_max, n - w0)
    if smallest_budget < 3:
        raise ConfigurationError(
            "initial window too small for its horizons: needs"
            f" initial_window - min(max_horizon, n - initial_window) >= 3,"
            f" got {smallest_budget}"
        )

    series = clr(grid)
    windows = list(range(w0, n))
    root = np.random.SeedSequence(rng_seed)
    config_seqs = root.spawn(len(plan.configs))

    def run_window(config, window, seed):
        sub = series_prefix(series, window)
        horizons = min(h_max, n - window)
        forecaster = MODEL_FORECASTERS[config.model]
        return forecaster(sub, config, horizons, plan.levels, seed)

    tasks = []
    for ci, config in enumerate(plan.configs):
        window_seqs = config_seqs[ci].spawn(len(windows))
        for wi, window in enumerate(windows):
            tasks.append((ci, wi, plan.configs[ci], window, window_seqs[wi]))

    results = {}
    if int(n_jobs) > 1:
        with ThreadPoolExecutor(max_workers=int(n_jobs)) as pool:
            futures = {
                pool.submit(run_window, config, window, seed): (ci, wi)
                for ci, wi, config, window, seed in tasks
            }
            for future, key in futures.items():
                results[key] = future.result()
    else:
        for ci, wi, config, window, seed in tasks:
            results[(ci, wi)] = run_window(config, window, seed)

    rows = []
    for ci, config in enumerate(plan.configs):
        for level in plan.levels:
            level = float(level)
            ecp_by_h = np.empty(h_max)
            counts = np.empty(h_max, dtype=int)
            for h in range(1, h_max + 1):
                holdouts = []
                lowers = []
                uppers = []
                for wi, window in enumerate(windows):
                    if n - window < h:
                        continue
                    forecast = results[(ci, wi)][h - 1]
                    holdouts.append(grid.deaths[window + h - 1])
                    lowers.append(forecast.lower[level])
                    uppers.append(forecast.upper[level])
                counts[h - 1] = len(holdouts)
                # Horizon h collects one forecast per window that still has
                # h holdout years, which is (n - w0) + 1 - h of them.
                ecp_by_h[h - 1] = ecp(
                    np.array(holdouts), np.array(lowers), np.array(uppers), h, n - w0
                )
            cpd_by_h = np.abs(ecp_by_h - level)
            ecp_bar, cpd_bar = average_metrics(ecp_by_h, level)
            rows.append(
                BacktestRow(
                    label=config.resolved_label(),
                    model=config.model,
                    components=str(config.components),
                    level=level,
                    horizons=np.arange(1, h_max + 1),
                    window_counts=counts,
                    ecp_by_horizon=ecp_by_h,
                    cpd_by_horizon=cpd_by_h,
                    ecp_bar=ecp_bar,
                    cpd_bar=cpd_bar,
                )
            )
    return BacktestReport(plan=plan, n_years=n, rows=tuple(rows))


def series_prefix(series, length):
    """First ``length`` curves of a series as a series of their own."""
    return ClrSeries(
        years=series.years[:length],
        grid=series.grid,
        values=series.values[:length],
        radix=series.radix,
    )
