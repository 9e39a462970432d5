"""Rolling-origin volatility forecasting and forecast evaluation.

Forecasts freeze the long-run level at its last in-sample estimate and
propagate the short-run recursion forward. Evaluation uses the QLIKE
loss with pairwise equal-accuracy tests against the best model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.stats

from .alternatives import fit_vt
from .data import ReturnSeries
from .exceptions import ConvergenceError, DataError, SGarchError
from .kernel import CVConfig, KernelSpec, estimate_tau, select_bandwidth_cv
from .qmle import (GarchParams, _theta_to_z, _validate_order, _z_to_theta,
                   fit_qmle)

MODEL_NAMES = ("sgarch", "sarch_q", "garch_vt", "ls_arch_q")
_ALLOWED_HORIZONS = (1, 5, 10, 22)
_ARCH_BUDGET = 0.999
_LOSS_FLOOR = 1e-300


@dataclass(frozen=True)
class ForecastConfig:
    t0: int = 1
    origin_start: int = 1500
    models: tuple = MODEL_NAMES
    q_arch: int = 5
    window_grid: tuple = tuple(range(50, 501, 50))
    lookback: int = 50
    order: tuple = (1, 1)
    h_reselect_every: int = 250

    def __post_init__(self):
        if self.t0 not in _ALLOWED_HORIZONS:
            raise ValueError(f"t0 must be one of {_ALLOWED_HORIZONS}")
        unknown = set(self.models) - set(MODEL_NAMES)
        if unknown:
            raise ValueError(f"unknown model names {sorted(unknown)}")
        if not self.models:
            raise ValueError("at least one model is required")
        if self.q_arch < 1:
            raise ValueError("q_arch must be >= 1")
        grid = tuple(self.window_grid)
        if not grid or list(grid) != sorted(set(grid)) or grid[0] < 1:
            raise ValueError("window_grid must be strictly increasing positive ints")
        if self.lookback < 1 or self.h_reselect_every < 1:
            raise ValueError("lookback and h_reselect_every must be >= 1")
        if self.origin_start < 1:
            raise ValueError("origin_start must be positive")
        _validate_order(self.order)
        if max(grid) >= self.origin_start:
            raise ValueError("window_grid values must be < origin_start")


def qlike_loss(realized_sq: float, forecast_sq: float) -> float:
    f = max(float(forecast_sq), _LOSS_FLOOR)
    return math.log(f) + float(realized_sq) / f


def garch_variance_forecast(params: GarchParams, u_sq, g, t0: int) -> float:
    """Multi-step short-run variance forecast from the end of the sample.

    Lags still inside the sample use observed u^2 and filtered g; lags
    beyond it use earlier forecasts (the conditional expectation of both
    u^2 and g).
    """
    if t0 < 1:
        raise ValueError("t0 must be >= 1")
    u_sq = np.asarray(u_sq, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    n = u_sq.size
    if n != g.size or n < max(params.q, params.p):
        raise ValueError("u_sq and g must share a length covering the lag order")
    fore: list[float] = []

    def u2_at(s: int) -> float:
        return float(u_sq[s - 1]) if s <= n else fore[s - n - 1]

    def g_at(s: int) -> float:
        return float(g[s - 1]) if s <= n else fore[s - n - 1]

    for j in range(1, t0 + 1):
        val = params.omega
        for i, a in enumerate(params.alpha, start=1):
            val += a * u2_at(n + j - i)
        for l, b in enumerate(params.beta, start=1):
            val += b * g_at(n + j - l)
        fore.append(float(val))
    return fore[-1]


def forecast_sgarch(series: ReturnSeries, order, spec: KernelSpec,
                    t0: int) -> float:
    """t0-step-ahead squared-return forecast from data up to the origin.

    The kernel long-run estimate uses only in-sample points (boundary
    pseudo-data is reflected from within the sample), is frozen at its
    last value, and multiplies the short-run forecast.
    """
    lr = estimate_tau(series, spec)
    fit = fit_qmle(series, lr, order)
    if not fit.converged:
        raise ConvergenceError(f"fit did not converge at origin T0={series.T}")
    g_f = garch_variance_forecast(fit.params, fit.filtered.u_hat ** 2,
                                  fit.filtered.g_hat, t0)
    return float(lr.tau_hat[-1] * g_f)


def forecast_garch_vt(series: ReturnSeries, order, t0: int) -> float:
    """Forecast from the variance-targeting fit: tau_bar times the
    short-run forecast."""
    vt = fit_vt(series, order)
    if not vt.converged:
        raise ConvergenceError(f"fit did not converge at origin T0={series.T}")
    g_f = garch_variance_forecast(vt.params, vt.filtered.u_hat ** 2,
                                  vt.filtered.g_hat, t0)
    return float(vt.tau_bar * g_f)


def _fit_arch(values: np.ndarray, q: int) -> tuple[float, np.ndarray, bool]:
    """Free-intercept ARCH(q) likelihood fit on one window, conditioning
    on the first q observations. Returns (c, a, converged)."""
    w_sq = np.asarray(values, dtype=np.float64) ** 2
    n = w_sq.size
    if n < q + 10:
        raise DataError(f"window of {n} points is too short for ARCH({q})")
    mean_sq = float(w_sq.mean())
    if mean_sq <= 0:
        raise DataError("window is identically zero; ARCH fit undefined")
    lagmat = np.column_stack([w_sq[q - 1 - i:n - 1 - i] for i in range(q)])
    target = w_sq[q:]
    budget = _ARCH_BUDGET - 1e-6 * q

    def objective(z):
        c = mean_sq * math.exp(float(np.clip(z[0], -60.0, 60.0)))
        a, jac_a = _z_to_theta(z[1:], budget)
        sig = c + lagmat @ a
        w = (sig - target) / sig ** 2
        grad_c = float(w.mean()) * c
        grad_a = (lagmat.T @ w / target.size) @ jac_a
        val = float(np.mean(np.log(sig) + target / sig))
        return val, np.concatenate([[grad_c], grad_a])

    starts = []
    for a_tot in (0.4, 0.05):
        a0 = np.full(q, a_tot / q)
        z0 = math.log(max(1.0 - a_tot, 1e-3))
        starts.append(np.concatenate([[z0], _theta_to_z(a0, budget)]))

    best = None
    for z0 in starts:
        res = scipy.optimize.minimize(objective, z0, jac=True, method="BFGS",
                                      options={"maxiter": 200, "gtol": 1e-7})
        if best is None or res.fun < best.fun:
            best = res
    c = mean_sq * math.exp(float(np.clip(best.x[0], -60.0, 60.0)))
    a, _ = _z_to_theta(best.x[1:], budget)
    converged = bool(best.success) or float(np.max(np.abs(best.jac))) < 1e-5
    return c, a, converged


def _arch_forecast(tail_sq: np.ndarray, c: float, a: np.ndarray,
                   t0: int) -> float:
    """Multi-step ARCH forecast; future squares replaced by their forecasts."""
    hist = [float(v) for v in tail_sq]
    q = a.size
    for _ in range(t0):
        hist.append(c + sum(a[i] * hist[-1 - i] for i in range(q)))
    return hist[-1]


def select_ls_window(values: np.ndarray, q: int, window_grid, lookback: int,
                     _cache=None) -> tuple[int, np.ndarray]:
    """Trailing-window length minimizing the one-step QLIKE over the most
    recent origins. Ties break to the smallest window."""
    values = np.asarray(values, dtype=np.float64)
    n0 = values.size
    grid = tuple(window_grid)
    if n0 - lookback - max(grid) < 0:
        raise DataError(
            f"need at least lookback + max window = {lookback + max(grid)} "
            f"points before the origin, got {n0}")
    totals = np.zeros(len(grid))
    for gi, win in enumerate(grid):
        for n in range(n0 - lookback, n0):
            key = (n, win)
            loss = None if _cache is None else _cache.get(key)
            if loss is None:
                c, a, _ = _fit_arch(values[n - win:n], q)
                f = _arch_forecast(values[n - q:n] ** 2, c, a, 1)
                loss = qlike_loss(values[n] ** 2, f)
                if _cache is not None:
                    _cache[key] = loss
            totals[gi] += loss
    return grid[int(np.argmin(totals))], totals


def forecast_ls_arch(series: ReturnSeries, q: int, window_grid, lookback: int,
                     t0: int) -> float:
    """Forecast from a stationary ARCH(q) fitted on the last T-tilde
    points, with T-tilde tuned on recent one-step performance."""
    values = series.values
    win, _ = select_ls_window(values, q, window_grid, lookback)
    c, a, _ = _fit_arch(values[values.size - win:], q)
    return _arch_forecast(values[values.size - q:] ** 2, c, a, t0)


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    lag: int


def dm_test(loss_a, loss_b, lag: int) -> DmResult:
    """Equal-predictive-accuracy test on the loss differential a - b.

    Rectangular-weight long-run variance with the given lag; positive
    statistics mean the first loss stream is worse. A truncation lag
    beyond the sample is shortened; a non-positive variance estimate
    falls back to the lag-0 term.
    """
    a = np.asarray(loss_a, dtype=np.float64)
    b = np.asarray(loss_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("loss streams must be equal-length 1-D with >= 2 points")
    if lag < 0:
        raise ValueError("lag must be >= 0")
    d = a - b
    n = d.size
    lag = min(lag, n - 1)
    if np.all(d == 0):
        return DmResult(statistic=0.0, p_value=1.0, lag=lag)
    dbar = float(d.mean())
    dc = d - dbar
    gamma0 = float(dc @ dc) / n
    v = gamma0
    for j in range(1, lag + 1):
        v += 2.0 * float(dc[j:] @ dc[:-j]) / n
    if v <= 0:
        v = gamma0
    if v <= 0:
        return DmResult(statistic=math.copysign(math.inf, dbar), p_value=0.0,
                        lag=lag)
    stat = dbar / math.sqrt(v / n)
    return DmResult(statistic=float(stat),
                    p_value=float(2.0 * scipy.stats.norm.sf(abs(stat))),
                    lag=lag)


@dataclass(frozen=True)
class ModelForecastRow:
    model: str
    qlike: float
    n_fail: int
    valid: bool
    dm_statistic: float | None
    dm_p_value: float | None


@dataclass(frozen=True)
class QlikeReport:
    t0: int
    origin_start: int
    n_origins: int
    best_model: str | None
    rows: tuple


def qlike_report(series: ReturnSeries, cfg: ForecastConfig) -> QlikeReport:
    """Rolling-origin QLIKE table with equal-accuracy tests.

    Every origin refits each model on the data up to that origin; the
    kernel bandwidth is re-selected every cfg.h_reselect_every origins
    and reused in between. A model failing at more than 10% of origins
    has its column marked invalid. The best (lowest-QLIKE) valid model is
    compared with every other valid model on the origins where both
    produced forecasts.
    """
    values = series.values
    T = series.T
    t0 = cfg.t0
    if cfg.origin_start + t0 > T:
        raise DataError(
            f"series of length {T} cannot support origin_start={cfg.origin_start} "
            f"with horizon {t0}")
    if "ls_arch_q" in cfg.models:
        need = max(cfg.window_grid) + cfg.lookback
        if need > cfg.origin_start:
            raise DataError(
                f"ls_arch_q needs origin_start >= {need}, got {cfg.origin_start}")

    origins = range(cfg.origin_start, T - t0 + 1)
    n_origins = len(origins)
    losses = {m: np.full(n_origins, np.nan) for m in cfg.models}
    h_state: dict[str, float] = {}
    arch_cache: dict = {}

    def semiparametric_forecast(model: str, prefix: ReturnSeries,
                                refresh_h: bool) -> float:
        order = cfg.order if model == "sgarch" else (0, cfg.q_arch)
        if refresh_h or model not in h_state:
            h, _ = select_bandwidth_cv(prefix, CVConfig(pilot_order=order))
            h_state[model] = h
        return forecast_sgarch(prefix, order, KernelSpec(bandwidth=h_state[model]), t0)

    for oi, n0 in enumerate(origins):
        prefix = ReturnSeries(values[:n0], label=f"{series.label}[:{n0}]")
        refresh_h = (n0 - cfg.origin_start) % cfg.h_reselect_every == 0
        realized_sq = float(values[n0 + t0 - 1] ** 2)
        for model in cfg.models:
            try:
                if model in ("sgarch", "sarch_q"):
                    f = semiparametric_forecast(model, prefix, refresh_h)
                elif model == "garch_vt":
                    f = forecast_garch_vt(prefix, cfg.order, t0)
                else:
                    win, _ = select_ls_window(values[:n0], cfg.q_arch,
                                              cfg.window_grid, cfg.lookback,
                                              _cache=arch_cache)
                    c, a, _ = _fit_arch(values[n0 - win:n0], cfg.q_arch)
                    f = _arch_forecast(values[n0 - cfg.q_arch:n0] ** 2, c, a, t0)
                losses[model][oi] = qlike_loss(realized_sq, f)
            except SGarchError:
                pass

    stats = {}
    for model in cfg.models:
        ok = np.isfinite(losses[model])
        n_fail = int(n_origins - ok.sum())
        valid = n_fail <= 0.10 * n_origins
        qlike = float(np.mean(losses[model][ok])) if ok.any() else math.inf
        stats[model] = (qlike, n_fail, valid)

    valid_models = [m for m in cfg.models if stats[m][2]]
    best = min(valid_models, key=lambda m: stats[m][0]) if valid_models else None

    rows = []
    for model in cfg.models:
        qlike, n_fail, valid = stats[model]
        dm_stat = dm_p = None
        if best is not None and valid and model != best:
            both = np.isfinite(losses[model]) & np.isfinite(losses[best])
            if both.sum() >= 2:
                dm = dm_test(losses[model][both], losses[best][both], lag=t0 - 1)
                dm_stat, dm_p = dm.statistic, dm.p_value
        rows.append(ModelForecastRow(model=model, qlike=qlike, n_fail=n_fail,
                                     valid=valid, dm_statistic=dm_stat,
                                     dm_p_value=dm_p))
    return QlikeReport(t0=t0, origin_start=cfg.origin_start,
                       n_origins=n_origins, best_model=best, rows=tuple(rows))
