"""Kernel estimation of the long-run variance component and CV bandwidth
selection.

The grid estimator is the unnormalized form tau_hat(x) = (1/T) sum_s
K_h(x - s/T) y_s^2; boundary correction mirrors the sample into pseudo-data
at both ends before smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.stats

from .data import ReturnSeries, sample_variance
from .exceptions import DataError
from .qmle import _fit_usq, _validate_order
from .recursions import garch_values_only

BOUNDARY_MODES = ("reflection", "interior_only")


def _epanechnikov(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)


_KERNELS = {"epanechnikov": _epanechnikov}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth; support is [-1, 1], h must be in (0, 0.5)."""

    kind: str = "epanechnikov"
    bandwidth: float = 0.1

    def __post_init__(self):
        if self.kind not in _KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choices: {sorted(_KERNELS)}")
        h = float(self.bandwidth)
        if not (0.0 < h < 0.5):
            raise ValueError(f"bandwidth must lie in (0, 0.5), got {h}")
        object.__setattr__(self, "bandwidth", h)

    def moment(self, r: int) -> float:
        val, _ = scipy.integrate.quad(lambda x: x ** r * _KERNELS[self.kind](x), -1, 1)
        return val

    def square_integral(self) -> float:
        val, _ = scipy.integrate.quad(lambda x: _KERNELS[self.kind](x) ** 2, -1, 1)
        return val


@dataclass(frozen=True)
class LongRunFit:
    """Per-index long-run variance estimates with bandwidth provenance."""

    tau_hat: np.ndarray
    h_used: float
    boundary: str


@dataclass(frozen=True)
class CVConfig:
    """Constants of the two-step cross-validation bandwidth procedure."""

    lambda0: float = 2.0 / 7.0
    c_min_factor: float = 0.5
    c_max_factor: float = 3.0
    grid_size: int = 25
    pilot_order: tuple = (1, 1)

    def __post_init__(self):
        if not (0.25 < self.lambda0 < 0.5):
            raise ValueError(f"lambda0 must lie in (1/4, 1/2), got {self.lambda0}")
        if not (0 < self.c_min_factor < self.c_max_factor):
            raise ValueError("need 0 < c_min_factor < c_max_factor")
        if self.grid_size < 1:
            raise ValueError("grid_size must be positive")
        _validate_order(self.pilot_order)


def kernel_eval(spec: KernelSpec, x) -> float:
    """Evaluate the kernel K(x); zero outside [-1, 1]."""
    out = _KERNELS[spec.kind](x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def _grid_smooth(vals: np.ndarray, h: float, boundary: str) -> np.ndarray:
    """(1/T) sum_s K_h((t-s)/T) vals_s on the grid t=1..T.

    With boundary="reflection" the input is extended by mirrored pseudo-data
    (the undefined index s=0 contributes zero); "interior_only" pads zeros.
    """
    T = vals.shape[0]
    Th = T * h
    m = int(math.floor(Th))
    if Th < 2.0 or m < 1:
        raise DataError(f"bandwidth {h} too small for T={T}: window is empty")
    if boundary == "reflection":
        if m >= T:
            raise DataError(f"bandwidth {h} too large for reflection with T={T}")
        # pseudo index s=-k mirrors vals[k-1]; the s=0 slot is undefined and
        # contributes zero
        left = np.concatenate([vals[:m - 1][::-1], [0.0]]) if m >= 2 else np.array([0.0])
        right = vals[T - m - 1:T - 1][::-1]
        ext = np.concatenate([left, vals, right])
    elif boundary == "interior_only":
        pad = np.zeros(m)
        ext = np.concatenate([pad, vals, pad])
    else:
        raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")
    d = np.arange(-m, m + 1, dtype=np.float64)
    w = _epanechnikov(d / Th) / h
    # w is symmetric, so convolution equals correlation
    return np.convolve(ext, w, mode="valid") / T


def estimate_tau(series: ReturnSeries, spec: KernelSpec,
                 boundary: str = "reflection") -> LongRunFit:
    """Kernel estimate of the long-run variance at every grid point t/T.

    boundary="reflection" mirrors the sample into [Th] pseudo-points beyond
    each end, which coincides with "interior_only" at all indices further
    than [Th] from the ends.
    """
    y2 = series.values ** 2
    tau = _grid_smooth(y2, spec.bandwidth, boundary)
    return LongRunFit(tau_hat=tau, h_used=spec.bandwidth, boundary=boundary)


def tau_at(series: ReturnSeries, spec: KernelSpec, x: float) -> float:
    """Pointwise estimate (1/T) sum_s K_h(x - s/T) y_s^2 at an arbitrary x."""
    T = series.T
    h = spec.bandwidth
    s = np.arange(1, T + 1, dtype=np.float64)
    w = _KERNELS[spec.kind]((x - s / T) / h) / h
    return float(w @ (series.values ** 2) / T)


def _bartlett_lrv(z: np.ndarray) -> float:
    """Bartlett-weighted long-run variance with lag truncation floor(T^(1/3))."""
    T = z.shape[0]
    L = int(math.floor(T ** (1.0 / 3.0)))
    zc = z - z.mean()
    omega = float(zc @ zc) / T
    for j in range(1, L + 1):
        gamma = float(zc[j:] @ zc[:-j]) / T
        omega += 2.0 * (1.0 - j / (L + 1.0)) * gamma
    return omega


def tau_pointwise_ci(fit: LongRunFit, series: ReturnSeries, x: float,
                     level: float = 0.95) -> tuple[float, float]:
    """Plug-in confidence interval for tau(x) at an interior point.

    The variance is tau_hat(x)^2 * int(K^2) * Omega_z with Omega_z a
    Bartlett-weighted long-run variance of u_hat_t^2 - 1; the smoothing bias
    is omitted on undersmoothing grounds.
    """
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    h = fit.h_used
    if not (h <= x <= 1.0 - h):
        raise DataError(f"x={x} is within h={h} of the boundary")
    spec = KernelSpec(bandwidth=h)
    tau_x = tau_at(series, spec, x)
    tau_grid = np.asarray(fit.tau_hat)
    if np.any(tau_grid <= 0):
        raise DataError("tau_hat must be strictly positive to form residuals")
    z = series.values ** 2 / tau_grid - 1.0
    v_hat = tau_x ** 2 * spec.square_integral() * _bartlett_lrv(z)
    half = scipy.stats.norm.ppf(0.5 + level / 2.0) * math.sqrt(
        max(v_hat, 0.0) / (series.T * h))
    return tau_x - half, tau_x + half


def loo_correction(series: ReturnSeries, h: float) -> np.ndarray:
    """Weight mass each y_t contributes to its own reflected tau_hat_t.

    Subtracting values * this / T from tau_hat gives the leave-one-out
    estimate; the mirrored copies of y_t are excluded along with y_t itself.
    """
    T = series.T
    Th = T * h
    t = np.arange(1, T + 1, dtype=np.float64)
    k0 = _epanechnikov(np.zeros(1))[0]
    right = _epanechnikov(2.0 * (T - t) / Th)
    # the right mirror pivots at T, so y_T itself has no pseudo-copy
    right[-1] = 0.0
    c = k0 + _epanechnikov(2.0 * t / Th) + right
    return c / h


def cv_criterion(series: ReturnSeries, h: float, g_pilot: np.ndarray) -> float:
    """CV(h) = sum_t {y_t^2 / (tau_loo_t(h) g_pilot_t) - 1}^2."""
    y2 = series.values ** 2
    tau = _grid_smooth(y2, h, "reflection")
    tau_loo = tau - y2 * loo_correction(series, h) / series.T
    if np.any(tau_loo <= 0):
        return float("inf")
    return float(np.sum((y2 / (tau_loo * g_pilot) - 1.0) ** 2))


def bandwidth_grid(series: ReturnSeries, cfg: CVConfig) -> np.ndarray:
    """Log-spaced candidate bandwidths on [c_min T^-l0, c_max T^-l0]."""
    T = series.T
    scale = sample_variance(series) ** cfg.lambda0
    if scale <= 0:
        raise DataError("degenerate series: zero sample variance")
    base = T ** (-cfg.lambda0)
    lo = cfg.c_min_factor * scale * base
    hi = min(cfg.c_max_factor * scale * base, 0.4999)
    lo = max(lo, 2.0 / T + 1e-12)
    if hi <= lo:
        lo = hi / (cfg.c_max_factor / cfg.c_min_factor)
    return np.geomspace(lo, hi, cfg.grid_size)


def select_bandwidth_cv(series: ReturnSeries, cfg: CVConfig = CVConfig()
                        ) -> tuple[float, list[tuple[float, float]]]:
    """Two-step cross-validation bandwidth.

    Step 1 smooths with the pilot bandwidth T^(-lambda0) and fits the pilot
    GARCH model to the devolatilized data; step 2 minimizes the leave-one-out
    criterion over a log-spaced grid, ties broken toward the smaller h.

    Returns (h_cv, [(h, CV(h)), ...]).
    """
    series.require_estimable()
    p, q = _validate_order(cfg.pilot_order)
    T = series.T
    h0 = min(T ** (-cfg.lambda0), 0.4999)
    pilot = estimate_tau(series, KernelSpec(bandwidth=h0), "reflection")
    if np.any(pilot.tau_hat <= 0):
        raise DataError("pilot long-run estimate hit zero; series too sparse")
    u0_sq = series.values ** 2 / pilot.tau_hat
    theta0, _, _, _ = _fit_usq(np.ascontiguousarray(u0_sq), p, q)
    g_pilot = garch_values_only(np.ascontiguousarray(u0_sq),
                                np.ascontiguousarray(theta0[:q]),
                                np.ascontiguousarray(theta0[q:]))
    grid = bandwidth_grid(series, cfg)
    curve = [(float(h), cv_criterion(series, float(h), g_pilot)) for h in grid]
    values = np.array([cv for _, cv in curve])
    if not np.any(np.isfinite(values)):
        raise DataError("CV criterion is infinite on the whole grid")
    h_cv = curve[int(np.argmin(values))][0]
    return h_cv, curve
