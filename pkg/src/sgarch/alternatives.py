"""Variance-targeting and three-step updated estimators.

Variance targeting replaces the kernel long-run curve with the sample
mean of y^2 (valid only when the long-run level is constant). The
three-step update applies one Newton step to the long-run curve and one
to the short-run parameters, with a dedicated covariance plug-in.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .asymptotics import AsymptoticCov, estimate_covariance, guarded_inverse
from .data import ReturnSeries
from .exceptions import DataError
from .kernel import KernelSpec, _grid_smooth
from .qmle import (EPS_OMEGA, FilteredSeries, FitResult, GarchParams,
                   _fit_usq, _validate_order, make_filtered)


@dataclass(frozen=True)
class VTResult:
    tau_bar: float
    params: GarchParams
    filtered: FilteredSeries
    cov: AsymptoticCov
    loglik: float
    converged: bool


@dataclass(frozen=True)
class ThreeStepResult:
    tau_check: np.ndarray
    params: GarchParams
    sigma_star: np.ndarray
    filtered: FilteredSeries
    n_fallback: int
    projected: bool


def fit_vt(series: ReturnSeries, order) -> VTResult:
    """Variance-targeting fit: long-run level set to mean(y^2), then the
    usual likelihood optimization on the rescaled series.

    Exactly scale-invariant: rescaling y leaves u = y/sqrt(tau_bar)
    unchanged. Only appropriate when the long-run variance is constant.
    """
    series.require_estimable()
    p, q = _validate_order(order)
    y = series.values
    tau_bar = float(np.mean(y ** 2))
    if tau_bar <= 0:
        raise DataError("mean of squared returns is zero; series is degenerate")
    u = y / np.sqrt(tau_bar)
    theta, mean_val, converged, _ = _fit_usq(u ** 2, p, q)
    params = GarchParams(p=p, q=q, theta=theta)
    filtered = make_filtered(u, params)
    return VTResult(
        tau_bar=tau_bar, params=params, filtered=filtered,
        cov=estimate_covariance(filtered),
        loglik=float(mean_val * series.T), converged=converged,
    )


def _tau_newton(y: np.ndarray, tau_hat: np.ndarray, g_hat: np.ndarray,
                h: float) -> tuple[np.ndarray, int]:
    """One Newton step on the long-run curve at each grid point x = t/T.

    Uses plain kernel averages of the first and second tau-derivatives of
    l_t(tau) = log g_t + log tau + y_t^2/(tau g_t), evaluated at tau_hat:
      dl/dtau   =  1/tau - y^2/(tau^2 g)
      d2l/dtau2 = -1/tau^2 + 2 y^2/(tau^3 g)
    Points where the step is non-finite or non-positive keep tau_hat.
    """
    A = _grid_smooth(np.ones_like(y), h, "interior_only")
    B = _grid_smooth(y ** 2 / g_hat, h, "interior_only")
    avg1 = A / tau_hat - B / tau_hat ** 2
    avg2 = -A / tau_hat ** 2 + 2.0 * B / tau_hat ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_check = tau_hat - avg1 / avg2
    bad = ~np.isfinite(tau_check) | (tau_check <= 0)
    tau_check[bad] = tau_hat[bad]
    return tau_check, int(bad.sum())


def _project_closed_region(theta: np.ndarray) -> tuple[np.ndarray, bool]:
    proj = np.clip(theta, 0.0, None)
    total = proj.sum()
    if total > 1.0 - EPS_OMEGA:
        proj = proj * (1.0 - EPS_OMEGA) / total
    return proj, bool(np.max(np.abs(proj - theta)) > 1e-12)


def three_step_update(fit: FitResult, series: ReturnSeries,
                      spec: KernelSpec) -> ThreeStepResult:
    """Update a two-step fit by one Newton step on the long-run curve and
    one on the short-run parameters.

    The parameter step uses the centered score sum_t (psi_t - Gbar)(1 - eta_t^2)
    and Hessian sum_t psi_t psi_t' - T Gbar Gbar', both at the original
    parameter estimate but with residuals devolatilized by the updated
    curve. The result is projected back into the closed parameter region
    if the raw step leaves it.
    """
    if not fit.converged:
        raise DataError("three-step update requires a converged fit")
    if fit.longrun is None or fit.longrun.tau_hat.shape != series.values.shape:
        raise DataError("fit does not carry a long-run curve for this series")
    y = series.values
    T = series.T

    tau_check, n_fallback = _tau_newton(y, fit.longrun.tau_hat,
                                        fit.filtered.g_hat, spec.bandwidth)

    u_check = y / np.sqrt(tau_check)
    base = make_filtered(u_check, fit.params)
    psi = base.psi_hat
    g_bar = psi.mean(axis=0)
    score = (psi - g_bar).T @ (1.0 - base.eta_hat ** 2)
    hessian = psi.T @ psi - T * np.outer(g_bar, g_bar)
    step = guarded_inverse(hessian, "three-step Hessian") @ score
    theta_check, projected = _project_closed_region(fit.params.theta - step)

    params = GarchParams(p=fit.params.p, q=fit.params.q, theta=theta_check)
    filtered = make_filtered(u_check, params)
    result = ThreeStepResult(
        tau_check=tau_check, params=params, sigma_star=np.empty((0, 0)),
        filtered=filtered, n_fallback=n_fallback, projected=projected,
    )
    return dataclasses.replace(result,
                               sigma_star=sigma_star_plugin(result, filtered))


def sigma_star_plugin(three: ThreeStepResult,
                      filtered: FilteredSeries) -> np.ndarray:
    """Covariance plug-in for the three-step estimator.

    Sigma* = (kappa-1) J1*^-1 (J1* + J2*) J1*^-1 with J1* the centered
    second moment of psi and J2* = (omega^2/gamma^2) v v', where
    v = mean(1/g) psi_bar - mean(psi/g) and omega, gamma come from the
    updated parameters.
    """
    psi = filtered.psi_hat
    g = filtered.g_hat
    T = psi.shape[0]
    psi_bar = psi.mean(axis=0)
    centered = psi - psi_bar
    J1 = centered.T @ centered / T
    gamma = 1.0 - np.sum(three.params.beta)
    v = float(np.mean(1.0 / g)) * psi_bar - (psi / g[:, None]).mean(axis=0)
    J2 = (three.params.omega ** 2 / gamma ** 2) * np.outer(v, v)
    kappa = float(np.mean(filtered.eta_hat ** 4))
    J1_inv = guarded_inverse(J1, "J1_star")
    sigma = (kappa - 1.0) * J1_inv @ (J1 + J2) @ J1_inv
    return 0.5 * (sigma + sigma.T)
