"""Score test for linear parameter constraints and the squared-residual
portmanteau test, both with estimation-effect-corrected covariances."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .asymptotics import COND_ERROR, COND_WARN, estimate_covariance, guarded_inverse
from .exceptions import DataError, SingularCovarianceError
from .kernel import LongRunFit
from .qmle import FitResult, LinearConstraint, fit_qmle_constrained

DEFAULT_LAGS = (6, 9, 12)
REPORT_LEVELS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    reject_at: dict


@dataclass(frozen=True)
class PortmanteauInternals:
    rho_hat: np.ndarray
    D_hat: np.ndarray
    H_hat: np.ndarray
    F_hat: np.ndarray
    SigmaP1_hat: np.ndarray
    SigmaP2_hat: np.ndarray
    SigmaP_hat: np.ndarray


def _chi2_report(stat: float, df: int) -> TestReport:
    p = float(scipy.stats.chi2.sf(stat, df))
    return TestReport(
        statistic=float(stat), df=int(df), p_value=p,
        reject_at={lvl: p < lvl for lvl in REPORT_LEVELS},
    )


def _pd_inverse(mat: np.ndarray, name: str) -> np.ndarray:
    """Inverse through an eigendecomposition, requiring positive definiteness."""
    sym = 0.5 * (mat + mat.T)
    eigval, eigvec = np.linalg.eigh(sym)
    if eigval[0] <= 0:
        raise SingularCovarianceError(
            f"{name} is not positive definite (min eigenvalue {eigval[0]:.3e})")
    cond = eigval[-1] / eigval[0]
    if cond > COND_ERROR:
        raise SingularCovarianceError(
            f"{name} is numerically singular (condition number {cond:.3e})")
    if cond > COND_WARN:
        warnings.warn(f"{name} is ill-conditioned (condition number {cond:.3e})",
                      RuntimeWarning, stacklevel=3)
    return (eigvec / eigval) @ eigvec.T


def lm_test(series, longrun: LongRunFit, order, constraint: LinearConstraint,
            constrained_fit: FitResult | None = None) -> TestReport:
    """Score test of R theta = r, evaluated at the constrained fit.

    The statistic is (1/T) s' J1^-1 R' (R Sigma R')^-1 R J1^-1 s with s the
    likelihood score and J1, Sigma the plug-in matrices at the constrained
    estimate; null distribution chi^2 with d = rank(R) degrees of freedom.
    A precomputed `constrained_fit` may be supplied to avoid refitting.
    """
    if constrained_fit is None:
        constrained_fit = fit_qmle_constrained(series, longrun, order, constraint)
    filt = constrained_fit.filtered
    T = filt.T
    score = filt.psi_hat.T @ (1.0 - filt.eta_hat ** 2)
    cov = estimate_covariance(filt)
    J1_inv = guarded_inverse(cov.J1_hat, "J1_hat")
    Ra = constraint.R @ (J1_inv @ score)
    mid = constraint.R @ cov.sigma_hat @ constraint.R.T
    mid_inv = guarded_inverse(mid, "R Sigma R'")
    stat = float(Ra @ mid_inv @ Ra) / T
    if stat < 0:
        if stat < -1e-8 * (1.0 + abs(stat)):
            raise SingularCovarianceError(
                f"LM quadratic form is negative ({stat:.3e}); covariance estimate "
                "is not positive semidefinite")
        stat = 0.0
    return _chi2_report(stat, constraint.d)


def squared_residual_acf(eta_hat, ell: int) -> np.ndarray:
    """Autocorrelations rho_1..rho_ell of the squared residuals."""
    eta_sq = np.asarray(eta_hat, dtype=np.float64) ** 2
    T = eta_sq.size
    if not (1 <= ell < T / 2):
        raise ValueError(f"need 1 <= ell < T/2, got ell={ell}, T={T}")
    centered = eta_sq - eta_sq.mean()
    denom = float(centered @ centered)
    if denom <= 0:
        raise DataError("squared residuals are constant; autocorrelation undefined")
    rho = np.empty(ell)
    for k in range(1, ell + 1):
        rho[k - 1] = float(centered[k:] @ centered[:-k]) / denom
    return rho


def portmanteau_test(fit: FitResult, ell: int) -> tuple[TestReport, PortmanteauInternals]:
    """Joint test that the first `ell` autocorrelations of squared residuals
    vanish, with a sandwich covariance absorbing the estimation effect.

    Q = T rho' SigmaP^-1 rho with SigmaP = (kappa-1)^-1 SigmaP1 SigmaP2
    SigmaP1'; the lagged moment blocks D_k, H_k, F_k are time averages over
    t = k+1..T divided by T.
    """
    filt = fit.filtered
    T = filt.T
    m = filt.psi_hat.shape[1]
    rho = squared_residual_acf(filt.eta_hat, ell)

    eta_sq = filt.eta_hat ** 2
    g = filt.g_hat
    psi = filt.psi_hat
    cov = estimate_covariance(filt)
    kappa = cov.kappa_hat

    D = np.empty((ell, m))
    H = np.empty(ell)
    F = np.empty(ell)
    for k in range(1, ell + 1):
        lag = eta_sq[:-k] - 1.0
        D[k - 1] = lag @ psi[k:] / T
        H[k - 1] = float(lag @ (1.0 / g[k:])) / T
        F[k - 1] = float(lag @ g[k:]) / T

    e_g2 = float(np.mean(g ** 2))
    e_psi_over_g = (psi / g[:, None]).mean(axis=0)
    J1_inv = guarded_inverse(cov.J1_hat, "J1_hat")

    sigma_p1 = np.hstack([np.eye(ell), -H[:, None], -D @ J1_inv])

    dim = ell + 1 + m
    sigma_p2 = np.zeros((dim, dim))
    sigma_p2[:ell, :ell] = (kappa - 1.0) * np.eye(ell)
    sigma_p2[:ell, ell] = F
    sigma_p2[:ell, ell + 1:] = D - np.outer(F, e_psi_over_g)
    sigma_p2[ell, ell] = e_g2
    sigma_p2[ell, ell + 1:] = -e_g2 * e_psi_over_g
    sigma_p2[ell + 1:, ell + 1:] = cov.J1_hat + cov.J2_hat
    lower = np.tril_indices(dim, -1)
    sigma_p2[lower] = sigma_p2.T[lower]

    sigma_p = sigma_p1 @ sigma_p2 @ sigma_p1.T / (kappa - 1.0)
    sigma_p = 0.5 * (sigma_p + sigma_p.T)
    stat = float(T * rho @ _pd_inverse(sigma_p, "SigmaP_hat") @ rho)

    internals = PortmanteauInternals(
        rho_hat=rho, D_hat=D, H_hat=H, F_hat=F,
        SigmaP1_hat=sigma_p1, SigmaP2_hat=sigma_p2, SigmaP_hat=sigma_p,
    )
    return _chi2_report(stat, ell), internals
