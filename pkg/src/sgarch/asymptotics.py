"""Plug-in asymptotic covariance of the short-run QMLE and standard errors."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import SingularCovarianceError
from .qmle import FilteredSeries

COND_WARN = 1e10
COND_ERROR = 1e14


def guarded_inverse(mat: np.ndarray, name: str) -> np.ndarray:
    """Symmetric inverse with a condition-number guard."""
    mat = 0.5 * (mat + mat.T)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_ERROR:
        raise SingularCovarianceError(
            f"{name} is numerically singular (condition number {cond:.3e})")
    if cond > COND_WARN:
        warnings.warn(f"{name} is ill-conditioned (condition number {cond:.3e})",
                      RuntimeWarning, stacklevel=3)
    inv = np.linalg.inv(mat)
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class AsymptoticCov:
    """Fourth-moment and information estimates with the sandwich covariance."""

    kappa_hat: float
    J1_hat: np.ndarray
    J2_hat: np.ndarray
    sigma_hat: np.ndarray
    se: np.ndarray


def estimate_covariance(filtered: FilteredSeries) -> AsymptoticCov:
    """Sample covariance sandwich from filtered series.

    kappa_hat = mean(eta^4), J1 = mean(psi psi'), J2 = mean(g^2) *
    mean(psi/g) mean(psi/g)' (rank <= 1), and
    sigma = (kappa-1) J1^-1 (J1+J2) J1^-1, symmetrized. Standard errors are
    sqrt(diag(sigma)/T).
    """
    T = filtered.T
    eta = filtered.eta_hat
    g = filtered.g_hat
    psi = filtered.psi_hat

    kappa = float(np.mean(eta ** 4))
    J1 = psi.T @ psi / T
    avg_psi_over_g = (psi / g[:, None]).mean(axis=0)
    J2 = float(np.mean(g ** 2)) * np.outer(avg_psi_over_g, avg_psi_over_g)

    J1_inv = guarded_inverse(J1, "J1_hat")
    sigma = (kappa - 1.0) * J1_inv @ (J1 + J2) @ J1_inv
    sigma = 0.5 * (sigma + sigma.T)
    se = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / T)
    return AsymptoticCov(kappa_hat=kappa, J1_hat=J1, J2_hat=J2,
                         sigma_hat=sigma, se=se)
