"""Compiled volatility recursions shared by estimation, simulation, forecasting.

All recursions use the unit-variance identification omega = 1 - sum(alpha) -
sum(beta) and constant pre-sample values u^2 = 1, g = 1 (derivatives 0).
"""

import numba
import numpy as np


@numba.njit(cache=True)
def garch_core(u_sq, alpha, beta):
    """Volatility recursion g_t and its exact parameter derivative.

    Parameters
    ----------
    u_sq : float64[T]
        Squared devolatilized observations.
    alpha, beta : float64[q], float64[p]
        ARCH and GARCH coefficients; theta = (alpha, beta).

    Returns
    -------
    g : float64[T]
    dg : float64[T, q+p]
        dg[t, i] = d g_t / d alpha_{i+1} for i < q, then d g_t / d beta_{j}.
    """
    T = u_sq.shape[0]
    q = alpha.shape[0]
    p = beta.shape[0]
    m = q + p
    omega = 1.0
    for i in range(q):
        omega -= alpha[i]
    for j in range(p):
        omega -= beta[j]

    g = np.empty(T)
    dg = np.zeros((T, m))
    for t in range(T):
        val = omega
        for i in range(q):
            s = t - 1 - i
            u2 = u_sq[s] if s >= 0 else 1.0
            val += alpha[i] * u2
            # d/d alpha_i: -1 from omega, + lagged u^2
            dg[t, i] = u2 - 1.0
        for j in range(p):
            s = t - 1 - j
            gl = g[s] if s >= 0 else 1.0
            val += beta[j] * gl
            dg[t, q + j] = gl - 1.0
            if s >= 0:
                for a in range(m):
                    dg[t, a] += beta[j] * dg[s, a]
        g[t] = val
    return g, dg


@numba.njit(cache=True)
def garch_values_only(u_sq, alpha, beta):
    """Same recursion as garch_core without the derivative pass."""
    T = u_sq.shape[0]
    q = alpha.shape[0]
    p = beta.shape[0]
    omega = 1.0
    for i in range(q):
        omega -= alpha[i]
    for j in range(p):
        omega -= beta[j]
    g = np.empty(T)
    for t in range(T):
        val = omega
        for i in range(q):
            s = t - 1 - i
            val += alpha[i] * (u_sq[s] if s >= 0 else 1.0)
        for j in range(p):
            s = t - 1 - j
            val += beta[j] * (g[s] if s >= 0 else 1.0)
        g[t] = val
    return g


@numba.njit(cache=True)
def simulate_garch_path(eta, alpha, beta):
    """Generate u_t = sqrt(g_t) * eta_t through the whole eta array.

    The caller prepends burn-in innovations and discards their output.
    """
    n = eta.shape[0]
    q = alpha.shape[0]
    p = beta.shape[0]
    omega = 1.0
    for i in range(q):
        omega -= alpha[i]
    for j in range(p):
        omega -= beta[j]
    g = np.empty(n)
    u_sq = np.empty(n)
    u = np.empty(n)
    for t in range(n):
        val = omega
        for i in range(q):
            s = t - 1 - i
            val += alpha[i] * (u_sq[s] if s >= 0 else 1.0)
        for j in range(p):
            s = t - 1 - j
            val += beta[j] * (g[s] if s >= 0 else 1.0)
        g[t] = val
        u[t] = np.sqrt(val) * eta[t]
        u_sq[t] = u[t] * u[t]
    return u, g
