"""GARCH(p,q) recursion under unit-variance identification, feasible
quasi-likelihood, and constrained/unconstrained QMLE.

Conventions: order = (p, q) with q ARCH lags (alpha) and p GARCH lags (beta);
theta = (alpha_1..alpha_q, beta_1..beta_p); omega = 1 - sum(theta) is implied,
so the free parameter space is {theta >= 0, sum(theta) <= 1 - EPS_OMEGA}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .data import ReturnSeries
from .exceptions import ConstraintError, ConvergenceError, DataError
from .recursions import garch_core

if TYPE_CHECKING:
    from .kernel import LongRunFit

# Interior margins of the optimizer's search region.
EPS_THETA = 1e-6
EPS_OMEGA = 1e-6

_MAX_ITER = 500
_GRAD_TOL = 1e-7  # on the likelihood divided by T


def _validate_order(order) -> tuple[int, int]:
    try:
        p, q = int(order[0]), int(order[1])
    except (TypeError, ValueError, IndexError):
        raise ValueError(f"order must be a pair (p, q), got {order!r}") from None
    if q < 1 or p < 0:
        raise ValueError(f"order needs q >= 1 and p >= 0, got (p={p}, q={q})")
    return p, q


@dataclass(frozen=True)
class GarchParams:
    """GARCH order and coefficient vector; the intercept is derived.

    theta holds (alpha_1..alpha_q, beta_1..beta_p). Construction checks the
    closed feasible region theta >= 0, sum(theta) <= 1 - EPS_OMEGA; exact
    zeros are allowed because constrained fits may sit on the boundary.
    """

    p: int
    q: int
    theta: np.ndarray

    def __post_init__(self):
        p, q = _validate_order((self.p, self.q))
        theta = np.asarray(self.theta, dtype=np.float64).copy()
        if theta.shape != (p + q,):
            raise ValueError(f"theta must have length p+q={p+q}, got shape {theta.shape}")
        if np.any(theta < 0):
            raise ValueError(f"negative coefficient in theta={theta}")
        if theta.sum() > 1.0 - EPS_OMEGA:
            raise ValueError(
                f"sum(theta)={theta.sum():.6f} violates stationarity margin {1.0 - EPS_OMEGA}"
            )
        theta.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "theta", theta)

    @property
    def alpha(self) -> np.ndarray:
        return self.theta[: self.q]

    @property
    def beta(self) -> np.ndarray:
        return self.theta[self.q:]

    @property
    def omega(self) -> float:
        return float(1.0 - self.theta.sum())


@dataclass(frozen=True)
class FilteredSeries:
    """Per-observation filtered quantities at a fitted parameter."""

    u_hat: np.ndarray      # devolatilized data y_t / sqrt(tau_hat_t)
    g_hat: np.ndarray      # recursion values g_t(theta)
    eta_hat: np.ndarray    # residuals u_hat / sqrt(g_hat)
    psi_hat: np.ndarray    # (T, p+q) rows (dg_t/dtheta) / g_t

    @property
    def T(self) -> int:
        return int(self.u_hat.size)


@dataclass(frozen=True)
class FitResult:
    params: GarchParams
    filtered: FilteredSeries
    loglik: float          # minimized objective sum_t [u^2/g + log g]
    longrun: "LongRunFit | None"
    converged: bool
    iterations: int


@dataclass(frozen=True)
class LinearConstraint:
    """Affine constraint R theta = r with full row rank."""

    R: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=np.float64)).copy()
        r = np.atleast_1d(np.asarray(self.r, dtype=np.float64)).copy()
        if R.shape[0] != r.shape[0]:
            raise ConstraintError(f"R has {R.shape[0]} rows but r has length {r.shape[0]}")
        sv = np.linalg.svd(R, compute_uv=False)
        if sv.size == 0 or sv[-1] <= 1e-10 * sv[0]:
            raise ConstraintError("R is rank deficient")
        R.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "r", r)

    @property
    def d(self) -> int:
        return int(self.R.shape[0])

    def canonical(self) -> "LinearConstraint":
        """Rows scaled to unit norm with positive leading entry."""
        R = self.R.copy()
        r = self.r.copy()
        for k in range(R.shape[0]):
            nrm = np.linalg.norm(R[k])
            R[k] /= nrm
            r[k] /= nrm
            lead = R[k][np.flatnonzero(np.abs(R[k]) > 1e-12)[0]]
            if lead < 0:
                R[k] = -R[k]
                r[k] = -r[k]
        return LinearConstraint(R, r)


# ---------------------------------------------------------------------------
# likelihood plumbing


def garch_filter(u_sq, params: GarchParams):
    """Run the volatility recursion and its derivative at given parameters.

    Returns (g, dg_dtheta) with shapes (T,) and (T, p+q).
    """
    u_sq = np.ascontiguousarray(u_sq, dtype=np.float64)
    if u_sq.ndim != 1:
        raise ValueError("u_sq must be one-dimensional")
    if np.any(~np.isfinite(u_sq)) or np.any(u_sq < 0):
        raise ValueError("u_sq must be finite and nonnegative")
    return garch_core(u_sq, np.ascontiguousarray(params.alpha),
                      np.ascontiguousarray(params.beta))


def _mean_nll_and_grad(u_sq, alpha, beta):
    """Mean negative quasi-likelihood and its theta-gradient (mean scale)."""
    g, dg = garch_core(u_sq, alpha, beta)
    nll = np.mean(u_sq / g + np.log(g))
    w = (1.0 - u_sq / g) / g
    grad = dg.T @ w / u_sq.shape[0]
    return nll, grad, g, dg


def neg_loglik(series: ReturnSeries, longrun, params: GarchParams) -> float:
    """Feasible objective sum_t [u_hat_t^2 / g_t + log g_t]."""
    tau = np.asarray(longrun.tau_hat, dtype=np.float64)
    if tau.shape != (series.T,):
        raise DataError(f"tau_hat length {tau.shape} does not match series T={series.T}")
    if np.any(tau <= 0):
        raise DataError("tau_hat must be strictly positive")
    u_sq = series.values ** 2 / tau
    g = garch_core(np.ascontiguousarray(u_sq),
                   np.ascontiguousarray(params.alpha),
                   np.ascontiguousarray(params.beta))[0]
    return float(np.sum(u_sq / g + np.log(g)))


def make_filtered(u_signed, params: GarchParams) -> FilteredSeries:
    """Filtered series (g, eta, psi) for signed devolatilized data."""
    u_signed = np.ascontiguousarray(u_signed, dtype=np.float64)
    g, dg = garch_core(u_signed ** 2, np.ascontiguousarray(params.alpha),
                       np.ascontiguousarray(params.beta))
    eta = u_signed / np.sqrt(g)
    psi = dg / g[:, None]
    return FilteredSeries(u_hat=u_signed, g_hat=g, eta_hat=eta, psi_hat=psi)


# ---------------------------------------------------------------------------
# unconstrained reparameterization: theta_i = eps + budget * t_i / (1 + sum t)


def _z_to_theta(z, budget):
    z = np.clip(z, -60.0, 60.0)
    t = np.exp(z)
    denom = 1.0 + t.sum()
    theta = EPS_THETA + budget * t / denom
    jac = budget * (np.diag(t) * denom - np.outer(t, t)) / denom ** 2
    return theta, jac


def _theta_to_z(theta, budget):
    frac = (np.asarray(theta, dtype=np.float64) - EPS_THETA) / budget
    frac = np.clip(frac, 1e-12, None)
    s = frac.sum()
    if s >= 1.0 - 1e-9:
        frac = frac * (1.0 - 1e-9) / s
        s = 1.0 - 1e-9
    return np.clip(np.log(frac / (1.0 - s)), -60.0, 60.0)


def _project_interior(theta_raw, budget_total):
    """Pull an arbitrary start strictly inside the search region."""
    th = np.clip(np.asarray(theta_raw, dtype=np.float64), 4 * EPS_THETA, None)
    cap = budget_total * 0.995
    if th.sum() > cap:
        th = th * cap / th.sum()
    return th


def _default_start(p, q):
    if p > 0:
        return np.concatenate([np.full(q, 0.05 / q), np.full(p, 0.85 / p)])
    return np.full(q, 0.1 / q)


def _moment_start(u_sq, p, q):
    # lag-1 autocorrelation of u^2 sets the scale of the ARCH mass
    x, y = u_sq[1:], u_sq[:-1]
    den = np.std(x) * np.std(y)
    r1 = float(np.mean((x - x.mean()) * (y - y.mean())) / den) if den > 0 else 0.0
    if not np.isfinite(r1):
        r1 = 0.0
    if p > 0:
        a_tot = float(np.clip(r1, 0.03, 0.30))
        b_tot = float(np.clip(0.94 - a_tot, 0.30, 0.90))
        return np.concatenate([np.full(q, a_tot / q), np.full(p, b_tot / p)])
    a_tot = float(np.clip(2.0 * r1, 0.10, 0.70))
    return np.full(q, a_tot / q)


def _jitter_start(base):
    rng = np.random.default_rng(1234567)
    return base * np.exp(rng.uniform(-0.6, 0.6, size=base.shape))


def _standard_starts(u_sq, p, q):
    base = _default_start(p, q)
    return [base, _moment_start(u_sq, p, q), _jitter_start(base)]


def _run_bfgs(fun, z0):
    return scipy.optimize.minimize(
        fun, z0, jac=True, method="BFGS",
        options={"maxiter": _MAX_ITER, "gtol": _GRAD_TOL},
    )


def _fit_usq(u_sq, p, q, init=None, pins=None):
    """Minimize the mean feasible likelihood over the (optionally pinned)
    interior region. Returns (theta_full, mean_value, converged, iterations).

    pins: optional dict {index: fixed_value} of coordinates held fixed.
    """
    u_sq = np.ascontiguousarray(u_sq, dtype=np.float64)
    m = p + q
    pins = pins or {}
    free = np.array([i for i in range(m) if i not in pins], dtype=np.intp)
    pinned_sum = float(sum(pins.values()))
    budget = 1.0 - EPS_OMEGA - pinned_sum - free.size * EPS_THETA
    if free.size == 0:
        raise ValueError("no free coordinates to optimize")
    if budget <= 0:
        raise ConstraintError("pinned values leave no feasible interior mass")

    theta_full = np.empty(m)
    for i, v in pins.items():
        theta_full[i] = v

    def objective(z):
        th_free, jac = _z_to_theta(z, budget)
        theta_full[free] = th_free
        alpha = np.ascontiguousarray(theta_full[:q])
        beta = np.ascontiguousarray(theta_full[q:])
        nll, grad_theta, _, _ = _mean_nll_and_grad(u_sq, alpha, beta)
        return nll, jac.T @ grad_theta[free]

    starts = _standard_starts(u_sq, p, q)
    if init is not None:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (m,):
            raise ValueError(f"init must have length {m}")
        starts.insert(0, init)

    budget_total = 1.0 - EPS_OMEGA - pinned_sum
    best = None
    for start in starts:
        th0 = _project_interior(start[free], budget_total)
        res = _run_bfgs(objective, _theta_to_z(th0, budget))
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("all optimizer starts failed")

    th_free, _ = _z_to_theta(best.x, budget)
    theta_full[free] = th_free
    converged = bool(best.success or np.max(np.abs(best.jac)) < 1e-5)
    return theta_full.copy(), float(best.fun), converged, int(best.nit)


def _devolatilize(series: ReturnSeries, longrun) -> np.ndarray:
    tau = np.asarray(longrun.tau_hat, dtype=np.float64)
    if tau.shape != (series.T,):
        raise DataError(f"tau_hat length {tau.size} does not match series T={series.T}")
    if np.any(tau <= 0):
        raise DataError("tau_hat must be strictly positive")
    return series.values / np.sqrt(tau)


def fit_qmle(series: ReturnSeries, longrun, order,
             init: Optional[Sequence[float]] = None) -> FitResult:
    """Quasi-maximum-likelihood fit of the short-run GARCH parameters.

    Minimizes sum_t [u_hat_t^2/g_t(theta) + log g_t(theta)] over the interior
    of the stationarity region, using three deterministic starts (plus `init`
    if given) and a quasi-Newton optimizer with the analytic gradient.
    Non-convergence returns the best iterate with converged=False.
    """
    series.require_estimable()
    p, q = _validate_order(order)
    u = _devolatilize(series, longrun)
    theta, mean_val, converged, nit = _fit_usq(u ** 2, p, q, init=init)
    params = GarchParams(p, q, theta)
    return FitResult(
        params=params,
        filtered=make_filtered(u, params),
        loglik=float(mean_val * series.T),
        longrun=longrun,
        converged=converged,
        iterations=nit,
    )


# ---------------------------------------------------------------------------
# constrained fit


def _feasible_point(R, r, m):
    """Max-slack interior point of {R theta = r, theta >= 0, sum <= 1-eps}."""
    # variables (theta, s): maximize s with theta_i >= s, sum(theta) <= 1-eps-s
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.zeros((m + 1, m + 1))
    b_ub = np.zeros(m + 1)
    A_ub[:m, :m] = -np.eye(m)
    A_ub[:m, m] = 1.0
    A_ub[m, :m] = 1.0
    A_ub[m, m] = 1.0
    b_ub[m] = 1.0 - EPS_OMEGA
    A_eq = np.hstack([R, np.zeros((R.shape[0], 1))])
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=r,
        bounds=[(None, None)] * m + [(0, None)], method="highs",
    )
    if not res.success:
        raise ConstraintError(f"constraint set is infeasible: {res.message}")
    return res.x[:m]


def _clean_theta(theta, R, r):
    # solvers are allowed to sit on the boundary to within their own tolerance
    th = np.where(np.abs(theta) < 1e-7, 0.0, theta)
    if np.any(th < 0) or th.sum() > 1.0 - EPS_OMEGA + 1e-9:
        raise ConstraintError(f"solution {th} leaves the feasible region")
    if np.max(np.abs(R @ th - r)) > 1e-6 * (1.0 + np.max(np.abs(r))):
        raise ConstraintError("solution violates R theta = r")
    return np.clip(th, 0.0, None)


def _fit_usq_affine(u_sq, p, q, R, r):
    """Reduced-space SLSQP for a general affine constraint."""
    m = p + q
    theta_feas = _feasible_point(R, r, m)
    N = scipy.linalg.null_space(R)
    theta_p, *_ = np.linalg.lstsq(R, r, rcond=None)

    def to_theta(zeta):
        return theta_p + N @ zeta

    def objective(zeta):
        th = np.clip(to_theta(zeta), 0.0, None)
        s = th.sum()
        if s > 1.0 - EPS_OMEGA / 2:
            th = th * (1.0 - EPS_OMEGA) / s
        nll, grad_theta, _, _ = _mean_nll_and_grad(
            u_sq, np.ascontiguousarray(th[:q]), np.ascontiguousarray(th[q:]))
        return nll, N.T @ grad_theta

    cons = [
        {"type": "ineq", "fun": lambda zeta: to_theta(zeta),
         "jac": lambda zeta: N},
        {"type": "ineq",
         "fun": lambda zeta: np.array([1.0 - EPS_OMEGA - to_theta(zeta).sum()]),
         "jac": lambda zeta: -N.sum(axis=0)[None, :]},
    ]

    def blend(target):
        # largest step from the interior point toward `target` staying feasible
        proj = target - R.T @ np.linalg.solve(R @ R.T, R @ target - r)
        lo, hi = 0.0, 1.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            th = theta_feas + mid * (proj - theta_feas)
            if np.all(th >= 0) and th.sum() <= 1.0 - EPS_OMEGA:
                lo = mid
            else:
                hi = mid
        return theta_feas + lo * (proj - theta_feas)

    starts = [theta_feas] + [blend(s) for s in _standard_starts(u_sq, p, q)]
    best = None
    for th0 in starts:
        zeta0 = N.T @ (th0 - theta_p)
        res = scipy.optimize.minimize(
            objective, zeta0, jac=True, method="SLSQP", constraints=cons,
            options={"maxiter": _MAX_ITER, "ftol": 1e-12},
        )
        if best is None or (np.isfinite(res.fun) and res.fun < best.fun):
            best = res
    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("constrained optimization failed at every start")

    theta = _clean_theta(to_theta(best.x), R, r)
    nit = int(getattr(best, "nit", 0))
    return theta, float(objective(best.x)[0]), bool(best.success), nit


def fit_qmle_constrained(series: ReturnSeries, longrun, order,
                         constraint: LinearConstraint) -> FitResult:
    """QMLE restricted to the affine subspace R theta = r.

    Coordinates pinned to zero by the constraint are allowed (boundary fits
    are valid here even though the unconstrained fit keeps an interior
    margin). A fully pinned constraint returns the implied theta directly.
    """
    series.require_estimable()
    p, q = _validate_order(order)
    m = p + q
    if constraint.R.shape[1] != m:
        raise ConstraintError(
            f"R has {constraint.R.shape[1]} columns but p+q={m}")
    if constraint.d > m:
        raise ConstraintError(f"constraint rank {constraint.d} exceeds p+q={m}")
    u = _devolatilize(series, longrun)
    u_sq = np.ascontiguousarray(u ** 2)
    canon = constraint.canonical()
    R, r = canon.R, canon.r

    if canon.d == m:
        theta = _clean_theta(np.linalg.solve(R, r), R, r)
        mean_val, converged, nit = None, True, 0
    else:
        # a canonical row with a single nonzero entry is that unit vector
        unit_rows = np.sum(np.abs(R) > 1e-12, axis=1) == 1
        if np.all(unit_rows):
            pins = {}
            for k in range(canon.d):
                idx = int(np.argmax(np.abs(R[k])))
                val = float(r[k])
                if val < 0 or val > 1.0 - EPS_OMEGA:
                    raise ConstraintError(
                        f"pinned value {val} for coefficient {idx} is infeasible")
                pins[idx] = val
            if sum(pins.values()) > 1.0 - EPS_OMEGA:
                raise ConstraintError("pinned values exceed the stationarity budget")
            theta, mean_val, converged, nit = _fit_usq(u_sq, p, q, pins=pins)
            theta = _clean_theta(theta, R, r)
        else:
            theta, mean_val, converged, nit = _fit_usq_affine(u_sq, p, q, R, r)

    alpha = np.ascontiguousarray(theta[:q])
    beta = np.ascontiguousarray(theta[q:])
    if mean_val is None:
        mean_val = _mean_nll_and_grad(u_sq, alpha, beta)[0]
    params = GarchParams(p, q, theta)
    return FitResult(
        params=params,
        filtered=make_filtered(u, params),
        loglik=float(mean_val * series.T),
        longrun=longrun,
        converged=converged,
        iterations=nit,
    )
