"""Data-generating processes and Monte-Carlo harnesses.

Four benchmark processes, three long-run variance shapes, and three
innovation laws. Replications are deterministic functions of
(seed, rep_index) through counter-based random streams, so runs are
reproducible under any execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .asymptotics import estimate_covariance
from .data import ReturnSeries
from .exceptions import SGarchError
from .kernel import CVConfig, KernelSpec, estimate_tau, select_bandwidth_cv
from .qmle import (FitResult, GarchParams, LinearConstraint, fit_qmle,
                   make_filtered)
from .recursions import simulate_garch_path

BURN_IN = 500

DGP_NAMES = ("dgp1", "dgp2", "dgp3", "dgp4")
TAU_SHAPES = ("constant", "linear", "cyclical")
INNOVATIONS = ("normal", "st10", "st5")

_DGP_ORDERS = {"dgp1": (0, 2), "dgp2": (1, 1), "dgp3": (1, 2), "dgp4": (2, 1)}

# position of the deviation coefficient within theta, for dgp3/dgp4
_DEVIATION_INDEX = {"dgp3": 1, "dgp4": 2}


def dgp_order(dgp: str) -> tuple[int, int]:
    if dgp not in _DGP_ORDERS:
        raise ValueError(f"unknown dgp {dgp!r}; expected one of {DGP_NAMES}")
    return _DGP_ORDERS[dgp]


def dgp_theta(dgp: str, k: int = 0) -> np.ndarray:
    """True short-run coefficients (alpha_1..alpha_q, beta_1..beta_p)."""
    dgp_order(dgp)
    if dgp == "dgp1":
        theta = [0.3, 0.3]
    elif dgp == "dgp2":
        theta = [0.1, 0.8]
    elif dgp == "dgp3":
        theta = [0.3, 0.03 * k, 0.3]
    else:
        theta = [0.3, 0.3, 0.03 * k]
    return np.asarray(theta, dtype=np.float64)


def deviation_constraint(dgp: str) -> LinearConstraint:
    """Constraint pinning the deviation coefficient of dgp3/dgp4 to zero."""
    if dgp not in _DEVIATION_INDEX:
        raise ValueError(f"no deviation coefficient defined for {dgp!r}")
    m = dgp_theta(dgp).size
    R = np.zeros((1, m))
    R[0, _DEVIATION_INDEX[dgp]] = 1.0
    return LinearConstraint(R=R, r=np.zeros(1))


def tau_function(shape: str):
    """Long-run variance curve on [0, 1] for the requested shape."""
    if shape == "constant":
        return lambda x: np.ones_like(np.asarray(x, dtype=np.float64))
    if shape == "linear":
        return lambda x: 1.0 + 2.0 * np.asarray(x, dtype=np.float64)
    if shape == "cyclical":
        return lambda x: 1.0 + 0.5 * np.sin(4.0 * np.pi * np.asarray(x, dtype=np.float64))
    raise ValueError(f"unknown tau shape {shape!r}; expected one of {TAU_SHAPES}")


@dataclass(frozen=True)
class SimSpec:
    dgp: str
    tau_shape: str = "constant"
    innovation: str = "normal"
    T: int = 2000
    n_reps: int = 500
    seed: int = 0
    k: int = 0

    def __post_init__(self):
        dgp_order(self.dgp)
        tau_function(self.tau_shape)
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"unknown innovation {self.innovation!r}")
        if self.T < 1 or self.n_reps < 1:
            raise ValueError("T and n_reps must be positive")
        if not (0 <= self.k <= 10):
            raise ValueError("k must lie in 0..10")
        if self.k != 0 and self.dgp in ("dgp1", "dgp2"):
            raise ValueError(f"{self.dgp} has no deviation coefficient; use k=0")
        if not (0 <= self.seed < 2 ** 63):
            raise ValueError("seed must be a nonnegative 63-bit integer")

    @property
    def order(self) -> tuple[int, int]:
        return dgp_order(self.dgp)

    @property
    def theta(self) -> np.ndarray:
        return dgp_theta(self.dgp, self.k)


def _draw_eta(spec: SimSpec, rep_index: int, n: int, counter) -> np.ndarray:
    """Innovations by inverse CDF from one uniform stream.

    All laws consume the identical uniforms for a given (seed, rep_index),
    so cells differing only in the innovation law (or in the long-run
    shape) share draws; Monte-Carlo comparisons across such cells are
    paired rather than independent.
    """
    gen = np.random.Generator(
        np.random.Philox(key=[spec.seed, rep_index], counter=counter))
    u = np.clip(gen.random(n), 2.0 ** -53, 1.0 - 2.0 ** -53)
    if spec.innovation == "normal":
        return scipy.stats.norm.ppf(u)
    df = 10 if spec.innovation == "st10" else 5
    return scipy.stats.t.ppf(u, df) * np.sqrt((df - 2) / df)


def simulate_with_state(spec: SimSpec, rep_index: int, n_burn: int = BURN_IN):
    """One replication, returning the series with its u_t, g_t, eta_t paths.

    The retained innovations come from one counter block and the burn-in
    from a disjoint block laid down backwards in time, so enlarging the
    burn-in only prepends older draws and never disturbs the retained
    sample.
    """
    if rep_index < 0:
        raise ValueError("rep_index must be nonnegative")
    T = spec.T
    eta_ret = _draw_eta(spec, rep_index, T, counter=[0, 0, 0, 0])
    eta_burn = _draw_eta(spec, rep_index, n_burn, counter=[0, 0, 1, 0])[::-1]
    eta = np.concatenate([eta_burn, eta_ret])

    theta = spec.theta
    q = spec.order[1]
    u, g = simulate_garch_path(eta, theta[:q].copy(), theta[q:].copy())
    x = np.arange(1, T + 1) / T
    y = np.sqrt(tau_function(spec.tau_shape)(x)) * u[n_burn:]
    label = f"{spec.dgp}-k{spec.k}-{spec.tau_shape}-{spec.innovation}-T{T}-rep{rep_index}"
    return ReturnSeries(y, label=label), u[n_burn:], g[n_burn:], eta_ret


def simulate(spec: SimSpec, rep_index: int, n_burn: int = BURN_IN) -> ReturnSeries:
    """One replication of the process: y_t = sqrt(tau(t/T)) u_t."""
    return simulate_with_state(spec, rep_index, n_burn)[0]


def _map_reps(fn, n_reps: int, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_reps)))
    return [fn(rep) for rep in range(n_reps)]


@dataclass(frozen=True)
class CellResult:
    spec: SimSpec
    theta_true: np.ndarray
    estimates: np.ndarray
    ses: np.ndarray
    bandwidths: np.ndarray
    n_excluded: int

    @property
    def bias(self) -> np.ndarray:
        return self.estimates.mean(axis=0) - self.theta_true

    @property
    def esd(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1)

    @property
    def asd(self) -> np.ndarray:
        return self.ses.mean(axis=0)


def run_cell(spec: SimSpec, threads: int = 1) -> CellResult:
    """Full-pipeline parameter recovery for one design cell.

    Each replication selects a bandwidth by cross-validation with the
    cell's own model as pilot, fits the kernel long-run curve, then the
    likelihood. Non-converged or failed replications are excluded and
    counted.
    """
    order = spec.order
    cv_cfg = CVConfig(pilot_order=order)

    def one(rep: int):
        try:
            series = simulate(spec, rep)
            h, _ = select_bandwidth_cv(series, cv_cfg)
            fit = fit_qmle(series, estimate_tau(series, KernelSpec(bandwidth=h)),
                           order)
            if not fit.converged:
                return None
            cov = estimate_covariance(fit.filtered)
            return fit.params.theta, cov.se, h
        except SGarchError:
            return None

    rows = _map_reps(one, spec.n_reps, threads)
    kept = [r for r in rows if r is not None]
    if not kept:
        raise SGarchError(f"all {spec.n_reps} replications failed for {spec}")
    return CellResult(
        spec=spec, theta_true=spec.theta,
        estimates=np.array([r[0] for r in kept]),
        ses=np.array([r[1] for r in kept]),
        bandwidths=np.array([r[2] for r in kept]),
        n_excluded=spec.n_reps - len(kept),
    )


def run_table1(specs, threads: int = 1) -> list[CellResult]:
    """Parameter-recovery cells (bias / ESD / ASD) for a list of designs."""
    return [run_cell(spec, threads=threads) for spec in specs]


@dataclass(frozen=True)
class PowerReport:
    dgp: str
    T: int
    k_values: tuple
    level: float
    lags: tuple
    n_reps: int
    rates: dict
    n_excluded: tuple
    p_values: tuple  # one {test_name: array of per-rep p-values} per k


def run_power_curves(dgp: str, T: int, k_values, n_reps: int = 500,
                     tau_shape: str = "constant", innovation: str = "normal",
                     seed: int = 0, level: float = 0.05, lags=(6, 9, 12),
                     threads: int = 1) -> PowerReport:
    """Rejection frequencies of the score test and the portmanteau tests
    across deviation sizes k, with the short-memory (1,1) model as null.

    The score test targets the deviation coefficient of the larger model;
    its constrained fit is the (1,1) fit embedded in the larger
    parameterization, which solves the constrained problem exactly.
    """
    from .diagnostics import lm_test, portmanteau_test

    if dgp not in _DEVIATION_INDEX:
        raise ValueError("power curves are defined for dgp3 and dgp4")
    full_order = dgp_order(dgp)
    constraint = deviation_constraint(dgp)
    dev_idx = _DEVIATION_INDEX[dgp]
    cv_cfg = CVConfig(pilot_order=(1, 1))
    test_names = ["lm"] + [f"q{ell}" for ell in lags]

    def one_k(k: int):
        spec = SimSpec(dgp=dgp, tau_shape=tau_shape, innovation=innovation,
                       T=T, n_reps=n_reps, seed=seed, k=k)

        def one(rep: int):
            try:
                series = simulate(spec, rep)
                h, _ = select_bandwidth_cv(series, cv_cfg)
                lr = estimate_tau(series, KernelSpec(bandwidth=h))
                fit11 = fit_qmle(series, lr, (1, 1))
                if not fit11.converged:
                    return None
                theta_full = np.zeros(constraint.R.shape[1])
                free = [i for i in range(theta_full.size) if i != dev_idx]
                theta_full[free] = fit11.params.theta
                params_full = GarchParams(p=full_order[0], q=full_order[1],
                                          theta=theta_full)
                embedded = FitResult(
                    params=params_full,
                    filtered=make_filtered(fit11.filtered.u_hat, params_full),
                    loglik=fit11.loglik, longrun=lr,
                    converged=True, iterations=fit11.iterations)
                pvals = [lm_test(series, lr, full_order, constraint,
                                 constrained_fit=embedded).p_value]
                for ell in lags:
                    report, _ = portmanteau_test(fit11, ell)
                    pvals.append(report.p_value)
                return pvals
            except SGarchError:
                return None

        rows = [r for r in _map_reps(one, n_reps, threads) if r is not None]
        if not rows:
            raise SGarchError(f"all replications failed for {dgp} k={k}")
        mat = np.array(rows, dtype=np.float64)
        return ({name: mat[:, j] for j, name in enumerate(test_names)},
                n_reps - len(rows))

    per_k = [one_k(int(k)) for k in k_values]
    rates = {name: np.array([(per_k[i][0][name] < level).mean()
                             for i in range(len(per_k))])
             for name in test_names}
    return PowerReport(
        dgp=dgp, T=T, k_values=tuple(int(k) for k in k_values), level=level,
        lags=tuple(lags), n_reps=n_reps, rates=rates,
        n_excluded=tuple(per_k[i][1] for i in range(len(per_k))),
        p_values=tuple(per_k[i][0] for i in range(len(per_k))),
    )


@dataclass(frozen=True)
class EstimatorStudy:
    spec: SimSpec
    theta_true: np.ndarray
    estimates: dict
    n_excluded: int


def run_estimator_study(spec: SimSpec, estimators=("two_step", "vt"),
                        threads: int = 1) -> EstimatorStudy:
    """Paired Monte-Carlo comparison of estimators on identical draws.

    Supported names: two_step (kernel + likelihood), vt (variance
    targeting), three_step (Newton-updated). A replication is excluded
    from every estimator if any requested one fails, keeping the
    comparison paired.
    """
    from .alternatives import fit_vt, three_step_update

    known = {"two_step", "vt", "three_step"}
    unknown = set(estimators) - known
    if unknown:
        raise ValueError(f"unknown estimator names {sorted(unknown)}")
    order = spec.order
    cv_cfg = CVConfig(pilot_order=order)
    need_two_step = bool({"two_step", "three_step"} & set(estimators))

    def one(rep: int):
        try:
            series = simulate(spec, rep)
            out = {}
            if need_two_step:
                h, _ = select_bandwidth_cv(series, cv_cfg)
                spec_h = KernelSpec(bandwidth=h)
                fit = fit_qmle(series, estimate_tau(series, spec_h), order)
                if not fit.converged:
                    return None
                out["two_step"] = fit.params.theta
                if "three_step" in estimators:
                    out["three_step"] = three_step_update(fit, series, spec_h).params.theta
            if "vt" in estimators:
                vt = fit_vt(series, order)
                if not vt.converged:
                    return None
                out["vt"] = vt.params.theta
            return {name: out[name] for name in estimators}
        except SGarchError:
            return None

    rows = [r for r in _map_reps(one, spec.n_reps, threads) if r is not None]
    if not rows:
        raise SGarchError(f"all replications failed for {spec}")
    estimates = {name: np.array([r[name] for r in rows]) for name in estimators}
    return EstimatorStudy(spec=spec, theta_true=spec.theta,
                          estimates=estimates,
                          n_excluded=spec.n_reps - len(rows))
