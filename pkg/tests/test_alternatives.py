import dataclasses

import numpy as np
import pytest

import sgarch
from sgarch import DataError, KernelSpec, ReturnSeries
from sgarch.kernel import _grid_smooth


def test_vt_targets_sample_second_moment(demo_series):
    vt = sgarch.fit_vt(demo_series, (1, 1))
    assert vt.tau_bar == np.mean(demo_series.values ** 2)
    assert vt.converged
    assert np.all(vt.params.theta >= 0)
    assert vt.params.theta.sum() < 1
    assert np.all(vt.cov.se > 0)


def test_vt_scale_invariance(demo_series):
    base = sgarch.fit_vt(demo_series, (1, 1))
    scaled = sgarch.fit_vt(ReturnSeries(7.0 * demo_series.values), (1, 1))
    assert scaled.tau_bar == pytest.approx(49.0 * base.tau_bar, rel=1e-14)
    np.testing.assert_allclose(scaled.params.theta, base.params.theta, atol=1e-6)


def test_vt_rejects_degenerate():
    with pytest.raises(DataError, match="degenerate"):
        sgarch.fit_vt(ReturnSeries(np.zeros(100)), (1, 1))


def test_three_step_requires_converged_fit(demo_fit, demo_series):
    broken = dataclasses.replace(demo_fit, converged=False)
    with pytest.raises(DataError, match="converged"):
        sgarch.three_step_update(broken, demo_series, KernelSpec(bandwidth=0.2))


def test_three_step_requires_matching_series(demo_fit):
    other = sgarch.simulate(sgarch.SimSpec(dgp="dgp2", T=300, n_reps=1, seed=9), 0)
    with pytest.raises(DataError, match="long-run"):
        sgarch.three_step_update(demo_fit, other, KernelSpec(bandwidth=0.2))


def test_three_step_curve_reconstruction(demo_fit, demo_series):
    h = 0.2
    three = sgarch.three_step_update(demo_fit, demo_series, KernelSpec(bandwidth=h))
    y = demo_series.values
    A = _grid_smooth(np.ones_like(y), h, "interior_only")
    B = _grid_smooth(y ** 2 / demo_fit.filtered.g_hat, h, "interior_only")
    tau = demo_fit.longrun.tau_hat
    avg1 = A / tau - B / tau ** 2
    avg2 = -A / tau ** 2 + 2.0 * B / tau ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        manual = tau - avg1 / avg2
    bad = ~np.isfinite(manual) | (manual <= 0)
    manual[bad] = tau[bad]
    assert three.n_fallback == int(bad.sum())
    np.testing.assert_allclose(three.tau_check, manual, rtol=1e-12)


def test_three_step_newton_derivative_pair(demo_fit, demo_series):
    # avg2 is the tau-derivative of avg1; check by central differences
    h = 0.2
    y = demo_series.values
    A = _grid_smooth(np.ones_like(y), h, "interior_only")
    B = _grid_smooth(y ** 2 / demo_fit.filtered.g_hat, h, "interior_only")
    tau = demo_fit.longrun.tau_hat
    eps = 1e-6
    fd = ((A / (tau + eps) - B / (tau + eps) ** 2)
          - (A / (tau - eps) - B / (tau - eps) ** 2)) / (2 * eps)
    avg2 = -A / tau ** 2 + 2.0 * B / tau ** 3
    np.testing.assert_allclose(fd, avg2, rtol=1e-6)


def test_three_step_result_contract(demo_fit, demo_series):
    three = sgarch.three_step_update(demo_fit, demo_series, KernelSpec(bandwidth=0.2))
    d = demo_fit.params.theta.size
    assert three.params.theta.shape == (d,)
    assert np.all(three.params.theta >= 0)
    assert three.tau_check.shape == demo_series.values.shape
    assert np.all(three.tau_check > 0)
    assert three.sigma_star.shape == (d, d)
    assert np.array_equal(three.sigma_star, three.sigma_star.T)
    assert np.all(np.diag(three.sigma_star) >= 0)
    # one Newton step should stay near the two-step point on clean data
    assert np.max(np.abs(three.params.theta - demo_fit.params.theta)) < 0.1
    assert isinstance(three.projected, bool)


def test_sigma_star_matches_plugin(demo_fit, demo_series):
    three = sgarch.three_step_update(demo_fit, demo_series, KernelSpec(bandwidth=0.2))
    rebuilt = sgarch.sigma_star_plugin(three, three.filtered)
    np.testing.assert_allclose(three.sigma_star, rebuilt, rtol=1e-13)


def test_sigma_star_correction_rank(demo_fit, demo_series):
    three = sgarch.three_step_update(demo_fit, demo_series, KernelSpec(bandwidth=0.2))
    filt = three.filtered
    psi_bar = filt.psi_hat.mean(axis=0)
    v = np.mean(1.0 / filt.g_hat) * psi_bar - (filt.psi_hat / filt.g_hat[:, None]).mean(axis=0)
    J2 = (three.params.omega ** 2 / (1.0 - np.sum(three.params.beta)) ** 2) * np.outer(v, v)
    s = np.linalg.svd(J2, compute_uv=False)
    assert s[1] <= 1e-12 * max(s[0], 1e-30)
