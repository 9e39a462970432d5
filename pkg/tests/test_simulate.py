import numpy as np
import pytest

from sgarch import SimSpec
from sgarch.simulate import (dgp_order, dgp_theta, deviation_constraint,
                             run_cell, run_estimator_study, run_power_curves,
                             simulate, simulate_with_state, tau_function)


class TestSpecValidation:
    def test_defaults(self):
        spec = SimSpec(dgp="dgp2")
        assert spec.order == (1, 1)
        np.testing.assert_array_equal(spec.theta, [0.1, 0.8])

    def test_unknown_dgp(self):
        with pytest.raises(ValueError, match="unknown dgp"):
            SimSpec(dgp="dgp9")

    def test_unknown_shape(self):
        with pytest.raises(ValueError, match="tau shape"):
            SimSpec(dgp="dgp1", tau_shape="quadratic")

    def test_unknown_innovation(self):
        with pytest.raises(ValueError, match="innovation"):
            SimSpec(dgp="dgp1", innovation="laplace")

    def test_k_range(self):
        with pytest.raises(ValueError, match="0..10"):
            SimSpec(dgp="dgp3", k=11)

    def test_k_needs_deviation_coefficient(self):
        with pytest.raises(ValueError, match="deviation"):
            SimSpec(dgp="dgp2", k=3)

    def test_seed_width(self):
        with pytest.raises(ValueError, match="63-bit"):
            SimSpec(dgp="dgp1", seed=2 ** 63)

    def test_negative_rep(self):
        with pytest.raises(ValueError, match="nonnegative"):
            simulate(SimSpec(dgp="dgp1"), -1)


def test_dgp_theta_tables():
    np.testing.assert_array_equal(dgp_theta("dgp1"), [0.3, 0.3])
    np.testing.assert_array_equal(dgp_theta("dgp3", k=4), [0.3, 0.12, 0.3])
    np.testing.assert_array_equal(dgp_theta("dgp4", k=10), [0.3, 0.3, 0.3])
    assert dgp_order("dgp3") == (1, 2)
    assert dgp_order("dgp4") == (2, 1)


def test_deviation_constraint_pins_single_entry():
    for dgp, idx in (("dgp3", 1), ("dgp4", 2)):
        con = deviation_constraint(dgp)
        expected = np.zeros((1, 3))
        expected[0, idx] = 1.0
        np.testing.assert_array_equal(con.R, expected)
        np.testing.assert_array_equal(con.r, [0.0])
    with pytest.raises(ValueError, match="deviation"):
        deviation_constraint("dgp1")


def test_tau_shapes():
    x = np.linspace(0, 1, 9)
    np.testing.assert_array_equal(tau_function("constant")(x), np.ones(9))
    np.testing.assert_allclose(tau_function("linear")(x), 1 + 2 * x)
    assert tau_function("cyclical")(0.125) == pytest.approx(1.5)
    assert np.all(tau_function("cyclical")(x) >= 0.5)


def test_reproducible_and_rep_indexed():
    spec = SimSpec(dgp="dgp2", T=500, n_reps=4, seed=12)
    a = simulate(spec, 2)
    b = simulate(spec, 2)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate(spec, 3)
    assert not np.array_equal(a.values, c.values)


def test_label_identifies_replication():
    spec = SimSpec(dgp="dgp2", tau_shape="linear", innovation="st10",
                   T=400, n_reps=5, seed=1)
    assert simulate(spec, 3).label == "dgp2-k0-linear-st10-T400-rep3"


def test_burn_in_extension_is_inert():
    # the burn block grows backwards in time, so the retained sample
    # is unchanged up to a contraction term far below double precision
    spec = SimSpec(dgp="dgp2", tau_shape="linear", T=2000, n_reps=1, seed=5)
    a = simulate(spec, 0, n_burn=500).values
    b = simulate(spec, 0, n_burn=1000).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_common_draws_across_tau_shapes():
    base = SimSpec(dgp="dgp2", tau_shape="constant", T=2000, n_reps=1, seed=8)
    lin = SimSpec(dgp="dgp2", tau_shape="linear", T=2000, n_reps=1, seed=8)
    y0 = simulate(base, 0).values
    y1 = simulate(lin, 0).values
    x = np.arange(1, 2001) / 2000
    np.testing.assert_allclose(y1, np.sqrt(1 + 2 * x) * y0, rtol=1e-13)


def test_unconditional_variance_is_one():
    for dist in ("normal", "st5"):
        spec = SimSpec(dgp="dgp2", innovation=dist, T=1_000_000,
                       n_reps=1, seed=31)
        _, u, _, eta = simulate_with_state(spec, 0)
        assert np.mean(u ** 2) == pytest.approx(1.0, abs=0.02)
        assert np.mean(eta ** 2) == pytest.approx(1.0, abs=0.02)


def test_student_innovations_are_standardized_heavy():
    spec = SimSpec(dgp="dgp2", innovation="st10", T=1_000_000,
                   n_reps=1, seed=31)
    _, _, _, eta = simulate_with_state(spec, 0)
    kurt = np.mean(eta ** 4) / np.mean(eta ** 2) ** 2
    assert 3.7 < kurt < 4.3


def test_state_is_consistent():
    spec = SimSpec(dgp="dgp2", tau_shape="cyclical", T=1000, n_reps=1, seed=2)
    series, u, g, eta = simulate_with_state(spec, 0)
    np.testing.assert_allclose(u, np.sqrt(g) * eta, rtol=1e-14)
    x = np.arange(1, 1001) / 1000
    np.testing.assert_allclose(series.values,
                               np.sqrt(tau_function("cyclical")(x)) * u,
                               rtol=1e-14)
    assert np.all(g > 0)


def test_run_cell_smoke():
    spec = SimSpec(dgp="dgp2", T=300, n_reps=3, seed=3)
    cell = run_cell(spec)
    n_kept = spec.n_reps - cell.n_excluded
    assert cell.estimates.shape == (n_kept, 2)
    assert cell.ses.shape == (n_kept, 2)
    assert np.all((cell.bandwidths > 0) & (cell.bandwidths < 0.5))
    assert cell.bias.shape == (2,)
    assert np.all(cell.esd >= 0) and np.all(cell.asd > 0)


def test_run_cell_thread_determinism():
    spec = SimSpec(dgp="dgp2", T=300, n_reps=3, seed=3)
    serial = run_cell(spec, threads=1)
    parallel = run_cell(spec, threads=2)
    np.testing.assert_array_equal(serial.estimates, parallel.estimates)
    np.testing.assert_array_equal(serial.bandwidths, parallel.bandwidths)


def test_run_power_curves_smoke():
    report = run_power_curves("dgp3", 300, [0, 2], n_reps=3, seed=6, lags=(4,))
    assert report.k_values == (0, 2)
    assert set(report.rates) == {"lm", "q4"}
    assert all(r.shape == (2,) for r in report.rates.values())
    assert len(report.p_values) == 2
    for pv in report.p_values:
        for arr in pv.values():
            assert np.all((arr >= 0) & (arr <= 1))
    with pytest.raises(ValueError, match="dgp3 and dgp4"):
        run_power_curves("dgp1", 300, [0], n_reps=3)


def test_run_estimator_study_smoke():
    spec = SimSpec(dgp="dgp2", T=300, n_reps=2, seed=14)
    study = run_estimator_study(spec, ("two_step", "vt", "three_step"))
    n_kept = spec.n_reps - study.n_excluded
    assert set(study.estimates) == {"two_step", "vt", "three_step"}
    for arr in study.estimates.values():
        assert arr.shape == (n_kept, 2)
    with pytest.raises(ValueError, match="unknown estimator"):
        run_estimator_study(spec, ("two_step", "ols"))
