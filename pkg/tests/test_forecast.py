import math

import numpy as np
import pytest
import scipy.stats

from sgarch import DataError, KernelSpec, ReturnSeries, SimSpec
from sgarch.forecast import (ForecastConfig, _arch_forecast, _fit_arch,
                             dm_test, forecast_garch_vt, forecast_sgarch,
                             garch_variance_forecast, qlike_loss,
                             qlike_report, select_ls_window)
from sgarch.kernel import CVConfig, select_bandwidth_cv
from sgarch.qmle import GarchParams
from sgarch.simulate import simulate


class TestVarianceForecast:
    def test_one_and_two_step_by_hand(self):
        params = GarchParams(p=1, q=1, theta=np.array([0.1, 0.8]))
        assert garch_variance_forecast(params, [4.0], [1.0], 1) == pytest.approx(1.3)
        # beyond the sample both u^2 and g are replaced by the 1-step value
        assert garch_variance_forecast(params, [4.0], [1.0], 2) == pytest.approx(1.27)
        assert garch_variance_forecast(params, [4.0], [1.0], 3) == pytest.approx(1.243)

    def test_two_lag_arch_by_hand(self):
        params = GarchParams(p=0, q=2, theta=np.array([0.3, 0.3]))
        f1 = garch_variance_forecast(params, [2.0, 0.5], [1.0, 1.0], 1)
        assert f1 == pytest.approx(0.4 + 0.3 * 0.5 + 0.3 * 2.0)
        f2 = garch_variance_forecast(params, [2.0, 0.5], [1.0, 1.0], 2)
        assert f2 == pytest.approx(0.4 + 0.3 * f1 + 0.3 * 0.5)

    def test_long_horizon_mean_reverts(self):
        params = GarchParams(p=1, q=1, theta=np.array([0.1, 0.8]))
        f = garch_variance_forecast(params, [4.0], [1.0], 1000)
        assert f == pytest.approx(1.0, rel=1e-10)

    def test_validation(self):
        params = GarchParams(p=1, q=1, theta=np.array([0.1, 0.8]))
        with pytest.raises(ValueError, match="t0"):
            garch_variance_forecast(params, [4.0], [1.0], 0)
        with pytest.raises(ValueError, match="length"):
            garch_variance_forecast(params, [4.0, 1.0], [1.0], 1)


def test_forecast_sgarch_scale_equivariance():
    series = simulate(SimSpec(dgp="dgp2", tau_shape="linear", T=400,
                              n_reps=1, seed=17), 0)
    spec = KernelSpec(bandwidth=0.2)
    base = forecast_sgarch(series, (1, 1), spec, 5)
    scaled = forecast_sgarch(ReturnSeries(3.0 * series.values), (1, 1), spec, 5)
    assert scaled == pytest.approx(9.0 * base, rel=1e-10)


class TestQlikeLoss:
    def test_perfect_forecast_value(self):
        assert qlike_loss(2.0, 2.0) == pytest.approx(math.log(2.0) + 1.0)

    def test_minimized_at_truth(self):
        r = 1.7
        grid = np.geomspace(r / 10, r * 10, 401)
        losses = [qlike_loss(r, f) for f in grid]
        assert grid[int(np.argmin(losses))] == pytest.approx(r, rel=0.02)

    def test_floor_keeps_loss_finite(self):
        assert math.isfinite(qlike_loss(1.0, 0.0))
        assert math.isfinite(qlike_loss(1.0, -2.0))


class TestDmTest:
    def test_hand_value(self):
        a = np.array([2.0, 3.0, 4.0, 5.0])
        b = np.array([1.0, 1.0, 1.0, 1.0])
        res = dm_test(a, b, lag=0)
        assert res.statistic == pytest.approx(math.sqrt(20.0))
        assert res.p_value == pytest.approx(2 * scipy.stats.norm.sf(math.sqrt(20.0)))

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        a = rng.chisquare(2, 60)
        b = rng.chisquare(2, 60)
        fwd = dm_test(a, b, lag=4)
        rev = dm_test(b, a, lag=4)
        assert fwd.statistic == pytest.approx(-rev.statistic, rel=1e-12)
        assert fwd.p_value == pytest.approx(rev.p_value, rel=1e-12)

    def test_identical_streams(self):
        a = np.arange(10.0)
        res = dm_test(a, a.copy(), lag=2)
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_constant_offset_is_infinitely_significant(self):
        a = np.ones(20)
        res = dm_test(a + 0.5, a, lag=1)
        assert res.statistic == math.inf and res.p_value == 0.0
        res = dm_test(a - 0.5, a, lag=1)
        assert res.statistic == -math.inf

    def test_lag_is_shortened(self):
        rng = np.random.default_rng(4)
        assert dm_test(rng.random(10), rng.random(10), lag=50).lag == 9

    def test_validation(self):
        with pytest.raises(ValueError, match="equal-length"):
            dm_test([1.0, 2.0], [1.0], lag=0)
        with pytest.raises(ValueError, match="lag"):
            dm_test([1.0, 2.0], [1.0, 2.0], lag=-1)


class TestWindowSelection:
    def test_selected_window_avoids_variance_break(self):
        rng = np.random.default_rng(1)
        vals = np.concatenate([rng.standard_normal(400),
                               3.0 * rng.standard_normal(200)])
        win, totals = select_ls_window(vals, 1, (50, 100, 200, 400), 50)
        assert win <= 200
        # the window spanning the break pays the largest loss
        assert totals[-1] == totals.max()

    def test_window_comes_from_grid(self):
        rng = np.random.default_rng(2)
        vals = rng.standard_normal(300)
        win, totals = select_ls_window(vals, 2, (60, 120), 30)
        assert win in (60, 120)
        assert totals.shape == (2,)
        assert np.all(np.isfinite(totals))

    def test_needs_enough_history(self):
        with pytest.raises(DataError, match="need at least"):
            select_ls_window(np.ones(100), 1, (50, 100), 50)

    def test_cache_round_trip(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(300)
        cache = {}
        win1, t1 = select_ls_window(vals, 1, (60, 120), 30, _cache=cache)
        assert len(cache) == 60
        win2, t2 = select_ls_window(vals, 1, (60, 120), 30, _cache=cache)
        assert win1 == win2
        np.testing.assert_array_equal(t1, t2)


class TestConfigValidation:
    def test_horizon_whitelist(self):
        with pytest.raises(ValueError, match="t0"):
            ForecastConfig(t0=3)

    def test_unknown_model(self):
        with pytest.raises(ValueError, match="unknown model"):
            ForecastConfig(models=("sgarch", "ewma"))

    def test_empty_models(self):
        with pytest.raises(ValueError, match="at least one"):
            ForecastConfig(models=())

    def test_grid_monotone(self):
        with pytest.raises(ValueError, match="increasing"):
            ForecastConfig(window_grid=(100, 50))

    def test_grid_fits_before_origin(self):
        with pytest.raises(ValueError, match="origin_start"):
            ForecastConfig(origin_start=400, window_grid=(100, 500))

    def test_positive_counts(self):
        with pytest.raises(ValueError, match="q_arch"):
            ForecastConfig(q_arch=0)
        with pytest.raises(ValueError, match="lookback"):
            ForecastConfig(lookback=0)


def test_report_rejects_short_series():
    series = ReturnSeries(np.random.default_rng(0).standard_normal(300))
    with pytest.raises(DataError, match="cannot support"):
        qlike_report(series, ForecastConfig(t0=22, origin_start=290,
                                            window_grid=(50,), lookback=20))
    with pytest.raises(DataError, match="ls_arch_q needs"):
        qlike_report(series, ForecastConfig(t0=1, origin_start=200,
                                            window_grid=(150,), lookback=60))


def test_single_origin_report_recovers_direct_forecasts():
    # one origin, so each row's QLIKE must equal the loss of the forecast
    # rebuilt by hand from data before the origin only
    series = simulate(SimSpec(dgp="dgp2", tau_shape="linear", T=251,
                              n_reps=1, seed=21), 0)
    cfg = ForecastConfig(t0=1, origin_start=250, q_arch=2,
                         window_grid=(50, 100), lookback=20)
    report = qlike_report(series, cfg)
    assert report.n_origins == 1

    vals = series.values
    prefix = ReturnSeries(vals[:250])
    realized = float(vals[250] ** 2)
    manual = {}
    for model, order in (("sgarch", (1, 1)), ("sarch_q", (0, 2))):
        h, _ = select_bandwidth_cv(prefix, CVConfig(pilot_order=order))
        manual[model] = forecast_sgarch(prefix, order, KernelSpec(bandwidth=h), 1)
    manual["garch_vt"] = forecast_garch_vt(prefix, (1, 1), 1)
    win, _ = select_ls_window(vals[:250], 2, (50, 100), 20)
    c, a, _ = _fit_arch(vals[250 - win:250], 2)
    manual["ls_arch_q"] = _arch_forecast(vals[248:250] ** 2, c, a, 1)

    for row in report.rows:
        assert row.n_fail == 0 and row.valid
        assert row.qlike == pytest.approx(qlike_loss(realized, manual[row.model]),
                                          rel=1e-9)


def test_rolling_report_structure():
    series = simulate(SimSpec(dgp="dgp2", tau_shape="cyclical", T=700,
                              n_reps=1, seed=10), 0)
    cfg = ForecastConfig(t0=5, origin_start=600, q_arch=3,
                         window_grid=(50, 100, 150), lookback=30)
    report = qlike_report(series, cfg)
    assert report.t0 == 5
    assert report.n_origins == 700 - 5 + 1 - 600
    assert tuple(r.model for r in report.rows) == cfg.models
    assert report.best_model in cfg.models
    for row in report.rows:
        if row.valid:
            assert math.isfinite(row.qlike)
        if row.model == report.best_model:
            assert row.dm_statistic is None and row.dm_p_value is None
        elif row.valid:
            assert math.isfinite(row.dm_statistic)
            assert 0.0 <= row.dm_p_value <= 1.0
    best_q = min(r.qlike for r in report.rows if r.valid)
    assert next(r for r in report.rows if r.model == report.best_model).qlike == best_q
