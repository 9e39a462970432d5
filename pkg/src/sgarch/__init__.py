"""Semiparametric GARCH inference.

Variance decomposes multiplicatively into a smooth long-run curve on
rescaled time, estimated by boundary-corrected kernel smoothing, and a
stationary short-run GARCH component, estimated by QMLE on the rescaled
series. The package covers estimation, adaptive standard errors, score
and portmanteau diagnostics, alternative estimators, cross-validated
bandwidth selection, Monte-Carlo harnesses, and rolling-origin
volatility forecasting.
"""

from .alternatives import (ThreeStepResult, VTResult, fit_vt,
                           sigma_star_plugin, three_step_update)
from .asymptotics import AsymptoticCov, estimate_covariance, guarded_inverse
from .data import ReturnSeries, load_series, sample_variance, save_series
from .diagnostics import (PortmanteauInternals, TestReport, lm_test,
                          portmanteau_test, squared_residual_acf)
from .exceptions import (ConstraintError, ConvergenceError, DataError,
                         SGarchError, SingularCovarianceError)
from .forecast import (DmResult, ForecastConfig, ModelForecastRow,
                       QlikeReport, dm_test, forecast_garch_vt,
                       forecast_ls_arch, forecast_sgarch,
                       garch_variance_forecast, qlike_report,
                       select_ls_window)
from .kernel import (CVConfig, KernelSpec, LongRunFit, bandwidth_grid,
                     cv_criterion, estimate_tau, kernel_eval,
                     select_bandwidth_cv, tau_at, tau_pointwise_ci)
from .qmle import (FilteredSeries, FitResult, GarchParams, LinearConstraint,
                   fit_qmle, fit_qmle_constrained, garch_filter,
                   make_filtered, neg_loglik)
from .simulate import (CellResult, EstimatorStudy, PowerReport, SimSpec,
                       deviation_constraint, dgp_order, dgp_theta, run_cell,
                       run_estimator_study, run_power_curves, run_table1,
                       simulate, simulate_with_state, tau_function)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticCov", "CVConfig", "CellResult", "ConstraintError",
    "ConvergenceError", "DataError", "DmResult", "EstimatorStudy",
    "FilteredSeries", "FitResult", "ForecastConfig", "GarchParams",
    "KernelSpec", "LinearConstraint", "LongRunFit", "ModelForecastRow",
    "PortmanteauInternals", "PowerReport", "QlikeReport", "ReturnSeries",
    "SGarchError", "SimSpec", "SingularCovarianceError", "TestReport",
    "ThreeStepResult", "VTResult", "bandwidth_grid", "cv_criterion",
    "deviation_constraint", "dgp_order", "dgp_theta", "dm_test",
    "estimate_covariance", "estimate_tau", "fit_qmle",
    "fit_qmle_constrained", "fit_vt", "forecast_garch_vt",
    "forecast_ls_arch", "forecast_sgarch", "garch_filter",
    "garch_variance_forecast", "guarded_inverse", "kernel_eval",
    "lm_test", "load_series", "make_filtered", "neg_loglik",
    "portmanteau_test", "qlike_report", "run_cell", "run_estimator_study",
    "run_power_curves", "run_table1", "sample_variance", "save_series",
    "select_bandwidth_cv", "select_ls_window", "sigma_star_plugin",
    "simulate", "simulate_with_state", "squared_residual_acf", "tau_at",
    "tau_function", "tau_pointwise_ci", "three_step_update",
]
