"""Command-line front end.

Subcommands: fit, lm-test, check, bandwidth, simulate, forecast,
compare-estimators. Machine-readable results are JSON (validated by the
schemas shipped under sgarch/schemas); tables and curves are CSV.
Exit codes: 0 success, 1 computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from .alternatives import fit_vt, sigma_star_plugin, three_step_update
from .asymptotics import estimate_covariance
from .data import load_series
from .diagnostics import lm_test, portmanteau_test
from .exceptions import SGarchError
from .forecast import MODEL_NAMES, ForecastConfig, qlike_report
from .kernel import BOUNDARY_MODES, CVConfig, KernelSpec, estimate_tau, \
    select_bandwidth_cv
from .qmle import LinearConstraint, fit_qmle
from .simulate import (DGP_NAMES, INNOVATIONS, TAU_SHAPES, SimSpec, dgp_order,
                       run_cell)

log = logging.getLogger("sgarch")


class UsageError(Exception):
    pass


def _default_threads() -> int:
    env = os.environ.get("SGARCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"SGARCH_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _parse_bandwidth(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"--bandwidth must be 'auto' or a number, got {text!r}") from exc


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise UsageError(f"cannot parse comma list {text!r}") from exc


def _parse_matrix(text: str) -> np.ndarray:
    rows = [_parse_vector(row) for row in text.split(";")]
    if len({r.size for r in rows}) != 1:
        raise UsageError(f"matrix rows have unequal lengths in {text!r}")
    return np.vstack(rows)


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse integer list {text!r}") from exc


def _load(args):
    column = args.column
    if column is not None and column.isdigit():
        column = int(column)
    return load_series(args.data, column=0 if column is None else column,
                       transform=args.transform)


def _resolve_spec(series, order, bandwidth: float | None):
    """KernelSpec from an explicit bandwidth or cross-validation."""
    if bandwidth is None:
        h, _ = select_bandwidth_cv(series, CVConfig(pilot_order=order))
        return KernelSpec(bandwidth=h)
    return KernelSpec(bandwidth=bandwidth)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(payload: dict, out: str | None) -> None:
    _emit(json.dumps(payload, indent=2, sort_keys=True), out)


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr).ravel()]


def _reject_map(report) -> dict:
    return {f"{lvl:.2f}": bool(flag) for lvl, flag in report.reject_at.items()}


# ---------------------------------------------------------------- subcommands

def _cmd_fit(args) -> int:
    series = _load(args)
    order = tuple(args.order)
    spec = _resolve_spec(series, order, _parse_bandwidth(args.bandwidth))
    lr = estimate_tau(series, spec, boundary=args.boundary)
    fit = fit_qmle(series, lr, order)
    cov = estimate_covariance(fit.filtered)
    _emit_json({
        "order": [int(v) for v in order],
        "theta": _floats(fit.params.theta),
        "omega": float(fit.params.omega),
        "se": _floats(cov.se),
        "loglik": float(fit.loglik),
        "h_used": float(spec.bandwidth),
        "converged": bool(fit.converged),
        "T": int(series.T),
        "seed": int(args.seed),
        "boundary": args.boundary,
    }, args.out)
    return 0


def _cmd_lm_test(args) -> int:
    series = _load(args)
    order = tuple(args.order)
    constraint = LinearConstraint(R=_parse_matrix(args.R), r=_parse_vector(args.r))
    spec = _resolve_spec(series, order, _parse_bandwidth(args.bandwidth))
    lr = estimate_tau(series, spec)
    report = lm_test(series, lr, order, constraint)
    _emit_json({
        "statistic": float(report.statistic),
        "df": int(report.df),
        "p_value": float(report.p_value),
        "reject_at": _reject_map(report),
        "order": [int(v) for v in order],
        "h_used": float(spec.bandwidth),
        "seed": int(args.seed),
    }, args.out)
    return 0


def _cmd_check(args) -> int:
    series = _load(args)
    order = tuple(args.order)
    lags = _parse_int_list(args.lags)
    spec = _resolve_spec(series, order, _parse_bandwidth(args.bandwidth))
    fit = fit_qmle(series, estimate_tau(series, spec), order)
    rows = []
    for ell in lags:
        report, _ = portmanteau_test(fit, ell)
        rows.append({"lag": int(ell), "statistic": float(report.statistic),
                     "df": int(report.df), "p_value": float(report.p_value)})
    _emit_json({
        "order": [int(v) for v in order],
        "h_used": float(spec.bandwidth),
        "seed": int(args.seed),
        "converged": bool(fit.converged),
        "lags": rows,
    }, args.out)
    return 0


def _cmd_bandwidth(args) -> int:
    series = _load(args)
    h_cv, curve = select_bandwidth_cv(
        series, CVConfig(pilot_order=tuple(args.pilot_order)))
    buf = io.StringIO()
    buf.write(f"# h_cv = {h_cv!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["h", "cv"])
    for h, cv_val in curve:
        writer.writerow([repr(float(h)), repr(float(cv_val))])
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_simulate(args) -> int:
    spec = SimSpec(dgp=args.dgp, tau_shape=args.tau, innovation=args.dist,
                   T=args.T, n_reps=args.reps, seed=args.seed, k=args.k)
    cell = run_cell(spec, threads=args.threads)
    as_json = args.out is not None and args.out.endswith(".json")
    p, q = dgp_order(args.dgp)
    names = [f"alpha_{i + 1}" for i in range(q)] + [f"beta_{j + 1}" for j in range(p)]
    if as_json:
        _emit_json({
            "dgp": args.dgp, "k": int(args.k), "tau": args.tau,
            "dist": args.dist, "T": int(args.T), "reps": int(args.reps),
            "seed": int(args.seed), "n_excluded": int(cell.n_excluded),
            "coefficients": names,
            "theta_true": _floats(cell.theta_true),
            "bias": _floats(cell.bias),
            "esd": _floats(cell.esd),
            "asd": _floats(cell.asd),
            "mean_h": float(cell.bandwidths.mean()),
        }, args.out)
        return 0
    buf = io.StringIO()
    buf.write(f"# dgp={args.dgp} k={args.k} tau={args.tau} dist={args.dist}"
              f" T={args.T} reps={args.reps} seed={args.seed}"
              f" excluded={cell.n_excluded}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["coeff", "true", "bias_x100", "esd_x100", "asd_x100"])
    for i, name in enumerate(names):
        writer.writerow([name, f"{cell.theta_true[i]:.4f}",
                         f"{100 * cell.bias[i]:.4f}",
                         f"{100 * cell.esd[i]:.4f}",
                         f"{100 * cell.asd[i]:.4f}"])
    _emit(buf.getvalue(), args.out)
    return 0


def _sig_marker(row) -> str:
    if not row.valid:
        return "invalid"
    if row.dm_p_value is None:
        return "best"
    if row.dm_p_value < 0.01:
        return "**"
    if row.dm_p_value < 0.05:
        return "*"
    return ""


def _cmd_forecast(args) -> int:
    series = _load(args)
    horizons = _parse_int_list(args.t0)
    models = tuple(args.models.split(","))
    reports = []
    for t0 in horizons:
        cfg = ForecastConfig(t0=t0, origin_start=args.origin_start,
                             models=models, q_arch=args.q,
                             order=tuple(args.order))
        reports.append(qlike_report(series, cfg))
    buf = io.StringIO()
    for rep in reports:
        buf.write(f"# t0={rep.t0} origins={rep.n_origins} best={rep.best_model}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["model"]
    for t0 in horizons:
        header += [f"qlike_t{t0}", f"sig_t{t0}"]
    writer.writerow(header)
    for mi, model in enumerate(models):
        row = [model]
        for rep in reports:
            r = rep.rows[mi]
            row += ["" if math.isinf(r.qlike) else f"{r.qlike:.6f}", _sig_marker(r)]
        writer.writerow(row)
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_compare(args) -> int:
    series = _load(args)
    order = tuple(args.order)
    spec = _resolve_spec(series, order, _parse_bandwidth(args.bandwidth))
    fit = fit_qmle(series, estimate_tau(series, spec), order)
    cov = estimate_covariance(fit.filtered)
    vt = fit_vt(series, order)
    three = three_step_update(fit, series, spec)
    sigma_star = sigma_star_plugin(three, three.filtered)
    T = series.T
    se_star = np.sqrt(np.clip(np.diag(sigma_star), 0.0, None) / T)
    _emit_json({
        "order": [int(v) for v in order],
        "h_used": float(spec.bandwidth),
        "seed": int(args.seed),
        "T": int(T),
        "methods": {
            "two_step": {"theta": _floats(fit.params.theta),
                         "se": _floats(cov.se),
                         "converged": bool(fit.converged)},
            "vt": {"theta": _floats(vt.params.theta),
                   "se": _floats(vt.cov.se),
                   "converged": bool(vt.converged),
                   "tau_bar": float(vt.tau_bar)},
            "three_step": {"theta": _floats(three.params.theta),
                           "se": _floats(se_star),
                           "n_fallback": int(three.n_fallback),
                           "projected": bool(three.projected)},
        },
    }, args.out)
    return 0


# -------------------------------------------------------------------- parser

def _add_common(sub, with_data=True, with_bandwidth=True, with_order=True):
    if with_data:
        sub.add_argument("data", help="CSV file with the return series")
        sub.add_argument("--column", default=None,
                         help="column name or 0-based index (default: first)")
        sub.add_argument("--transform", default="none",
                         choices=["none", "log_return_pct"],
                         help="transformation applied to the input column")
    if with_order:
        sub.add_argument("--order", nargs=2, type=int, metavar=("P", "Q"),
                         default=[1, 1], help="GARCH order: P beta lags, Q alpha lags")
    if with_bandwidth:
        sub.add_argument("--bandwidth", default="auto",
                         help="'auto' (cross-validation) or a value in (0, 0.5)")
    sub.add_argument("--seed", type=int, default=0, help="random seed (echoed)")
    sub.add_argument("--out", default=None, help="output file (default: stdout)")
    sub.add_argument("-v", "--verbose", action="store_true", help="log progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgarch",
        description="Semiparametric GARCH estimation, testing, and forecasting")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("fit", help="two-step fit: kernel long-run curve + QMLE")
    _add_common(sub)
    sub.add_argument("--boundary", default="reflection", choices=BOUNDARY_MODES,
                     help="boundary handling for the kernel estimator")
    sub.set_defaults(func=_cmd_fit)

    sub = subs.add_parser("lm-test", help="score test of R theta = r")
    _add_common(sub)
    sub.add_argument("--R", required=True,
                     help="constraint rows, e.g. '0,1,0;0,0,1'")
    sub.add_argument("--r", required=True, help="right-hand side, e.g. '0,0'")
    sub.set_defaults(func=_cmd_lm_test)

    sub = subs.add_parser("check", help="portmanteau residual diagnostics")
    _add_common(sub)
    sub.add_argument("--lags", default="6,9,12", help="comma list of lags")
    sub.set_defaults(func=_cmd_check)

    sub = subs.add_parser("bandwidth", help="cross-validation bandwidth curve")
    _add_common(sub, with_bandwidth=False, with_order=False)
    sub.add_argument("--pilot-order", nargs=2, type=int, metavar=("P", "Q"),
                     default=[1, 1], help="pilot model for the CV criterion")
    sub.set_defaults(func=_cmd_bandwidth)

    sub = subs.add_parser("simulate", help="Monte-Carlo parameter recovery cell")
    _add_common(sub, with_data=False, with_bandwidth=False, with_order=False)
    sub.add_argument("--dgp", required=True, choices=list(DGP_NAMES))
    sub.add_argument("--k", type=int, default=0, help="deviation index (dgp3/dgp4)")
    sub.add_argument("--tau", default="constant", choices=list(TAU_SHAPES))
    sub.add_argument("--dist", default="normal", choices=list(INNOVATIONS))
    sub.add_argument("--T", type=int, default=2000)
    sub.add_argument("--reps", type=int, default=500)
    sub.add_argument("--threads", type=int, default=None)
    sub.set_defaults(func=_cmd_simulate)

    sub = subs.add_parser("forecast", help="rolling-origin QLIKE comparison")
    _add_common(sub, with_bandwidth=False)
    sub.add_argument("--models", default=",".join(MODEL_NAMES),
                     help="comma list from: " + ", ".join(MODEL_NAMES))
    sub.add_argument("--t0", default="1", help="comma list of horizons (1,5,10,22)")
    sub.add_argument("--origin-start", type=int, default=1500,
                     help="first forecast origin")
    sub.add_argument("--q", type=int, default=5, help="ARCH order for *_q models")
    sub.add_argument("--threads", type=int, default=None)
    sub.set_defaults(func=_cmd_forecast)

    sub = subs.add_parser("compare-estimators",
                          help="two-step vs variance-targeting vs three-step")
    _add_common(sub)
    sub.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = _default_threads()
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: cannot read file: {exc}", file=sys.stderr)
        return 2
    except SGarchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
