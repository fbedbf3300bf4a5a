"""``shiftlab`` command line: changepoint, did, kde-shift, cohort.

Exit codes: 0 success, 2 input error, 3 analysis error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
import warnings

from . import __version__
from .changepoint import PenaltySpec, detect
from .cohort import (
    DEFAULT_WINDOWS,
    CohortDelta,
    WindowAnalysis,
    cohort_analysis,
    detect_anchor,
    previous_year,
    severity_split,
)
from .core import RngSeed
from .cost import KINDS, CostModel
from .did import VCOV_KINDS, build_design, did_report, fit_ols
from .errors import InputError, ShiftlabError
from .io import (
    AnalysisReport,
    dumps_canonical,
    emit_report,
    load_did_csv,
    load_events_csv,
    load_series_csv,
    write_density_csv,
    write_series_csv,
)
from .kdeshift import GridSpec, windowed_shift_test

COST_FLAGS = {"l2": "l2", "normal": "normal", "poisson": "poisson"}
assert set(COST_FLAGS.values()) == set(KINDS)


def _date_arg(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _anchor_arg(text: str):
    return "auto" if text == "auto" else _date_arg(text)


def _windows_arg(text: str) -> list[int]:
    try:
        ws = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"windows must be comma-separated integers, got {text!r}") from None
    if not ws or any(w < 1 for w in ws):
        raise argparse.ArgumentTypeError("windows must be positive")
    return ws


def _seed_arg(text: str) -> int:
    try:
        return RngSeed(int(text)).seed
    except (ValueError, ShiftlabError):
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}") from None


def _levels_arg(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed_arg, default=0, help="RNG seed for randomised steps")
    common.add_argument("--output", "-o", help="report path (JSON); stdout when omitted")
    common.add_argument("--quiet", "-q", action="store_true", help="suppress the stderr summary")

    p = argparse.ArgumentParser(prog="shiftlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cp = sub.add_parser("changepoint", parents=[common], help="penalised change-point detection")
    cp.add_argument("--input", required=True)
    cp.add_argument("--value-col", default="value")
    cp.add_argument("--date-col", default=None)
    cp.add_argument("--cost", choices=sorted(COST_FLAGS), default="l2")
    cp.add_argument("--penalty", default="bic", help="bic, aic or a positive number")
    cp.add_argument("--solver", choices=("exact", "pelt"), default="pelt")
    cp.add_argument("--min-seg-len", type=int, default=2)
    cp.add_argument("--breaks-out", help="CSV of the series with segment ids and break markers")

    dd = sub.add_parser("did", parents=[common], help="difference-in-differences regression")
    dd.add_argument("--input", required=True)
    dd.add_argument("--y", required=True)
    dd.add_argument("--time", required=True)
    dd.add_argument("--lockdown", required=True)
    dd.add_argument("--x", required=True)
    dd.add_argument("--x-levels", type=_levels_arg, help="declared x levels, reference first")
    dd.add_argument("--x-numeric", action="store_true", help="treat x as a real covariate")
    dd.add_argument("--vcov", choices=VCOV_KINDS, default="classical")
    dd.add_argument("--level", type=float, default=0.95)

    kd = sub.add_parser("kde-shift", parents=[common], help="KDE distribution shift and ISE permutation test")
    kd.add_argument("--input", required=True)
    kd.add_argument("--anchor", type=_anchor_arg, required=True, help="YYYY-MM-DD or auto")
    kd.add_argument("--window", type=int, default=30)
    kd.add_argument("--grid", type=int, default=128)
    kd.add_argument("--padding", type=float, default=3.0, help="grid padding in bandwidths (>= 3)")
    kd.add_argument("--permutations", type=int, default=999)
    kd.add_argument("--date-col", default="date")
    kd.add_argument("--x-col", default="x")
    kd.add_argument("--y-col", default="y")
    kd.add_argument("--density-out", help="CSV with x, y, f_before, f_after")

    co = sub.add_parser("cohort", parents=[common], help="windowed per-group count and share deltas")
    co.add_argument("--input", required=True)
    co.add_argument("--anchor", type=_anchor_arg, default="auto", help="YYYY-MM-DD or auto")
    co.add_argument("--windows", type=_windows_arg, default=list(DEFAULT_WINDOWS))
    co.add_argument("--factor", required=True)
    co.add_argument("--boot", type=int, default=999)
    co.add_argument("--level", type=float, default=0.95)
    co.add_argument("--seasonal", action="store_true", help="subtract the prior-year same-window delta")
    co.add_argument("--date-col", default="date")
    co.add_argument("--weight-col", default=None)
    co.add_argument("--severity-split", action="store_true", help="also stratify by severity and mode")
    co.add_argument("--severity-col", default="severity")
    co.add_argument("--mode-col", default="mode")
    co.add_argument("--no-injury-level", default="no_injury")
    return p


def _delta_dict(d: CohortDelta) -> dict:
    return {
        "group": d.group,
        "window_days": d.window_days,
        "count_before": d.count_before,
        "count_after": d.count_after,
        "count_delta": d.count_delta,
        "count_ci": list(d.count_ci) if d.count_ci else None,
        "count_significant": d.count_significant,
        "share_before": d.share_before,
        "share_after": d.share_after,
        "share_delta": d.share_delta,
        "share_ci": list(d.share_ci) if d.share_ci else None,
        "share_significant": d.share_significant,
        "seasonally_adjusted": d.seasonally_adjusted,
    }


def _window_dict(w: WindowAnalysis) -> dict:
    return {
        "window_days": w.window_days,
        "anchor": w.anchor.isoformat(),
        "prior_anchor": w.prior_anchor.isoformat() if w.prior_anchor else None,
        "groups": [_delta_dict(d) for d in w.deltas],
        "total": _delta_dict(w.total),
        "share_delta_sum": sum(d.share_delta for d in w.deltas),
    }


def run_changepoint(args) -> AnalysisReport:
    series, digest = load_series_csv(args.input, args.value_col, args.date_col, with_digest=True)
    model = CostModel(COST_FLAGS[args.cost])
    penalty = PenaltySpec.parse(args.penalty)
    res = detect(series, model, penalty, args.min_seg_len, solver=args.solver)
    segments = []
    for (s, e), c in zip(res.segmentation.segments(), res.per_segment_costs):
        seg = series.values[s - 1 : e - 1]
        segments.append({"start": s, "end_exclusive": e, "length": e - s, "mean": float(seg.mean()), "cost": c})
    results = {
        "breaks": list(res.breaks),
        "break_dates": [series.date_of(b).isoformat() for b in res.breaks] if series.start_date else None,
        "K": res.K,
        "objective": res.objective,
        "beta": res.beta,
        "segments": segments,
        "solver": res.solver,
        "index_convention": "1-based; segment k spans [t_k, t_{k+1})",
    }
    if args.breaks_out:
        write_series_csv(args.breaks_out, series, res.breaks)
    params = {
        "cost": model.kind,
        "penalty": args.penalty,
        "beta": res.beta,
        "solver": args.solver,
        "min_seg_len": args.min_seg_len,
        "value_col": args.value_col,
        "date_col": args.date_col,
        "var_floor": model.var_floor,
        "rate_floor": model.rate_floor,
    }
    return AnalysisReport(__version__, "changepoint", digest, params, results)


def run_did(args) -> AnalysisReport:
    records, digest = load_did_csv(args.input, args.y, args.time, args.lockdown, args.x, args.x_numeric)
    levels = {"x": args.x_levels} if args.x_levels else None
    design = build_design(records, levels)
    fit = fit_ols(design, args.vcov)
    terms = did_report(fit, args.level)
    coefs = []
    for i, name in enumerate(fit.columns):
        coefs.append(
            {
                "name": name,
                "estimate": fit.coefficients[i],
                "stderr": fit.stderr[i],
                "t": fit.t_stats[i],
                "p_value": fit.p_values[i],
            }
        )
    results = {
        "estimator": "OLS on the user-supplied response, treatment coding, QR solve",
        "formula": f"{args.y} ~ {args.time} * {args.lockdown} * {args.x}",
        "seasonal_control": "prior-period rows act as control; the time:lockdown terms net out seasonal change",
        "n": fit.n_obs,
        "columns": list(fit.columns),
        "reference_levels": {k: str(v) for k, v in design.reference.items()},
        "coefficients": coefs,
        "lockdown_terms": [
            {
                "name": t.name,
                "estimate": t.estimate,
                "stderr": t.stderr,
                "ci": [t.ci_low, t.ci_high] if t.ci_low is not None else None,
                "p_value": t.p_value,
                "significant": t.significant,
            }
            for t in terms
        ],
        "residual_df": fit.residual_df,
        "r_squared": fit.r_squared,
        "vcov": fit.vcov_kind,
    }
    params = {
        "y": args.y,
        "time": args.time,
        "lockdown": args.lockdown,
        "x": args.x,
        "x_levels": args.x_levels,
        "x_numeric": args.x_numeric,
        "vcov": args.vcov,
        "level": args.level,
    }
    warn = [] if fit.residual_df > 0 else ["saturated model: zero residual degrees of freedom, uncertainty undefined"]
    return AnalysisReport(__version__, "did", digest, params, results, warn)


def _resolve_anchor(anchor, events, warn: list[str]) -> dt.date:
    if anchor != "auto":
        return anchor
    a = detect_anchor(events)
    warn.append(f"anchor auto-detected as the first change-point of the daily totals: {a.isoformat()}")
    return a


def run_kde(args) -> AnalysisReport:
    table = load_events_csv(args.input, args.date_col, args.x_col, args.y_col)
    warn = list(table.warnings)
    anchor = _resolve_anchor(args.anchor, table.records, warn)
    spec = GridSpec(args.grid, args.grid, args.padding)
    res, fb, fa = windowed_shift_test(table.records, anchor, args.window, spec, args.permutations, args.seed)
    if args.density_out:
        write_density_csv(args.density_out, fb, fa)
    results = {
        "anchor": anchor.isoformat(),
        "ise": res.ise,
        "p_value": res.p_value,
        "n_permutations": res.n_permutations,
        "n_exceed": res.n_exceed,
        "null_quantiles": {f"q{int(round(q * 100)):02d}": v for q, v in res.null_quantiles.items()},
        "n_before": res.n_a,
        "n_after": res.n_b,
        "bandwidth": {"hx": res.bandwidth.hx, "hy": res.bandwidth.hy, "rule": "silverman, pooled sample"},
        "grid": {
            "bounds": list(res.grid.bounds),
            "nx": res.grid.nx,
            "ny": res.grid.ny,
            "dx": res.grid.dx,
            "dy": res.grid.dy,
        },
        "mass_before": fb.mass(),
        "mass_after": fa.mass(),
        "hotspot_before": list(fb.argmax()),
        "hotspot_after": list(fa.argmax()),
    }
    params = {
        "anchor": args.anchor if args.anchor == "auto" else args.anchor.isoformat(),
        "window": args.window,
        "grid": args.grid,
        "padding": args.padding,
        "permutations": args.permutations,
        "seed": args.seed,
    }
    return AnalysisReport(__version__, "kde-shift", table.digest, params, results, warn)


def run_cohort(args) -> AnalysisReport:
    if args.boot < 200:
        raise InputError("--boot must be at least 200")
    table = load_events_csv(args.input, args.date_col, None, None, weight_col=args.weight_col)
    warn = list(table.warnings)
    anchor = _resolve_anchor(args.anchor, table.records, warn)
    prior = previous_year(anchor) if args.seasonal else None
    analyses = cohort_analysis(table.records, anchor, args.factor, args.windows, args.level, args.boot, args.seed, prior)
    for a in analyses:
        warn.extend(a.warnings)
    results = {
        "anchor": anchor.isoformat(),
        "factor": args.factor,
        "levels": table.levels.get(args.factor, []),
        "ci_method": "percentile bootstrap, Poisson-resampled events within each window",
        "windows": [_window_dict(a) for a in analyses],
    }
    if args.severity_split:
        splits = []
        for w in args.windows:
            s = severity_split(
                table.records,
                anchor,
                w,
                args.severity_col,
                args.mode_col,
                args.no_injury_level,
                args.level,
                args.boot,
                args.seed,
                prior,
            )
            splits.append(
                {
                    "window_days": w,
                    "no_injury_share": {"before": s.no_injury_share[0], "after": s.no_injury_share[1]},
                    "overall": _window_dict(s.overall),
                    "by_mode": {k: _window_dict(v) for k, v in s.by_mode.items()},
                    "by_severity": {k: _window_dict(v) for k, v in s.by_severity.items()},
                }
            )
        results["severity_split"] = splits
    params = {
        "anchor": args.anchor if args.anchor == "auto" else args.anchor.isoformat(),
        "windows": args.windows,
        "factor": args.factor,
        "boot": args.boot,
        "level": args.level,
        "seed": args.seed,
        "seasonal": args.seasonal,
        "weight_col": args.weight_col,
        "severity_split": args.severity_split,
    }
    return AnalysisReport(__version__, "cohort", table.digest, params, results, warn)


RUNNERS = {"changepoint": run_changepoint, "did": run_did, "kde-shift": run_kde, "cohort": run_cohort}


def _summary(report: AnalysisReport) -> str:
    r = report.results
    if report.analysis == "changepoint":
        return f"changepoint: K={r['K']} breaks={r['breaks']}"
    if report.analysis == "did":
        sig = [t["name"] for t in r["lockdown_terms"] if t["significant"]]
        return f"did: n={r['n']} significant lockdown terms: {sig or 'none'}"
    if report.analysis == "kde-shift":
        return f"kde-shift: ISE={r['ise']:.4g} p={r['p_value']:.4g}"
    return f"cohort: anchor {r['anchor']}, {len(r['windows'])} window(s)"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = RUNNERS[args.command](args)
        report.warnings.extend(str(w.message) for w in caught)
        if args.output:
            emit_report(report, args.output)
        else:
            sys.stdout.write(dumps_canonical(report.to_dict()))
    except ShiftlabError as exc:
        print(f"shiftlab {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    if not args.quiet:
        print(_summary(report), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
