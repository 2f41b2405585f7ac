"""Command-line interface: ``jitcalib {metrics,recalibrate,experiment,report}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .binning import SCHEMAS, BinningConfig, bins_to_csv
from .dataset import dump_predictions, load_commits, load_predictions
from .exceptions import JitCalibError
from .metrics import calibration_report, confusion, percent, reliability_series
from .plotting import bin_sizes_svg, reliability_csv, reliability_svg
from .protocol import (ModelConfig, MeasurementTable, compare, comparison_to_json, render_comparison,
                       run_external, run_rq1, run_rq2)
from .recalibration import apply_params, fit_calibrator, params_to_json

log = logging.getLogger("jitcalib")

_CURVE_LABEL = {"none": "original", "platt": "Platt", "temperature": "Temperature"}


class CliError(JitCalibError):
    pass


def _configs(args):
    schemas = SCHEMAS if args.schema == "both" else (args.schema,)
    if any(b < 1 for b in args.bins):
        raise CliError("--bins values must be >= 1")
    return [BinningConfig(b, s) for b in args.bins for s in schemas]


def _methods(method, allow_none=False):
    if method == "both":
        return ["platt", "temperature"]
    if method == "none" and not allow_none:
        raise CliError("a calibration method is required (platt, temperature or both)")
    return [method]


def _pred_format(path, fmt):
    if fmt == "json":
        return "jsonl"
    if fmt == "csv":
        return "csv"
    return "jsonl" if str(path).endswith((".jsonl", ".json")) else "csv"


def _load_preds(path, args):
    try:
        preds = load_predictions(path, _pred_format(path, args.format), threshold=args.threshold)
    except JitCalibError as exc:
        raise CliError(f"{path}: {exc}") from exc
    if len(preds) == 0:
        raise CliError(f"{path}: no predictions loaded")
    return preds


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _summary(report):
    return f"ECE {percent(report.ece)}% MCE {percent(report.mce)}% Brier {percent(report.brier)}%"


def cmd_metrics(args):
    preds = _load_preds(args.predictions, args)
    out = _out_dir(args)
    reports = []
    for cfg in _configs(args):
        rep = calibration_report(preds.true_label, preds.prob, cfg)
        reports.append(rep)
        _write(out / f"bins_{cfg.name}.csv", bins_to_csv(rep.bins))
        curves = {"original": reliability_series(rep.bins)}
        _write(out / f"reliability_{cfg.name}.svg", reliability_svg(curves, f"Reliability diagram ({cfg.name})"))
        _write(out / f"reliability_{cfg.name}.csv", reliability_csv(curves))
        _write(out / f"bin_sizes_{cfg.name}.svg", bin_sizes_svg(rep.bins, f"Bin sizes ({cfg.name})"))
        print(f"{cfg.name}: {_summary(rep)}")
    acc = confusion(preds.true_label, preds.prob, threshold=args.threshold)
    doc = {
        "m": len(preds),
        "calibration": [row for rep in reports for row in rep.to_records()],
        "accuracy": acc.to_dict(),
    }
    _write(out / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_recalibrate(args):
    cal = _load_preds(args.calibration, args)
    target = _load_preds(args.target, args)
    if cal.ids is not None and target.ids is not None:
        overlap = set(cal.ids) & set(target.ids)
        if overlap:
            log.warning("%d id(s) appear in both the calibration and target files; "
                        "calibration measurements may be biased", len(overlap))
    out = _out_dir(args)
    configs = _configs(args)
    fmt = _pred_format(args.target, args.format)
    for method in _methods(args.method):
        params = fit_calibrator(method, cal)
        if not params.converged:
            log.warning("%s fit did not converge", method)
        recal = apply_params(params, target)
        _write(out / f"params_{method}.json", params_to_json(params) + "\n")
        ext = "jsonl" if fmt == "jsonl" else "csv"
        _write(out / f"recalibrated_{method}.{ext}", dump_predictions(recal, None, format=fmt))
        for cfg in configs:
            before = calibration_report(target.true_label, target.prob, cfg)
            after = calibration_report(recal.true_label, recal.prob, cfg)
            print(f"{method} {cfg.name}: ECE {percent(before.ece)}% -> {percent(after.ece)}%")
    return 0


def _figures(out, tables, configs):
    """Overlay test-set reliability curves (first repetition) of every run."""
    reps = [set(t.test_predictions) for t in tables.values()]
    common = sorted(set.intersection(*reps)) if reps else []
    if not common:
        return
    r = common[0]
    for cfg in configs:
        curves = {}
        for method, table in tables.items():
            p = table.test_predictions[r]
            curves[_CURVE_LABEL.get(method, method)] = reliability_series(
                calibration_report(p.true_label, p.prob, cfg).bins)
        _write(out / f"reliability_test_{cfg.name}.svg",
               reliability_svg(curves, f"Reliability diagram, test set ({cfg.name})"))
        _write(out / f"reliability_test_{cfg.name}.csv", reliability_csv(curves))


def cmd_experiment(args):
    configs = _configs(args)
    methods = _methods(args.method, allow_none=True)
    if args.method == "none":
        methods = []
    out = _out_dir(args)
    tables = {}
    if args.external:
        if len(args.data) != 1:
            raise CliError("--external takes exactly one prediction export")
        preds = _load_preds(args.data[0], args)
        tables["none"] = run_external(preds, "none", configs)
        for m in methods:
            tables[m] = run_external(preds, m, configs)
    else:
        if len(args.data) != 2:
            raise CliError("experiment needs TRAIN and TEST commit files")
        exclude = tuple(c for c in args.exclude.split(",") if c) if args.exclude else ()
        try:
            train = load_commits(args.data[0], exclude=exclude)
            test = load_commits(args.data[1], exclude=exclude)
        except JitCalibError as exc:
            raise CliError(f"{exc}") from exc
        model = ModelConfig(features=tuple(args.features.split(",")), l2=args.l2)
        common = dict(k=args.folds, repetitions=args.repetitions, seed=args.seed, binnings=configs,
                      stratify=args.stratify)
        tables["none"] = run_rq1(train, test, model, **common)
        for m in methods:
            tables[m] = run_rq2(train, test, model, method=m, **common)

    for method, table in tables.items():
        name = "rq1" if method == "none" else f"rq2_{method}"
        table.to_csv(out / f"measurements_{name}.csv")
        for skip in table.skipped:
            log.warning("%s: repetition %s fold %s skipped: %s", name, skip["repetition"], skip["fold"],
                        skip["reason"])
    if methods:
        comparisons = {m: compare(tables["none"], tables[m], seed=args.seed) for m in methods}
        text = render_comparison(comparisons)
        _write(out / "comparison.txt", text)
        _write(out / "comparison.json", comparison_to_json(comparisons) + "\n")
        print(text, end="")
    _figures(out, tables, configs)
    return 0


def cmd_report(args):
    before = MeasurementTable.from_csv(args.before)
    comparisons = {}
    for item in args.after:
        method, sep, path = item.partition("=")
        if not sep:
            path = item
            method = MeasurementTable.from_csv(path).method
        comparisons[method] = compare(before, MeasurementTable.from_csv(path), seed=args.seed)
    out = _out_dir(args)
    text = render_comparison(comparisons)
    _write(out / "comparison.txt", text)
    _write(out / "comparison.json", comparison_to_json(comparisons) + "\n")
    print(text, end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="jitcalib", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, bins=True):
        if bins:
            sp.add_argument("--bins", type=int, nargs="+", default=[15, 50])
            sp.add_argument("--schema", choices=[*SCHEMAS, "both"], default="both")
        sp.add_argument("--threshold", type=float, default=0.5)
        sp.add_argument("--format", choices=["csv", "json"], default=None,
                        help="prediction file format (json means JSON lines); inferred from the suffix")
        sp.add_argument("--out", default="jitcalib-out")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("metrics", help="calibration and accuracy metrics of a prediction file")
    sp.add_argument("predictions")
    common(sp)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("recalibrate", help="fit a calibrator on one file and apply it to another")
    sp.add_argument("calibration")
    sp.add_argument("target")
    sp.add_argument("--method", choices=["platt", "temperature", "both"], default="both")
    common(sp)
    sp.set_defaults(func=cmd_recalibrate)

    sp = sub.add_parser("experiment", help="repeated cross-validation before/after recalibration")
    sp.add_argument("data", nargs="+", help="TRAIN TEST commit CSVs, or one export with --external")
    sp.add_argument("--external", action="store_true",
                    help="DATA is a prediction export with repetition, fold and role columns")
    sp.add_argument("--method", choices=["none", "platt", "temperature", "both"], default="both")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--repetitions", type=int, default=10)
    sp.add_argument("--features", default="la")
    sp.add_argument("--l2", type=float, default=1.0)
    sp.add_argument("--stratify", action="store_true")
    sp.add_argument("--exclude", default="", help="comma-separated non-numeric columns to ignore")
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("report", help="compare saved measurement tables")
    sp.add_argument("--before", required=True)
    sp.add_argument("--after", required=True, action="append", help="[METHOD=]CSV, repeatable")
    common(sp, bins=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (JitCalibError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
