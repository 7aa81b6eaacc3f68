"""Command-line front end.

    powerscope search  -r measurements.csv -b split.txt [-f dvfs.csv] -m 1 -n 4 --out-dir out
    powerscope unify   --pfm out/model.pfm --idle-sweep idle.csv --anchor mid -o out/model.ufm
    powerscope thermal --ufm out/model.ufm --runs run0.csv run1.csv
    powerscope predict --model out/model.ufm -r measurements.csv -b split.txt --out-dir out
    powerscope synth   [--spec spec.toml] [--seed 7] --out-dir fixtures

Exit status: 0 ok, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report
from .dataset import (DataError, DvfsTable, MeasurementTable, dvfs_from_table, fmt, load_dvfs,
                      load_measurements, load_split, slice_table, write_dvfs, write_measurements,
                      write_split)
from .perfreq import evaluate, load_pfm, predict_table, save_pfm
from .regress import FitError
from .selection import SearchConfig, SearchMode, search
from .synth import default_spec, generate, load_spec
from .thermal import (ThermalRun, attach_thermal, fit_thermal_static, predict_unified_thermal_table,
                      run_to_point)
from .unified import (Anchor, build_unified, estimate_static_zero_freq,
                      evaluate_unified, load_idle_csv, load_idle_sweep, load_ufm,
                      predict_unified_table, save_ufm, write_idle_csv)

log = logging.getLogger("powerscope")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_columns(text: str) -> list[int]:
    """'7,8,10-12' -> [7, 8, 10, 11, 12] (1-based column numbers)."""
    cols = []
    try:
        for part in text.replace(" ", ",").split(","):
            if not part:
                continue
            if "-" in part:
                lo, hi = part.split("-", 1)
                cols.extend(range(int(lo), int(hi) + 1))
            else:
                cols.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad column list {text!r}") from None
    if not cols or min(cols) < 1:
        raise argparse.ArgumentTypeError(f"bad column list {text!r}")
    return cols


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- search -----------------------------------------------------------------------

def cmd_search(args) -> int:
    fixed = args.events is not None
    if fixed and any(v is not None for v in (args.list, args.mode, args.max_counters)):
        raise UsageError("-e/--events cannot be combined with -l, -m or -n")
    if args.criterion != 1:
        raise UsageError(f"criterion {args.criterion} is not available; only 1 (average MAPE) is")
    columns = args.events if fixed else args.list
    table = load_measurements(args.measurements, args.power_column, columns)
    split = load_split(args.benchmarks)
    split.require_nonempty()
    dvfs = load_dvfs(args.freqs) if args.freqs else dvfs_from_table(table)

    if fixed:
        cfg = SearchConfig(mode=SearchMode.FIXED, fixed_counters=table.counter_names)
    else:
        mode = {1: SearchMode.BOTTOM_UP, 2: SearchMode.EXHAUSTIVE}.get(args.mode or 1)
        if mode is None:
            raise UsageError(f"unknown search mode {args.mode}; use 1 (bottom-up) or 2 (exhaustive)")
        cfg = SearchConfig(max_counters=args.max_counters or 4,
                           candidate_counters=table.counter_names, mode=mode)
    result = search(table, split, dvfs, cfg)

    out = _out_dir(args.out_dir)
    save_pfm(result.model, out / "model.pfm")
    test_report = evaluate(result.model, table, split.test)
    train_report = result.final_report
    report.error_table([("train", train_report), ("test", test_report)]).write(out / "errors_search.csv")

    lines = [f"mode: {cfg.mode.value}", f"criterion: {cfg.criterion.value}",
             f"candidates: {','.join(cfg.candidate_counters or cfg.fixed_counters)}",
             f"skipped: {','.join(result.skipped_counters)}"]
    if result.baseline_score is not None:
        lines.append(f"baseline_train_avg_mape: {fmt(result.baseline_score)}")
    for i, (counter, score) in enumerate(result.per_step_scores, start=1):
        lines.append(f"step {i}: +{counter} train_avg_mape={fmt(score)}")
    lines += [f"chosen: {','.join(result.chosen_counters)}",
              f"final_train_avg_mape: {fmt(train_report.mean_point_pct)}",
              f"final_train_overall_mape: {fmt(train_report.overall_pct)}",
              f"final_test_overall_mape: {fmt(test_report.overall_pct)}"]
    (out / "search_log.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "summary.txt").write_text(report.summary_text(
        "counter search", [("train", train_report), ("test", test_report)],
        [f"chosen counters: {', '.join(result.chosen_counters) or '(none)'}",
         f"parameters: {result.model.n_params} over {len(result.model.entries)} operating points"]),
        encoding="utf-8")
    print(f"chosen: {','.join(result.chosen_counters)}")
    print(f"train {report.sig4(train_report.overall_pct)}%  test {report.sig4(test_report.overall_pct)}%")
    return EXIT_OK


# --- unify / thermal ------------------------------------------------------------------

def cmd_unify(args) -> int:
    pf = load_pfm(args.pfm)
    sweep = load_idle_sweep(args.idle_sweep)
    dvfs = load_dvfs(args.freqs) if args.freqs else _dvfs_of(pf)
    u = build_unified(pf, Anchor.parse(args.anchor), sweep, dvfs, args.static_exponent)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ufm(u, out)
    est = estimate_static_zero_freq(sweep, dvfs.base_voltage)
    report.idle_fit_table(sweep.at_voltage(dvfs.base_voltage), est.static_w,
                          est.slope_w_per_hz).write(out.with_name(out.stem + "_idle_fit.csv"))
    print(f"{u.anchor.value}: reference {u.ref_point}, static {report.sig4(u.static_w)} W")
    return EXIT_OK


def _dvfs_of(pf):
    return DvfsTable(pf.points)


def cmd_thermal(args) -> int:
    u = load_ufm(args.ufm)
    runs = [ThermalRun.from_readings(load_idle_csv(p)) for p in args.runs]
    tm = fit_thermal_static(runs, args.t_ref)
    u = attach_thermal(u, tm)
    out = Path(args.out or args.ufm)
    save_ufm(u, out)
    report.thermal_fit_table([run_to_point(r) for r in runs], tm.slope_w_per_c,
                             tm.intercept_w).write(out.with_name(out.stem + "_thermal_fit.csv"))
    print(f"static(T) = {report.sig4(tm.slope_w_per_c)} W/C * T + {report.sig4(tm.intercept_w)} W"
          f" at {tm.voltage_v:g} V, fitted over [{tm.t_min_c:.4g}, {tm.t_max_c:.4g}] C")
    return EXIT_OK


# --- predict -------------------------------------------------------------------------

def cmd_predict(args) -> int:
    table = load_measurements(args.measurements, args.power_column, args.list)
    if args.benchmarks:
        chosen = load_split(args.benchmarks).subset(args.subset)
    elif args.subset != "all":
        raise UsageError("--subset needs a split file (-b)")
    else:
        chosen = None
    sub = slice_table(table, benchmarks=chosen)
    if not len(sub):
        raise DataError("no samples to predict")
    model_path = Path(args.model)
    if model_path.suffix == ".pfm":
        m = load_pfm(model_path)
        pred = predict_table(m, sub)
        rep = evaluate(m, sub)
        keep = [i for i, p in enumerate(pred) if p == p]
    else:
        u = load_ufm(model_path)
        if u.thermal is not None and not args.ignore_thermal:
            predictor = predict_unified_thermal_table
        else:
            predictor = predict_unified_table
        pred = predictor(u, sub)
        rep = evaluate_unified(u, sub, predictor=predictor)
        keep = list(range(len(sub)))
    kept = MeasurementTable(sub.counter_names, tuple(sub.samples[i] for i in keep))
    tag = args.tag or args.subset
    out = _out_dir(args.out_dir)
    report.trace(pred[keep], kept, keep).write(out / f"trace_{tag}.csv")
    report.error_table([(model_path.stem, rep)]).write(out / f"errors_{tag}.csv")
    (out / "summary.txt").write_text(
        report.summary_text(f"predictions of {model_path.name} ({tag})", [(model_path.stem, rep)]),
        encoding="utf-8")
    print(f"overall MAPE {report.sig4(rep.overall_pct)}% over {rep.n} samples")
    return EXIT_OK


# --- synth ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.spec:
        spec = load_spec(args.spec, seed=args.seed)
    else:
        spec = default_spec(**({"seed": args.seed} if args.seed is not None else {}))
    out_data = generate(spec)
    out = _out_dir(args.out_dir)
    write_measurements(out_data.table, out / "measurements.csv")
    write_split(out_data.split, out / "split.txt")
    write_dvfs(out_data.dvfs, out / "dvfs.csv")
    write_idle_csv(out_data.sweep.points, out / "idle_sweep.csv")
    for i, run in enumerate(out_data.runs):
        write_idle_csv(run.readings(), out / f"thermal_run_{i}.csv")
    print(f"{len(out_data.table)} samples, {len(out_data.runs)} thermal runs -> {out}")
    return EXIT_OK


# --- wiring --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="powerscope", description="Counter-based DVFS power models.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("search", help="search counters and fit per-frequency models")
    s.add_argument("-r", "--measurements", required=True)
    s.add_argument("-b", "--benchmarks", required=True, help="split file with [train]/[test]")
    s.add_argument("-f", "--freqs", help="DVFS table CSV (default: points in the measurements)")
    s.add_argument("-p", "--power-column", type=int, default=5)
    s.add_argument("-l", "--list", type=parse_columns, help="candidate counter columns, e.g. 7-14")
    s.add_argument("-m", "--mode", type=int, help="1 = bottom-up (default), 2 = exhaustive")
    s.add_argument("-n", "--max-counters", type=int)
    s.add_argument("-c", "--criterion", type=int, default=1)
    s.add_argument("-e", "--events", type=parse_columns, help="fixed counter columns (no search)")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_search)

    u = sub.add_parser("unify", help="derive a unified model from a per-frequency model")
    u.add_argument("--pfm", required=True)
    u.add_argument("--idle-sweep", required=True)
    u.add_argument("--anchor", default="mid", choices=["low", "mid", "high", "UAL", "UAM", "UAH"])
    u.add_argument("-f", "--freqs")
    u.add_argument("--static-exponent", type=float, default=2.0)
    u.add_argument("-o", "--out", default="model.ufm")
    u.set_defaults(func=cmd_unify)

    t = sub.add_parser("thermal", help="fit temperature-dependent static power into a .ufm")
    t.add_argument("--ufm", required=True)
    t.add_argument("--runs", nargs="+", required=True)
    t.add_argument("--t-ref", type=float, default=23.0)
    t.add_argument("-o", "--out", help="output .ufm (default: update --ufm in place)")
    t.set_defaults(func=cmd_thermal)

    r = sub.add_parser("predict", help="predict power and write traces")
    r.add_argument("--model", required=True, help=".pfm or .ufm file")
    r.add_argument("-r", "--measurements", required=True)
    r.add_argument("-p", "--power-column", type=int, default=5)
    r.add_argument("-l", "--list", type=parse_columns)
    r.add_argument("-b", "--benchmarks", help="split file")
    r.add_argument("-s", "--subset", default="test", choices=["train", "test", "all"])
    r.add_argument("--tag")
    r.add_argument("--ignore-thermal", action="store_true")
    r.add_argument("--out-dir", default=".")
    r.set_defaults(func=cmd_predict)

    g = sub.add_parser("synth", help="write synthetic fixture files")
    g.add_argument("--spec", help="TOML generator spec")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"powerscope: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"powerscope: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, KeyError, ValueError) as exc:
        print(f"powerscope: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
