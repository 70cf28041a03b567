"""Command-line surface: calibrate rules from CSV, apply them, run studies.

Exit codes: 0 success (calibration feasible), 2 calibration ran but the
targets are unattainable on the data, 1 usage or schema errors.  Every
experiment output directory receives a manifest with input hashes so runs
can be audited and reproduced.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, gmm
from .calibration import (
    CalibrationSample,
    MaxScoreRule,
    MlrNpRule,
    MlrSymmetricRule,
    NpRule,
    SelectiveBinaryRule,
    calibrate_accuracy,
    calibrate_accuracy_fixed_gamma,
    calibrate_accuracy_mlr,
    calibrate_multiclass_fixed_gamma,
    calibrate_np,
    calibrate_np_mlr,
)
from .experiments import (
    SimConfig,
    run_accuracy_sweep,
    run_consistency_trend,
    run_intro_tradeoff,
    run_np_sweep,
    sim_result_to_csv,
    sim_result_to_svg,
)
from .kvdoc import read_kv, write_kv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.handler(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indecide",
        description="Calibrated classification with an abstention option.",
    )
    parser.set_defaults(command=None)
    sub = parser.add_subparsers(dest="command")

    cal = sub.add_parser("calibrate", help="fit an abstention rule from a labeled CSV")
    cal.add_argument("--mode", required=True, choices=["accuracy", "np", "multiclass", "mlr-np", "mlr-accuracy"])
    cal.add_argument("--input", required=True, help="CSV with header: score,label | s_1..s_K,label | x,label")
    cal.add_argument("--alpha", type=float, help="target conditional error (accuracy modes)")
    cal.add_argument("--alpha1", type=float, help="target type I error (np modes)")
    cal.add_argument("--alpha2", type=float, help="target type II error (np modes)")
    cal.add_argument("--gamma", type=float, help="fixed abstention mass (fixed-gamma modes)")
    cal.add_argument("--out-dir", required=True)
    cal.add_argument("--trace", action="store_true", help="also write the per-candidate trace CSV")
    cal.set_defaults(handler=cmd_calibrate)

    app = sub.add_parser("apply", help="apply a saved rule to a scores CSV")
    app.add_argument("--rule", required=True, help="rule key-value file from calibrate")
    app.add_argument("--input", required=True)
    app.add_argument("--output", required=True, help="decisions CSV path")
    app.set_defaults(handler=cmd_apply)

    exp = sub.add_parser("experiment", help="run a seeded simulation study")
    exp.add_argument("name", choices=["phase", "accuracy-sweep", "np-sweep", "intro-tradeoff", "consistency-trend"])
    exp.add_argument("--config", help="key-value file overriding study parameters")
    exp.add_argument("--out-dir", required=True)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--full", action="store_true", help="full-scale grids and replication counts")
    exp.add_argument("--workers", type=int, default=None)
    exp.set_defaults(handler=cmd_experiment)

    orc = sub.add_parser("oracle", help="closed-form mixture oracle queries")
    orc.add_argument("--delta", type=float, required=True, help="half-separation of the mixture centers")
    group = orc.add_mutually_exclusive_group(required=True)
    group.add_argument("--gamma", type=float, help="abstention mass to invert")
    group.add_argument("--t", type=float, help="decision threshold to evaluate")
    group.add_argument("--target-risk", type=float, help="conditional risk to reach")
    orc.set_defaults(handler=cmd_oracle)
    return parser


# ---------------------------------------------------------------------------
# CSV ingestion


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file, header row required") from None
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    return header, rows


def _parse_float(value: str, path: str, lineno: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(f"{path}: line {lineno}: column {column!r} is not a number: {value!r}") from None


def _load_sample(path: str, mode: str) -> CalibrationSample:
    header, rows = _read_table(path)
    if mode in ("accuracy", "np"):
        if header[:2] != ["score", "label"]:
            raise SchemaError(f"{path}: expected header score,label, got {header!r}")
        scores, labels = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) < 2:
                raise SchemaError(f"{path}: line {lineno}: expected 2 columns")
            scores.append(_parse_float(row[0], path, lineno, "score"))
            labels.append(int(_parse_float(row[1], path, lineno, "label")))
        return CalibrationSample(scores=np.array(scores), labels=np.array(labels))
    if mode == "multiclass":
        score_cols = [h for h in header if h.startswith("s_")]
        if not score_cols or header != score_cols + ["label"]:
            raise SchemaError(f"{path}: expected header s_1,...,s_K,label, got {header!r}")
        vecs, labels = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {lineno}: expected {len(header)} columns")
            vecs.append([_parse_float(v, path, lineno, c) for v, c in zip(row, score_cols)])
            labels.append(int(_parse_float(row[-1], path, lineno, "label")))
        return CalibrationSample(score_vectors=np.array(vecs), labels=np.array(labels))
    # MLR modes: raw observations
    if header[:2] != ["x", "label"]:
        raise SchemaError(f"{path}: expected header x,label, got {header!r}")
    xs, labels = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) < 2:
            raise SchemaError(f"{path}: line {lineno}: expected 2 columns")
        xs.append(_parse_float(row[0], path, lineno, "x"))
        labels.append(int(_parse_float(row[1], path, lineno, "label")))
    return CalibrationSample(xs=np.array(xs), labels=np.array(labels))


def _require(args, names: list[str], mode: str) -> None:
    for name in names:
        value = getattr(args, name)
        if value is None:
            raise SchemaError(f"mode {mode} requires --{name}")
        if not 0.0 < value < 1.0 and name != "gamma":
            raise SchemaError(f"--{name} must lie in (0, 1)")
        if name == "gamma" and not 0.0 <= value < 1.0:
            raise SchemaError("--gamma must lie in [0, 1)")


# ---------------------------------------------------------------------------
# rule serialization


def _rule_to_kv(rule) -> dict:
    if isinstance(rule, SelectiveBinaryRule):
        return {"rule_type": "selective-binary", "tau": rule.tau}
    if isinstance(rule, NpRule):
        return {"rule_type": "np", "tau1": rule.tau1, "tau2": rule.tau2}
    if isinstance(rule, MlrNpRule):
        return {"rule_type": "mlr-np", "tau1": rule.tau1, "tau2": rule.tau2}
    if isinstance(rule, MlrSymmetricRule):
        return {"rule_type": "mlr-symmetric", "tau": rule.tau}
    if isinstance(rule, MaxScoreRule):
        return {"rule_type": "max-score", "tau": rule.tau}
    raise TypeError(f"unsupported rule {type(rule).__name__}")


def _rule_from_kv(entries: dict):
    kind = entries.get("rule_type")
    if kind == "selective-binary":
        return SelectiveBinaryRule(tau=float(entries["tau"]))
    if kind == "np":
        return NpRule(tau1=float(entries["tau1"]), tau2=float(entries["tau2"]))
    if kind == "mlr-np":
        return MlrNpRule(tau2=float(entries["tau2"]), tau1=float(entries["tau1"]))
    if kind == "mlr-symmetric":
        return MlrSymmetricRule(tau=float(entries["tau"]))
    if kind == "max-score":
        return MaxScoreRule(tau=float(entries["tau"]))
    raise SchemaError(f"unknown rule_type {kind!r}")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, inputs: list[str], outputs: list[str], extra: dict) -> None:
    entries = {
        "subcommand": subcommand,
        "toolkit_version": __version__,
        "inputs": ";".join(inputs),
        "outputs": ";".join(sorted(outputs)),
    }
    for path in inputs:
        entries[f"sha256_{Path(path).name}"] = _sha256(path)
    entries.update(extra)
    write_kv(entries, out_dir / "manifest.kv")


# ---------------------------------------------------------------------------
# subcommands


def cmd_calibrate(args) -> int:
    mode = args.mode
    sample = _load_sample(args.input, mode)
    want_trace = bool(args.trace)
    if mode == "accuracy":
        if args.gamma is not None:
            _require(args, ["gamma"], mode)
            report = calibrate_accuracy_fixed_gamma(sample, args.gamma)
        else:
            _require(args, ["alpha"], mode)
            report = calibrate_accuracy(sample, args.alpha, want_trace=want_trace)
    elif mode == "np":
        _require(args, ["alpha1", "alpha2"], mode)
        report = calibrate_np(sample, args.alpha1, args.alpha2, want_trace=want_trace)
    elif mode == "multiclass":
        _require(args, ["gamma"], mode)
        report = calibrate_multiclass_fixed_gamma(sample, args.gamma)
    elif mode == "mlr-np":
        _require(args, ["alpha1", "alpha2"], mode)
        report = calibrate_np_mlr(sample, args.alpha1, args.alpha2, want_trace=want_trace)
    else:
        _require(args, ["alpha"], mode)
        report = calibrate_accuracy_mlr(sample, args.alpha, want_trace=want_trace)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rule_entries = _rule_to_kv(report.rule)
    write_kv(rule_entries, out_dir / "rule.kv")
    report_entries = dict(rule_entries)
    report_entries["gamma_hat"] = report.gamma_hat
    report_entries["feasible"] = report.feasible
    for key, value in report.achieved.items():
        report_entries[f"achieved_{key}"] = value
    write_kv(report_entries, out_dir / "report.kv")
    outputs = ["rule.kv", "report.kv"]
    if want_trace and report.trace:
        trace_path = out_dir / "trace.csv"
        cols = list(report.trace[0].keys())
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in report.trace:
                writer.writerow([
                    format(v, ".17g") if isinstance(v, float) else v for v in (row[c] for c in cols)
                ])
        outputs.append("trace.csv")
    _write_manifest(out_dir, f"calibrate-{mode}", [args.input], outputs + ["manifest.kv"], {})
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_apply(args) -> int:
    rule = _rule_from_kv(read_kv(args.rule))
    header, rows = _read_table(args.input)
    if isinstance(rule, (SelectiveBinaryRule, NpRule)):
        expected, column = "score", 0
    elif isinstance(rule, (MlrNpRule, MlrSymmetricRule)):
        expected, column = "x", 0
    else:
        expected, column = "s_1", None
    if not header or header[0] != expected:
        raise SchemaError(f"{args.input}: header {header!r} does not match rule input {expected!r}")
    if column is None:
        score_cols = [h for h in header if h.startswith("s_")]
        values = np.array(
            [
                [_parse_float(row[i], args.input, lineno, header[i]) for i in range(len(score_cols))]
                for lineno, row in enumerate(rows, start=2)
            ]
        )
    else:
        values = np.array(
            [_parse_float(row[column], args.input, lineno, expected) for lineno, row in enumerate(rows, start=2)]
        )
    decisions = rule.apply(values) if len(values) else np.array([], dtype=int)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["decision"])
        for d in decisions:
            writer.writerow(["abstain" if d == 0 else str(int(d))])
        abstained = float((decisions == 0).mean()) if len(decisions) else 0.0
        fh.write(f"# abstention_fraction = {abstained:.17g}; rows = {len(decisions)}\n")
    return EXIT_OK


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("INDECIDE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SchemaError(f"INDECIDE_WORKERS must be an integer, got {env!r}") from None
    return 1


def _sim_config(args, overrides: dict) -> SimConfig:
    base = {
        "n_train": 1000,
        "n_cal": 1000,
        "n_test": 1000,
        "reps": 1000 if args.full else 200,
        "delta_grid": (0.5, 1.0, 1.5, 2.0),
        "alpha": 0.1,
        "alpha1": 0.1,
        "alpha2": 0.1,
        "scorer": "lda",
        "seed": args.seed,
    }
    for key, value in overrides.items():
        if key == "delta_grid":
            base[key] = tuple(float(v) for v in str(value).split(";"))
        elif key in ("n_train", "n_cal", "n_test", "reps", "seed"):
            base[key] = int(value)
        elif key in ("alpha", "alpha1", "alpha2"):
            base[key] = float(value)
        elif key == "scorer":
            base[key] = str(value)
        elif key != "format_version":
            raise SchemaError(f"unknown config key {key!r}")
    return SimConfig(**base)


def _phase_configs(args, overrides: dict) -> list[tuple[str, gmm.PhaseGridConfig]]:
    points = int(overrides.get("grid_points", 1000 if args.full else 200))
    m_grid = tuple(np.linspace(0.005, 0.995, points))
    configs = []
    for name, delta_target, c_lo, c_hi in (
        ("lower", 1e-7, 0.05, 0.45),
        ("upper", 1e-15, 0.55, 0.95),
    ):
        c_grid = tuple(np.linspace(c_lo, c_hi, points))
        configs.append(
            (name, gmm.PhaseGridConfig(delta_target=delta_target, c_grid=c_grid, m_grid=m_grid))
        )
    return configs


def cmd_experiment(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    overrides = read_kv(args.config) if args.config else {}
    workers = _resolve_workers(args)
    inputs = [args.config] if args.config else []
    outputs: list[str] = []
    extra = {"seed": args.seed, "full": bool(args.full), "workers_requested": workers}

    if args.name == "phase":
        for panel, cfg in _phase_configs(args, overrides):
            cells = gmm.phase_grid(cfg)
            csv_path = out_dir / f"phase_{panel}.csv"
            svg_path = out_dir / f"phase_{panel}.svg"
            gmm.phase_grid_to_csv(cells, csv_path)
            gmm.phase_grid_to_svg(cells, cfg, svg_path)
            outputs += [csv_path.name, svg_path.name]
        _write_manifest(out_dir, "experiment-phase", inputs, outputs + ["manifest.kv"], extra)
        return EXIT_OK

    if args.name == "consistency-trend":
        result = run_consistency_trend(
            reps=int(overrides.get("reps", 100)), seed=args.seed, workers=workers
        )
        chart_metric = "risk_gap"
    elif args.name == "accuracy-sweep":
        result = run_accuracy_sweep(_sim_config(args, overrides), workers=workers)
        chart_metric = "conditional_error"
    elif args.name == "np-sweep":
        result = run_np_sweep(_sim_config(args, overrides), workers=workers)
        chart_metric = "type2"
    else:
        result = run_intro_tradeoff(_sim_config(args, overrides), workers=workers)
        chart_metric = "gamma_star"

    rows_path = out_dir / f"{args.name}_rows.csv"
    agg_path = out_dir / f"{args.name}_aggregates.csv"
    svg_path = out_dir / f"{args.name}.svg"
    sim_result_to_csv(result, rows_path, agg_path)
    sim_result_to_svg(result, chart_metric, svg_path, title=args.name)
    outputs += [rows_path.name, agg_path.name, svg_path.name]
    _write_manifest(out_dir, f"experiment-{args.name}", inputs, outputs + ["manifest.kv"], extra)
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = gmm.GmmSpec(args.delta)
    if args.t is not None:
        point = gmm.operating_point_at_t(spec, args.t)
    elif args.gamma is not None:
        point = gmm.threshold_for_gamma(spec, args.gamma)
    else:
        try:
            point = gmm.gamma_for_target_risk(spec, args.target_risk)
        except gmm.InfeasibleTargetError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
    for key, value in (
        ("delta", args.delta),
        ("t", point.t),
        ("gamma", point.gamma),
        ("gamma_complement", point.gamma_complement),
        ("risk", point.risk),
    ):
        print(f"{key} = {value:.17g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
