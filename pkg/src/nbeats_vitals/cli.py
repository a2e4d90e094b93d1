"""``nbeats-vitals`` command line: synth, train, forecast, evaluate, analyze, plot.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, data_io, metrics, plot, preprocess, serialization, training
from .nbeats import Configuration, UnsupportedConfigurationError, build_model, model_forward

log = logging.getLogger("nbeats_vitals")

SPLITS = ("all", "train", "valid", "test")
MODEL_NAMES = {
    Configuration.GENERIC: "N-BEATS - Generic",
    Configuration.INTERPRETABLE: "N-BEATS - Interpretable",
}


class UsageError(Exception):
    pass


def _settings(args) -> data_io.Settings:
    s = data_io.load_config(args.config) if args.config else data_io.Settings()
    if args.seed is not None:
        s = s.with_seed(args.seed)
    return s


def _require(args, *names):
    for name in names:
        value = getattr(args, name)
        if value is None:
            raise UsageError(f"--{name} is required for {args.command}")
        for p in value if isinstance(value, list) else [value]:
            if name != "out" and not Path(p).exists():
                raise UsageError(f"--{name} path does not exist: {p}")


def _bundle(args, settings, split):
    bundle = data_io.load_bundle(args.data, getattr(args, "events", None), getattr(args, "outcomes", None))
    if split == "all":
        return bundle
    parts = data_io.split_by_patient(bundle, settings.split_fractions, settings.split_seed)
    return parts[SPLITS.index(split) - 1]


def _windows(bundle, settings):
    windows, report = preprocess.run_pipeline(bundle.series, settings.pipeline)
    log.info("pipeline: %s", report.to_dict())
    return windows, report


def _check_shape(model, windows, what):
    for w in windows[:1]:
        if len(w.lookback) != model.lookback or len(w.horizon) != model.horizon:
            raise ValueError(
                f"{what}: model expects lookback/horizon {model.lookback}/{model.horizon}, "
                f"data has {len(w.lookback)}/{len(w.horizon)}"
            )


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(args):
    _require(args, "out")
    settings = _settings(args)
    bundle = data_io.generate_synthetic(settings.synth)
    bundle.write(args.out)
    print(f"wrote {len(bundle.patient_ids())} patients to {args.out}")


def cmd_train(args):
    _require(args, "data", "out")
    settings = _settings(args)
    if args.architecture:
        settings = replace(settings, model=replace(settings.model, configuration=args.architecture))
    train_b = _bundle(args, settings, "train")
    valid_b = _bundle(args, settings, "valid")
    train_w, train_rep = _windows(train_b, settings)
    valid_w, valid_rep = _windows(valid_b, settings)
    model = build_model(settings.model, seed=settings.train.seed)
    result = training.train(model, train_w, valid_w, settings.train)
    out = Path(args.out)
    serialization.save_model(model, out)
    _write_json(out.with_name(out.name + ".history.json"), {
        "model": settings.model.to_dict(),
        "train": settings.train.to_dict(),
        "best_epoch": result.best_epoch,
        "best_valid_loss": result.best_valid_loss,
        "history": result.history,
        "pipeline": {"train": train_rep.to_dict(), "valid": valid_rep.to_dict()},
    })
    print(f"trained {settings.model.configuration.value} model: best epoch {result.best_epoch}, "
          f"valid MSE {result.best_valid_loss:.6g}; wrote {out}")


def cmd_forecast(args):
    _require(args, "model", "data", "out")
    settings = _settings(args)
    model = serialization.load_model(args.model[0])
    windows, _ = _windows(_bundle(args, settings, args.split), settings)
    _check_shape(model, windows, "forecast")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        names = [s.name for s in model.stacks]
        w.writerow(["patient_id", "cutoff_min", "step", "total", *names])
        for win in windows:
            dec = model_forward(model, win.lookback)
            for k in range(model.horizon):
                w.writerow([win.patient_id, data_io._fmt(win.cutoff_min), k, repr(float(dec.total[k])),
                            *(repr(float(dec.partials[n][k])) for n in names)])
    print(f"wrote forecasts for {len(windows)} windows to {args.out}")


def cmd_evaluate(args):
    _require(args, "model", "data", "out")
    settings = _settings(args)
    windows, _ = _windows(_bundle(args, settings, args.split), settings)
    models = {}
    for path in args.model:
        m = serialization.load_model(path)
        _check_shape(m, windows, f"evaluate {path}")
        name = MODEL_NAMES[m.configuration]
        if name in models:
            name = f"{name} ({Path(path).stem})"
        models[name] = m.forecast
    report = metrics.evaluate(models, windows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_table(), end="")


def cmd_analyze(args):
    _require(args, "model", "data", "out")
    for name in ("events", "outcomes"):
        if getattr(args, name):
            _require(args, name)
    settings = _settings(args)
    model = serialization.load_model(args.model[0])
    if model.configuration is not Configuration.INTERPRETABLE:
        raise UnsupportedConfigurationError("analyze needs an interpretable model")
    bundle = _bundle(args, settings, args.split)
    windows, _ = _windows(bundle, settings)
    _check_shape(model, windows, "analyze")
    records = analysis.rank_mismatch(analysis.build_records(model, windows, bundle.events), settings.quantile)
    flagged_drug, unflagged_drug = analysis.drug_fraction(records)
    summary = {
        "n_records": len(records),
        "n_flagged": sum(r.flagged for r in records),
        "quantile": settings.quantile,
        "drug_fraction_flagged": flagged_drug,
        "drug_fraction_unflagged": unflagged_drug,
    }
    if bundle.outcomes:
        summary["mortality"] = analysis.mortality_split(records, bundle.outcomes).to_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "analysis.json", {"summary": summary, "records": analysis.records_to_dicts(records)})
    lines = [
        f"records: {summary['n_records']}, flagged (top {settings.quantile:.0%} trend DTW): {summary['n_flagged']}",
        f"windows with drug events after cut-off: flagged {flagged_drug:.3f}, unflagged {unflagged_drug:.3f}",
    ]
    if "mortality" in summary:
        m = summary["mortality"]
        lines.append(f"mortality matched trends: {m['matched_rate']:.3f} "
                     f"({m['matched_deaths']}/{m['matched_patients']} patients)")
        lines.append(f"mortality mismatched trends: {m['mismatched_rate']:.3f} "
                     f"({m['mismatched_deaths']}/{m['mismatched_patients']} patients)")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))


def _select(records, which):
    if which is None:
        return [max(records, key=lambda r: r["trend_dtw"])] if records else []
    if which == "flagged":
        return [r for r in records if r["flagged"]]
    try:
        idx = int(which)
    except ValueError:
        raise UsageError(f"--record must be an index or 'flagged', got {which!r}") from None
    match = [r for r in records if r["record"] == idx]
    if not match:
        raise KeyError(f"unknown record id {idx}")
    return match


def cmd_plot(args):
    _require(args, "analysis", "out")
    records = json.loads(Path(args.analysis).read_text(encoding="utf-8"))["records"]
    chosen = _select(records, args.record)
    out = Path(args.out)
    if len(chosen) == 1 and out.suffix == ".svg":
        targets = [(chosen[0], out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        targets = [(r, out / f"record_{r['record']:05d}.svg") for r in chosen]
    for rec, path in targets:
        path.write_text(plot.trend_figure(rec), encoding="utf-8")
    print(f"wrote {len(targets)} figure(s)")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbeats-vitals", description="Forecast ICU mean blood pressure with N-BEATS and analyze trend mismatch.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, help="overrides every seed in the config")
        p.add_argument("--out", help="output file or directory")
        if name in ("train", "forecast", "evaluate", "analyze"):
            p.add_argument("--data", help="directory with series.csv and diagnoses.csv")
        if name == "train":
            p.add_argument("--architecture", choices=[c.value for c in Configuration],
                           help="overrides model.configuration from the config")
        if name in ("forecast", "evaluate", "analyze"):
            p.add_argument("--model", action="append", help="model file (repeat for evaluate)")
            p.add_argument("--split", choices=SPLITS, default="all" if name == "forecast" else "test",
                           help="patient split to use (seeded, from the config fractions)")
        if name == "analyze":
            p.add_argument("--events", help="drug events CSV")
            p.add_argument("--outcomes", help="outcomes CSV")
        if name == "plot":
            p.add_argument("--analysis", help="analysis.json written by analyze")
            p.add_argument("--record", help="record index or 'flagged' (default: largest trend DTW)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
