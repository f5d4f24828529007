"""Command-line interface tying the pipeline together.

Subcommands: siti, ingest, stats, train, eval, simulate, energy, report.
Outputs are deterministic given identical inputs and seed: JSON is emitted
with sorted keys and 17-significant-digit floats, CSV with fixed column
orders. Existing output files are never overwritten without --force.

Exit codes: 0 success, 1 validation failure, 2 I/O or parse failure,
3 numerical non-convergence.
"""

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from . import dataset as ds
from . import energy as energy_mod
from . import predictor, report, simulator
from .errors import ConvergenceError, ParseError, ValidationError
from .serialize import dumps, format_float
from .stats import run_preset
from .video import (DEFAULT_THRESHOLDS, SiTiThresholds, classify_values,
                    compute_siti, parse_raw, parse_y4m)

DATA_ENV = "RESADAPT_DATA"


def _data_dir(args):
    path = args.data_dir or os.environ.get(DATA_ENV)
    if not path:
        raise ValidationError(
            f"no dataset directory: pass --data-dir or set ${DATA_ENV}")
    return Path(path)


def _check_overwrite(path, force):
    path = Path(path)
    if path.exists() and not force:
        raise ValidationError(f"refusing to overwrite {path} without --force")
    return path


def _emit(args, text):
    if getattr(args, "out", None):
        path = _check_overwrite(args.out, args.force)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_text(header, rows, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _fmt_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


# --------------------------------------------------------------------------
# siti


def _cmd_siti(args):
    if args.video == "-":
        data = sys.stdin.buffer.read()
    else:
        with open(args.video, "rb") as fh:
            data = fh.read()
    if args.raw:
        if not args.width or not args.height:
            raise ValidationError("--raw input needs --width and --height")
        seq = parse_raw(data, args.width, args.height,
                        colorspace=args.pix_format, frame_rate=args.fps)
    else:
        seq = parse_y4m(data)

    profile = compute_siti(seq, threads=args.threads)
    thresholds = _thresholds(args)
    si, ti = profile.aggregate(args.agg)
    category = classify_values(si, ti, thresholds).label if ti is not None else None

    frames = []
    for i, si_val in enumerate(profile.si_series):
        ti_val = profile.ti_series[i - 1] if i >= 1 and profile.ti_series else None
        frames.append({"frame_index": i, "si": si_val, "ti": ti_val})
    aggregate = {
        "si_max": profile.si_max,
        "si_mean": profile.si_mean,
        "ti_max": profile.ti_max,
        "ti_mean": profile.ti_mean,
        "aggregation": args.agg,
        "category": category,
    }

    if args.format == "json":
        _emit(args, dumps({"frames": frames, "aggregate": aggregate}))
    else:
        comments = [
            "aggregate " + " ".join(f"{k}={_fmt_cell(v)}" for k, v in sorted(aggregate.items()))
        ]
        rows = [[f["frame_index"], _fmt_cell(f["si"]), _fmt_cell(f["ti"])] for f in frames]
        _emit(args, _csv_text(["frame_index", "si", "ti"], rows, comments))
    return 0


def _thresholds(args):
    if not args.thresholds:
        return DEFAULT_THRESHOLDS
    try:
        parts = [float(v) for v in args.thresholds.split(",")]
        si_low, si_high, ti_low, ti_high = parts
    except ValueError:
        raise ValidationError(
            "--thresholds wants four comma-separated numbers: "
            "si_low,si_high,ti_low,ti_high") from None
    return SiTiThresholds(si_low, si_high, ti_low, ti_high)


# --------------------------------------------------------------------------
# ingest / stats


def _cmd_ingest(args):
    data_dir = Path(args.data_dir) if args.data_dir else None
    if args.adapt:
        if data_dir is None:
            raise ValidationError("--adapt needs --data-dir as the destination")
        ds.adapt_to_canonical(args.adapt, data_dir, args.mapping)
    dataset = ds.ingest(data_dir if data_dir else _data_dir(args))

    if args.export_dir:
        export_dir = Path(args.export_dir)
        for name in ("participants.csv", "videos.csv", "sessions.csv", "events.csv"):
            _check_overwrite(export_dir / name, args.force)
        ds.export(dataset, export_dir)

    by_study = {}
    for study in dataset.studies():
        sessions = dataset.sessions_for(study)
        by_activity = {}
        for s in sessions:
            by_activity[s.activity] = by_activity.get(s.activity, 0) + 1
        by_study[str(study)] = {
            "participants": sum(1 for p in dataset.participants.values() if p.study == study),
            "videos": sum(1 for v in dataset.videos.values() if v.study == study),
            "sessions": len(sessions),
            "events": sum(len(s.events) for s in sessions),
            "by_activity": by_activity,
        }
    _emit(args, dumps({"by_study": by_study,
                       "participants": len(dataset.participants),
                       "videos": len(dataset.videos),
                       "sessions": len(dataset.sessions)}))
    return 0


def _cmd_stats(args):
    if args.preset == "eta-checkpoints":
        result = run_preset(args.preset)
    else:
        result = run_preset(args.preset, ds.ingest(_data_dir(args)))
    _emit(args, dumps(result))
    return 0


# --------------------------------------------------------------------------
# train / eval


def _study_rows(args):
    dataset = ds.ingest(_data_dir(args))
    rows = dataset.analysis_rows(study=args.study)
    if not rows:
        raise ValidationError(f"dataset has no study-{args.study} sessions")
    return rows


def _forest_params(args):
    return {
        "n_trees": args.n_trees,
        "max_depth": args.max_depth if args.max_depth > 0 else None,
        "min_leaf": args.min_leaf,
        "feature_subset": args.feature_subset,
        "bootstrap": not args.no_bootstrap,
    }


def _cmd_train(args):
    rows = _study_rows(args)
    include_ti = not args.no_ti
    if args.model == "mean":
        maps = [r.features() for r in rows]
        model = predictor.mean_regressor([m["final_resolution"] for m in maps])
    else:
        X, y, names, _ = predictor.encode_features(rows, include_ti=include_ti)
        model = predictor.train_forest(X, y, seed=args.seed, feature_names=names,
                                       threads=args.threads, **_forest_params(args))
    path = _check_overwrite(args.out, args.force)
    predictor.save_model(model, path)
    sys.stderr.write(f"wrote {path}\n")
    return 0


def _cmd_eval(args):
    rows = _study_rows(args)
    include_ti = not args.no_ti
    if args.per_personality:
        result = predictor.per_personality_eval(rows, seed=args.seed,
                                                include_ti=include_ti,
                                                **_forest_params(args))
        if args.format == "json":
            _emit(args, dumps(result))
        else:
            header = ["trait", "model", "viewer", "n_rows", "accuracy", "mae", "rmse"]
            out = []
            for trait, entry in sorted(result["included"].items()):
                for model_name in ("forest", "mean"):
                    for fold in entry[model_name]["folds"]:
                        out.append([trait, model_name, fold["viewer"], fold["n_rows"],
                                    _fmt_cell(fold["accuracy"]), _fmt_cell(fold["mae"]),
                                    _fmt_cell(fold["rmse"])])
            comments = [f"excluded {t}: {reason}"
                        for t, reason in sorted(result["excluded"].items())]
            _emit(args, _csv_text(header, out, comments))
        return 0

    if args.model == "mean":
        builder = predictor.make_mean_builder()
    else:
        builder = predictor.make_forest_builder(args.seed, include_ti=include_ti,
                                                **_forest_params(args))
    result = predictor.loocv_by_viewer(rows, builder)
    if args.format == "json":
        _emit(args, dumps({"model": args.model, "study": args.study,
                           "seed": args.seed, **result.to_dict()}))
    else:
        header = ["fold", "viewer", "n_rows", "accuracy", "mae", "rmse"]
        out = [[i, f.viewer, f.n_rows, _fmt_cell(f.accuracy), _fmt_cell(f.mae),
                _fmt_cell(f.rmse)]
               for i, f in enumerate(result.folds)]
        comments = [
            f"model={args.model} study={args.study} seed={args.seed}",
            f"accuracy_mean={_fmt_cell(result.accuracy_mean)} "
            f"accuracy_std={_fmt_cell(result.accuracy_std)}",
            f"mae_mean={_fmt_cell(result.mae_mean)} mae_std={_fmt_cell(result.mae_std)}",
            f"rmse_mean={_fmt_cell(result.rmse_mean)} rmse_std={_fmt_cell(result.rmse_std)}",
        ]
        _emit(args, _csv_text(header, out, comments))
    return 0


# --------------------------------------------------------------------------
# simulate / energy / report


def _cmd_simulate(args):
    if args.script:
        if not args.model:
            raise ValidationError("script simulation needs --model")
        script = simulator.load_script(args.script)
        model = predictor.load_model(args.model)
        trace, decisions = simulator.run_session(script, model,
                                                 min_dwell_s=args.min_dwell)
        if args.decision_log:
            path = _check_overwrite(args.decision_log, args.force)
            rows = [[_fmt_cell(d.t_s), d.activity, _fmt_cell(d.raw_prediction), d.chosen]
                    for d in decisions]
            path.write_text(
                _csv_text(["t_s", "activity", "raw_prediction", "chosen"], rows),
                encoding="utf-8")
        _emit(args, dumps({
            "trace": trace.to_dict(),
            "decisions": [{"t_s": d.t_s, "activity": d.activity,
                           "raw_prediction": d.raw_prediction,
                           "chosen": d.chosen, "applied": d.applied}
                          for d in decisions],
            "min_dwell_s": args.min_dwell,
        }))
        return 0

    if not args.policy:
        raise ValidationError("pass --script for a scripted session or --policy "
                              "to replay the dataset")
    if not args.calibration:
        raise ValidationError("replay needs --calibration")
    calibration = energy_mod.load_calibration(args.calibration)
    dataset = ds.ingest(_data_dir(args))
    model = predictor.load_model(args.model) if args.model else None
    result = simulator.replay_study(
        dataset, args.policy, calibration, args.baseline, study=args.study,
        model=model, duration_s=args.duration, exact_events=args.exact_events)
    _emit(args, dumps(result))
    return 0


def _cmd_energy(args):
    calibration = energy_mod.load_calibration(args.calibration)
    traces = {}
    for spec in args.trace:
        if "=" not in spec:
            raise ValidationError(f"--trace wants NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        import json

        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        traces[name] = energy_mod.PlaybackTrace.from_dict(
            doc["trace"] if "trace" in doc else doc)
    result = energy_mod.compare_policies(traces, args.baseline, calibration)
    out = result.to_dict()
    out["monotone_calibration"] = calibration.monotone
    _emit(args, dumps(out))
    return 0


def _cmd_report(args):
    dataset = ds.ingest(_data_dir(args))
    out_dir = Path(args.out_dir)
    stem = out_dir / args.family
    for suffix in (".csv",) + (() if args.no_figure else (".png",)):
        _check_overwrite(stem.with_suffix(suffix), args.force)
    paths = report.generate(dataset, args.family, out_dir, study=args.study,
                            figure=not args.no_figure)
    for path in paths:
        sys.stderr.write(f"wrote {path}\n")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="resadapt",
        description="Video complexity indices, study statistics, resolution "
                    "predictors, and playback energy simulation.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads for parallel sections")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output(p, fmt=True):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--force", action="store_true",
                       help="allow overwriting existing outputs")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("siti", help="compute SI/TI for a Y4M or raw planar stream")
    p.add_argument("video", help="input path or - for stdin")
    p.add_argument("--agg", choices=("mean", "max"), default="mean")
    p.add_argument("--thresholds",
                   help="si_low,si_high,ti_low,ti_high (default 40,110,10,25)")
    p.add_argument("--raw", action="store_true", help="headerless planar input")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--pix-format", choices=("420", "422", "444"), default="420")
    p.add_argument("--fps", type=float, default=25.0)
    add_output(p)
    p.set_defaults(func=_cmd_siti)

    p = sub.add_parser("ingest", help="validate a canonical dataset directory")
    p.add_argument("--data-dir", help=f"dataset directory (default ${DATA_ENV})")
    p.add_argument("--adapt", help="upstream export to convert into --data-dir first")
    p.add_argument("--mapping", help="JSON column mapping for --adapt")
    p.add_argument("--export-dir", help="re-export the validated canonical CSVs")
    add_output(p, fmt=False)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="run a named replication preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--data-dir")
    add_output(p, fmt=False)
    p.set_defaults(func=_cmd_stats)

    def add_model_params(p):
        p.add_argument("--n-trees", type=int, default=100)
        p.add_argument("--max-depth", type=int, default=0,
                       help="0 means unbounded")
        p.add_argument("--min-leaf", type=int, default=2)
        p.add_argument("--feature-subset", default="sqrt",
                       help="sqrt, all, or an integer")
        p.add_argument("--no-bootstrap", action="store_true")
        p.add_argument("--no-ti", action="store_true",
                       help="drop TI from the feature set")

    p = sub.add_parser("train", help="train a resolution predictor")
    p.add_argument("--model", choices=("forest", "mean"), required=True)
    p.add_argument("--study", type=int, choices=(1, 2), default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--data-dir")
    add_model_params(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="leave-one-viewer-out evaluation")
    p.add_argument("--model", choices=("forest", "mean"), required=True)
    p.add_argument("--study", type=int, choices=(1, 2), default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--loocv", action="store_true",
                   help="leave-one-viewer-out (the only protocol; accepted "
                        "for explicitness)")
    p.add_argument("--per-personality", action="store_true")
    p.add_argument("--data-dir")
    add_model_params(p)
    add_output(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("simulate",
                       help="run a scripted session or replay the study")
    p.add_argument("--script", help="session script JSON")
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--min-dwell", type=float, default=simulator.DEFAULT_MIN_DWELL_S)
    p.add_argument("--decision-log", help="write the decision log CSV here")
    p.add_argument("--policy", help="observed, model, or fixed:<lines>")
    p.add_argument("--calibration")
    p.add_argument("--baseline", type=int, default=1080,
                   help="fixed-resolution baseline for replay")
    p.add_argument("--study", type=int, choices=(1, 2), default=2)
    p.add_argument("--duration", type=float,
                   default=simulator.DEFAULT_SESSION_DURATION_S)
    p.add_argument("--exact-events", action="store_true",
                   help="replay observed sessions event by event")
    p.add_argument("--data-dir")
    add_output(p, fmt=False)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("energy", help="compare named playback traces")
    p.add_argument("--calibration", required=True)
    p.add_argument("--trace", action="append", required=True,
                   metavar="NAME=PATH")
    p.add_argument("--baseline", required=True)
    add_output(p, fmt=False)
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("report", help="emit plot-ready CSV plus a rendered figure")
    p.add_argument("--family", choices=report.FAMILIES, required=True)
    p.add_argument("--study", type=int, choices=(1, 2))
    p.add_argument("--data-dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figure", action="store_true",
                   help="write only the CSV")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as e:
        sys.stderr.write(f"error: {e}\n")
        return 3
    except (ParseError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except ValidationError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
