"""Command-line entry point: ``feverscreen <subcommand> ...``.

Exit codes: 0 success, 1 internal invariant failure, 2 user/input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import detector, hdlgen, nn, report
from .errors import (CompatibilityError, ConfigError, FeverScreenError, InvariantError,
                     ParseError)
from .sensor import SensorModel

DEFAULT_SEED = 42


# --- argument handling ---------------------------------------------------

def _common(parser, top=False):
    default = DEFAULT_SEED if top else argparse.SUPPRESS
    parser.add_argument("--seed", type=int, default=default, help="global PRNG seed")
    parser.add_argument("--config", default=None if top else argparse.SUPPRESS,
                        help="JSON file overriding default option values")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="feverscreen",
                                description="Thermal fever-screening pipeline.")
    _common(p, top=True)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a labelled cohort to CSV")
    _common(g)
    g.add_argument("--out", default="cohort.csv")
    g.add_argument("--n-positive", type=int, default=693)
    g.add_argument("--n-negative", type=int, default=693)
    g.add_argument("--positive-mean", type=float, default=38.8)
    g.add_argument("--positive-std", type=float, default=0.5)
    g.add_argument("--negative-mean", type=float, default=36.8)
    g.add_argument("--negative-std", type=float, default=0.4)
    g.add_argument("--fever-threshold", type=float, default=38.0)
    g.add_argument("--negative-ceiling", type=float, default=37.5)
    g.add_argument("--distance-min", type=float, default=0.0)
    g.add_argument("--distance-max", type=float, default=0.1)
    g.add_argument("--noise-std", type=float, default=0.05)
    g.add_argument("--n-steps", type=int, default=200)
    g.add_argument("--dt", type=float, default=0.1)
    g.add_argument("--input-delays", type=int, default=9)
    g.add_argument("--output-delays", type=int, default=2)
    g.add_argument("--t-c", type=float, default=2.0, help="thermal time constant (s)")
    g.add_argument("--k-d", type=float, default=1.0, help="dissipation factor")
    g.add_argument("--s0", type=float, default=3.0, help="distance attenuation length (m)")
    g.add_argument("--t-ambient", type=float, default=25.0)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the detector network")
    _common(t)
    t.add_argument("dataset")
    t.add_argument("--out", default="model.json")
    t.add_argument("--max-epochs", type=int, default=11)
    t.add_argument("--hidden-sizes", type=int, nargs="+", default=[8])
    t.add_argument("--learning-rate", type=float, default=0.05)
    t.add_argument("--patience", type=int, default=3)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--min-reference", type=float, default=-0.05)
    t.add_argument("--max-plant-output", type=float, default=2.0)
    t.add_argument("--norm-offset", type=float, default=37.5)
    t.add_argument("--norm-scale", type=float, default=1.0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="confusion matrices, rates and ROC")
    _common(e)
    e.add_argument("model")
    e.add_argument("dataset")
    e.add_argument("--out", default="report.json")
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--n-thresholds", type=int, default=101)
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("detect", help="verdicts for reading series, one per line")
    _common(d)
    d.add_argument("model")
    d.add_argument("--input", default="-", help="file of readings, '-' for stdin")
    d.add_argument("--threshold", type=float, default=0.5)
    d.add_argument("--output-delays", type=int, default=2)
    d.set_defaults(func=cmd_detect)

    h = sub.add_parser("emit-hdl", help="compile the model to fixed-point Verilog")
    _common(h)
    h.add_argument("model")
    h.add_argument("--out", default="fever_detector.v")
    h.add_argument("--module-name", default=None)
    h.add_argument("--total-bits", type=int, default=16)
    h.add_argument("--frac-bits", type=int, default=12)
    h.set_defaults(func=cmd_emit_hdl)

    r = sub.add_parser("report", help="tables and figures for a trained model")
    _common(r)
    r.add_argument("model")
    r.add_argument("dataset")
    r.add_argument("--out-dir", default="reports")
    r.add_argument("--curve", default=None, help="training-curve CSV written by train")
    r.add_argument("--threshold", type=float, default=0.5)
    r.add_argument("--n-thresholds", type=int, default=101)
    r.set_defaults(func=cmd_report)
    return p


def _load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in raw.items()}


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        # re-parse with file values as defaults so explicit flags still win
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                known = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
        if "seed" in cfg:
            parser.set_defaults(seed=cfg["seed"])
        args = parser.parse_args(argv)
    return args


# --- path checks -----------------------------------------------------------

def _need_file(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")


def _need_writable_dir(directory):
    if not directory.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {directory}")
    if not os.access(directory, os.W_OK):
        raise PermissionError(f"output directory is not writable: {directory}")


def _need_writable(path):
    _need_writable_dir(Path(path).resolve().parent)


def _load_dataset(path, seed):
    data = ds_mod.read_csv(path)
    manifest = ds_mod.split_manifest_path(path)
    if manifest.exists():
        return replace(data, split=ds_mod.read_split(manifest, len(data)))
    return ds_mod.split_dataset(data, seed)


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


# --- subcommands -------------------------------------------------------------

def cmd_generate(args) -> int:
    _need_writable(args.out)
    spec = ds_mod.CohortSpec(
        n_positive=args.n_positive, n_negative=args.n_negative,
        positive_temp_mean=args.positive_mean, positive_temp_std=args.positive_std,
        negative_temp_mean=args.negative_mean, negative_temp_std=args.negative_std,
        fever_threshold=args.fever_threshold, negative_ceiling=args.negative_ceiling,
        distance_range=(args.distance_min, args.distance_max), noise_std=args.noise_std,
        n_steps=args.n_steps, dt=args.dt, input_delays=args.input_delays,
        output_delays=args.output_delays, seed=args.seed)
    sensor = SensorModel(k_d=args.k_d, t_c=args.t_c, s0=args.s0, t_ambient=args.t_ambient)
    data = ds_mod.split_dataset(ds_mod.generate_cohort(spec, sensor), args.seed)
    ds_mod.write_csv(data, args.out)
    manifest = ds_mod.split_manifest_path(args.out)
    ds_mod.write_split(data.split, manifest)
    print(f"wrote {len(data)} samples ({int(data.labels.sum())} positive) to {args.out}")
    print(f"split sizes train/val/test = {data.split.sizes()} -> {manifest}")
    return 0


def cmd_train(args) -> int:
    _need_file(args.dataset)
    _need_writable(args.out)
    try:
        config = nn.TrainConfig(
            max_epochs=args.max_epochs, hidden_sizes=tuple(args.hidden_sizes),
            learning_rate=args.learning_rate, patience=args.patience,
            batch_size=args.batch_size, seed=args.seed, min_reference=args.min_reference,
            max_plant_output=args.max_plant_output)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = _load_dataset(args.dataset, args.seed)
    dims = [data.window_length, *config.hidden_sizes, 1]
    net = nn.init_weights(dims, args.seed, nn.Normalization(args.norm_offset, args.norm_scale))
    result = nn.train(net, data, config)
    if result.best_val_mse != min(result.val_mse):
        raise InvariantError("best validation MSE is not the curve minimum")
    nn.save_model(result.network, args.out)
    curve_csv = _sibling(args.out, ".curve.csv")
    report.write_curve_csv(result, curve_csv)
    report.plot_training_curves(list(result.curve_rows()), _sibling(args.out, ".curve.svg"),
                                best_epoch=result.best_epoch)
    print(f"epochs run: {len(result.val_mse)}  best epoch: {result.best_epoch}  "
          f"best validation MSE: {result.best_val_mse:.6g}")
    print(f"model -> {args.out}; curve -> {curve_csv}")
    return 0


def _evaluate(args):
    _need_file(args.model)
    _need_file(args.dataset)
    net = nn.load_model(args.model)
    data = _load_dataset(args.dataset, args.seed)
    if data.window_length != net.n_inputs:
        raise CompatibilityError(f"model takes {net.n_inputs} inputs but {args.dataset} has "
                                 f"{data.window_length}-reading windows")
    cfg = _narx_for(net, 2, args.threshold)
    return detector.evaluate(net, data, cfg, args.n_thresholds)


def _narx_for(net, output_delays, threshold):
    n = net.n_inputs
    od = min(output_delays, n - 1)
    return detector.NarxConfig(input_delays=n - od, output_delays=od, threshold=threshold)


def cmd_evaluate(args) -> int:
    _need_writable(args.out)
    ev = _evaluate(args)
    report.write_report_json(ev, args.out)
    report.write_roc_csv(ev.roc, _sibling(args.out, ".roc.csv"))
    report.plot_roc(ev.roc, _sibling(args.out, ".roc.svg"))
    report.write_confusion_csv(ev, _sibling(args.out, ".confusion.csv"))
    print(report.format_table(ev))
    if ev.roc_degenerate:
        print(f"ROC not computed: {ev.roc_degenerate}")
    print("note: SPEC = TN/(TN+FP); FPR = FP/(FP+TN)")
    return 0


def _parse_series(line, lineno):
    tokens = line.replace(",", " ").split()
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"bad reading ({exc})", lineno) from None


def cmd_detect(args) -> int:
    _need_file(args.model)
    if args.input != "-":
        _need_file(args.input)
    net = nn.load_model(args.model)
    cfg = _narx_for(net, args.output_delays, args.threshold)
    stream = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
    try:
        for lineno, line in enumerate(stream, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            readings = _parse_series(line, lineno)
            if len(readings) < cfg.window:
                record = {"score": None, "verdict": "insufficient-history",
                          "threshold": cfg.threshold}
            else:
                record = detector.classify(net, readings, cfg).as_record()
            sys.stdout.write(json.dumps(record) + "\n")
            sys.stdout.flush()
    finally:
        if stream is not sys.stdin:
            stream.close()
    return 0


def cmd_emit_hdl(args) -> int:
    _need_file(args.model)
    _need_writable(args.out)
    q = hdlgen.QFormat(args.total_bits, args.frac_bits)
    net = nn.load_model(args.model)
    qm = hdlgen.quantize_model(net, q)
    module = args.module_name or Path(args.out).stem
    v_path, side = hdlgen.write_hdl(qm, args.out, module)
    print(f"saturation count: {qm.saturated}")
    print(f"{q.name} module {module} -> {v_path} (manifest {side})")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _need_writable_dir(out)
    if args.curve:
        _need_file(args.curve)
    ev = _evaluate(args)
    report.write_report_json(ev, out / "evaluation.json")
    report.write_table_csv(ev, out / "roc_table.csv")
    report.write_confusion_csv(ev, out / "confusion.csv")
    report.write_roc_csv(ev.roc, out / "roc.csv")
    report.plot_confusion_matrices(ev, out / "confusion.svg")
    report.plot_roc(ev.roc, out / "roc.svg")
    if args.curve:
        rows = report.read_curve_csv(args.curve)
        vals = [r[2] for r in rows]
        best = rows[int(np.nanargmin(vals))][0] if rows else None
        report.plot_training_curves(rows, out / "training.svg", best_epoch=best)
    print(report.format_table(ev))
    print(f"report written to {out}/")
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except FeverScreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except (FeverScreenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
