"""Command-line entry point: ``surfbench {gen,train,eval,classify,calibrate,inspect}``.

Exit codes: 0 when the requested artifact was completely written, 2 for
invalid input (config, files, incompatible model), 3 for runtime or
numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .calibration import calibrate_surface, detect_jump_events
from .config import dump_config, load_config
from .dataset import (generate_corpus, load_dataset, load_trace, read_manifest, save_dataset,
                      split, window_dataset)
from .errors import (AlignmentFailed, IncompatibleModel, NoEventsFound, NonFiniteLoss,
                     NumericalBlowup, SurfBenchError)
from .evaluation import evaluate
from .model import classify_batch, load_model, save_model
from .pipeline import fit_pipeline
from .seeding import derive_seed
from .streaming import stream_classify

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class Invalid(SurfBenchError):
    """Bad command-line input detected before any output is written."""


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


class _Staging:
    """Write into a scratch directory and move files into ``out`` on success."""

    def __init__(self, out):
        self.out = out
        parent = os.path.dirname(os.path.abspath(out)) or "."
        if os.path.exists(out) and not os.path.isdir(out):
            raise Invalid(f"output path {out} exists and is not a directory")
        if not os.path.isdir(parent):
            raise Invalid(f"parent directory of {out} does not exist")
        self.parent = parent

    def __enter__(self):
        self.tmp = tempfile.mkdtemp(prefix=".surfbench-", dir=self.parent)
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                os.makedirs(self.out, exist_ok=True)
                for name in sorted(os.listdir(self.tmp)):
                    os.replace(os.path.join(self.tmp, name), os.path.join(self.out, name))
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _need_file(path, what):
    if not os.path.isfile(path):
        raise Invalid(f"{what} {path} not found")


def _check_compatible(model, class_names):
    if tuple(model.class_names) != tuple(class_names):
        raise IncompatibleModel(f"model classes {list(model.class_names)} do not match the "
                                f"dataset's {list(class_names)}")


# --- commands ----------------------------------------------------------------

def cmd_gen(args):
    cfg = _config(args)
    c = cfg.corpus
    with _Staging(args.out) as tmp:
        t0 = time.time()
        ds = generate_corpus(cfg.surfaces, c.episodes_per_class, c.duration,
                             (c.period_min, c.period_max), cfg.seed, cfg.leg, cfg.cycle,
                             cfg.noise, c.imu_rate, c.workers)
        generation = {
            "seed": cfg.seed,
            "surfaces": [asdict(s) for s in cfg.surfaces],
            "corpus": asdict(c),
            "cycle": asdict(cfg.cycle),
            "noise": asdict(cfg.noise),
            "leg": asdict(cfg.leg),
            "version": __version__,
        }
        save_dataset(ds, tmp, generation)
        _log(f"simulated {len(ds.episodes)} episodes in {time.time() - t0:.1f} s")
    episodes, samples = ds.class_counts()
    print(f"{'class':<12} {'episodes':>8} {'samples':>9}")
    for name, e, s in zip(ds.class_names, episodes, samples):
        print(f"{name:<12} {e:>8} {s:>9}")
    print(f"manifest: {os.path.join(args.out, 'manifest.json')}")
    return EXIT_OK


def _splits(cfg, ds):
    train_ds, test_ds = split(ds, cfg.test_fraction, cfg.seed)
    return train_ds, test_ds


def cmd_train(args):
    cfg = _config(args)
    _need_file(args.manifest, "manifest")
    ds = load_dataset(args.manifest)
    train_ds, _ = _splits(cfg, ds)
    pipe = cfg.pipeline
    if pipe.val_fraction > 0:
        fit_ds, val_ds = split(train_ds, pipe.val_fraction, derive_seed(cfg.seed, "val-split"))
    else:
        fit_ds, val_ds = train_ds, None
    with _Staging(args.out) as tmp:
        model, history = fit_pipeline(fit_ds, pipe, cfg.seed, val_ds=val_ds, log=_log)
        save_model(model, os.path.join(tmp, "model.json"))
        with open(os.path.join(tmp, "history.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "val_accuracy"])
            for row in history.rows():
                w.writerow([row[0], repr(row[1]), repr(row[2])])
        report = evaluate(model, window_dataset(val_ds or fit_ds, pipe.window, pipe.stride))
        report.write_metrics_csv(os.path.join(tmp, "val_metrics.csv"))
    print(model.summary())
    print(f"final validation accuracy: {report.mean_accuracy:.5f}")
    print(report.table())
    print(f"model: {os.path.join(args.out, 'model.json')}")
    return EXIT_OK


def cmd_eval(args):
    cfg = _config(args)
    _need_file(args.model, "model")
    _need_file(args.manifest, "manifest")
    model = load_model(args.model)
    _check_compatible(model, read_manifest(args.manifest)["class_names"])
    ds = load_dataset(args.manifest)
    train_ds, test_ds = _splits(cfg, ds)
    chosen = {"test": test_ds, "train": train_ds, "all": ds}[args.split]
    stride = args.stride or cfg.pipeline.stride
    with _Staging(args.out) as tmp:
        report = evaluate(model, window_dataset(chosen, model.window, stride))
        report.write_confusion_csv(os.path.join(tmp, "confusion.csv"))
        report.write_metrics_csv(os.path.join(tmp, "metrics.csv"))
    print(f"{args.split} split: {len(chosen.episodes)} episodes, "
          f"{int(report.confusion.sum())} windows")
    print(report.matrix())
    print()
    print(report.table())
    return EXIT_OK


def cmd_classify(args):
    _need_file(args.model, "model")
    _need_file(args.csv, "input CSV")
    model = load_model(args.model)
    cfg = load_config(args.config) if args.config else None
    trace = load_trace(args.csv, cfg.columns if cfg else None)
    stride = args.stride or 1
    if args.stream and stride != 1:
        raise Invalid("--stream emits one prediction per sample; --stride must be 1")
    if args.stream:
        rows = [(p.t, p.label, p.probabilities) for p in stream_classify(model, trace)]
    else:
        W = model.window
        starts = np.arange(0, max(len(trace) - W + 1, 0), stride)
        if len(starts):
            view = np.lib.stride_tricks.sliding_window_view(trace.data, W, axis=0)
            probs = classify_batch(model, view[starts].transpose(0, 2, 1))
        else:
            probs = np.empty((0, len(model.class_names)))
        rows = [(trace.t[s + W - 1], int(np.argmax(p)), p) for s, p in zip(starts, probs)]
    out = args.out
    if os.path.isdir(out):
        out = os.path.join(out, "predictions.csv")
    with open(out + ".tmp", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "class_id", "class_name"] + [f"p_{n}" for n in model.class_names])
        for t, k, p in rows:
            w.writerow([repr(float(t)), k, model.class_names[k]] + [repr(float(x)) for x in p])
    os.replace(out + ".tmp", out)
    counts = np.bincount([k for _, k, _ in rows], minlength=len(model.class_names))
    print(f"{len(rows)} predictions from {len(trace)} samples -> {out}")
    for name, n in zip(model.class_names, counts):
        print(f"  {name:<12} {n}")
    return EXIT_OK


def cmd_calibrate(args):
    cfg = _config(args)
    _need_file(args.ref, "reference CSV")
    ref = load_trace(args.ref, cfg.columns)
    detect_jump_events(ref)   # fail fast on a quiescent reference
    budget = args.budget if args.budget is not None else cfg.calibration.budget
    if budget < 20:
        raise Invalid("--budget must be >= 20")
    init = cfg.calibration_init()
    with _Staging(args.out) as tmp:
        result = calibrate_surface(ref, cfg.leg, cfg.cycle, init, cfg.calibration.bounds,
                                   budget, derive_seed(cfg.seed, "calibration"),
                                   channels=cfg.calibration.channels, log=_log)
        result.write_json(os.path.join(tmp, "calibration.json"))
        if result.comparison is None:
            raise AlignmentFailed("no candidate could be aligned with the reference")
        result.comparison.write_csv(os.path.join(tmp, "aligned.csv"))
    p = result.params
    print(f"{'param':<6} {'init':>12} {'fitted':>12}")
    for name in ("mu", "k_n", "c_n"):
        print(f"{name:<6} {getattr(init, name):>12.6g} {getattr(p, name):>12.6g}")
    print(f"evaluations: {result.evaluations}  converged: {result.converged}")
    print(f"final accuracy (1 - NRMSE of |gyr|): {result.accuracy:.5f}")
    return EXIT_OK


def cmd_inspect(args):
    path = args.path
    if path is None:
        print(dump_config(_config(args)))
        return EXIT_OK
    _need_file(path, "file")
    if path.endswith(".json"):
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as exc:
                raise Invalid(f"{path} is not valid JSON: {exc}") from None
        if "arrays" in doc:
            model = load_model(path)
            print(model.summary())
            print(f"pca explained axes: {model.pca_components.shape[0]}")
        elif "episodes" in doc:
            manifest = read_manifest(path)
            labels = [e["label"] for e in manifest["episodes"]]
            counts = np.bincount(labels, minlength=len(manifest["class_names"]))
            print(f"manifest v{manifest['version']}: {len(labels)} episodes")
            for name, n in zip(manifest["class_names"], counts):
                print(f"  {name:<12} {n}")
            seed = manifest.get("generation", {}).get("seed")
            if seed is not None:
                print(f"generation seed: {seed}")
        elif "loss_history" in doc:
            print(json.dumps({k: v for k, v in doc.items() if k != "loss_history"}, indent=1))
        else:
            raise Invalid(f"{path}: unrecognised JSON document")
    elif path.endswith(".csv"):
        trace = load_trace(path)
        print(f"{len(trace)} samples, {trace.t[-1] - trace.t[0]:.3f} s at {trace.rate:.2f} Hz, "
              f"label={trace.label}")
        try:
            ev = detect_jump_events(trace)
            print(f"{len(ev)} jump events, median spacing "
                  f"{np.median(np.diff(ev)) if len(ev) > 1 else float('nan'):.3f} s")
        except (NoEventsFound, ValueError) as exc:
            print(f"no jump events: {exc}")
    else:
        print(dump_config(load_config(path)))
    return EXIT_OK


# --- wiring ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="surfbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", metavar="PATH", help="run configuration file")
        if seed:
            p.add_argument("--seed", type=int, metavar="N", help="overrides the config seed")

    p = sub.add_parser("gen", help="simulate a labeled corpus")
    common(p)
    p.add_argument("--out", metavar="DIR", default="corpus")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit scaler, PCA and GRU on a corpus")
    p.add_argument("manifest")
    common(p)
    p.add_argument("--out", metavar="DIR", default="model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="confusion matrix and per-class metrics")
    p.add_argument("model")
    p.add_argument("manifest")
    common(p)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.add_argument("--stride", type=int, metavar="N", help="window stride (default: config)")
    p.add_argument("--out", metavar="DIR", default="report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="per-sample predictions for an IMU CSV")
    p.add_argument("model")
    p.add_argument("csv")
    common(p, seed=False)
    p.add_argument("--stream", action="store_true", help="use the sample-by-sample FIFO path")
    p.add_argument("--stride", type=int, metavar="N", help="window stride in batch mode")
    p.add_argument("--out", metavar="PATH", default="predictions.csv")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("calibrate", help="fit surface parameters to a reference trace")
    p.add_argument("ref")
    common(p)
    p.add_argument("--budget", type=int, metavar="N", help="max simulations")
    p.add_argument("--out", metavar="DIR", default="calibration")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("inspect", help="summarise a model, manifest, trace or config")
    p.add_argument("path", nargs="?")
    common(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "stride", None) is not None and args.stride < 1:
        _log("error: --stride must be >= 1")
        return EXIT_INVALID
    try:
        return args.func(args)
    except (NumericalBlowup, NonFiniteLoss, AlignmentFailed) as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME
    except (ValueError, OSError, SurfBenchError, KeyError) as exc:
        # NoEventsFound lands here: the reference is rejected before any work
        _log(f"error: {exc}")
        return EXIT_INVALID
    except (ArithmeticError, RuntimeError) as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
