"""Command-line interface: generate, train, evaluate, predict.

Every command honors ``--seed``; together with the config file a seed
fully determines all outputs. Output locations default under the
``DEEPLFM_OUTPUT_ROOT`` environment variable when ``--out`` is not given.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import build_run_spec, parse_kv_file, write_kv_file
from .data import (
    Normalization,
    load_dataset,
    load_inputs_csv,
    write_data_csv,
    write_predictions_csv,
    write_splits_csv,
)
from .dynamics import generate_fitzhugh_nagumo, generate_lorenz, generate_toy
from .errors import (
    DataError,
    DomainError,
    ForwardError,
    GraphError,
    IntegrationError,
    ParameterError,
    ShapeError,
    TrainingError,
    UsageError,
)
from .metrics import evaluate_predictions
from .model import DLFMNetwork
from .training import train

OUTPUT_ROOT_ENV = "DEEPLFM_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_out(out, default_name):
    if out:
        return out
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return os.path.join(root, default_name)
    return default_name


def _predict_denormalized(net, x_raw, n_mc):
    if net.normalization is None:
        raise DataError(
            "checkpoint carries no normalization statistics; "
            "it was saved before training"
        )
    norm = Normalization.from_dict(net.normalization)
    mean_n, var_n = net.predict(norm.normalize_x(x_raw), n_mc=n_mc)
    return norm.denormalize_mean(mean_n), norm.denormalize_var(var_n)


def _format_float(value):
    return repr(float(value))


# -- generate -------------------------------------------------------------------


def cmd_generate(args):
    if args.system == "toy":
        series = generate_toy(
            seed=args.seed,
            n_grid=args.points,
            noise_var=args.noise_var if args.noise_var is not None else 0.04,
        )
    elif args.system == "fitzhugh-nagumo":
        n_points = args.points if args.points != 600 else 400
        series = generate_fitzhugh_nagumo(
            seed=args.seed,
            scenario=args.scenario,
            n_points=n_points,
            noise_var=args.noise_var if args.noise_var is not None else 0.01,
            n_train=3 * n_points // 4,
        )
    elif args.system == "lorenz":
        series = generate_lorenz(
            seed=args.seed,
            train_fraction=args.train_fraction,
            n_points=args.points if args.points != 600 else 1000,
        )
    else:
        raise UsageError(f"unknown system {args.system!r}")

    out_dir = _resolve_out(args.out, f"{args.system}-data")
    os.makedirs(out_dir, exist_ok=True)
    dataset = series.to_dataset()
    write_data_csv(os.path.join(out_dir, "data.csv"), dataset)
    write_splits_csv(os.path.join(out_dir, "splits.csv"), dataset.splits)
    write_kv_file(
        os.path.join(out_dir, "params.txt"),
        {k: v for k, v in series.params.items()},
    )
    counts = ", ".join(f"{k}={len(v)}" for k, v in dataset.splits.items())
    print(f"wrote {dataset.n_points} points to {out_dir} ({counts})")
    return EXIT_OK


# -- train ----------------------------------------------------------------------


def cmd_train(args):
    entries = parse_kv_file(args.config)
    spec = build_run_spec(entries)
    if args.seed is not None:
        spec.seed = args.seed
        spec.train.seed = args.seed

    dataset = load_dataset(
        spec.data_csv, spec.splits_csv, spec.input_cols, spec.target_cols
    )
    if "train" not in dataset.splits:
        raise DataError("dataset has no 'train' split")
    net_config = spec.network_config(
        dataset.inputs.shape[1], dataset.targets.shape[1]
    )
    net = DLFMNetwork(net_config, spec.seed)

    out_dir = _resolve_out(args.out, "train-run")
    os.makedirs(out_dir, exist_ok=True)

    def show(row):
        print(
            f"iteration {row.iteration} elbo {_format_float(row.elbo)} "
            f"val_nmse {_format_float(row.val_nmse)} "
            f"val_mnll {_format_float(row.val_mnll)}"
        )

    trace_path = os.path.join(out_dir, "trace.csv")
    try:
        result = train(net, dataset, spec.train, trace_callback=show)
    except TrainingError as exc:
        if exc.trace:
            _write_trace(trace_path, exc.trace)
        raise

    _write_trace(trace_path, result.trace)
    checkpoint_path = os.path.join(out_dir, "checkpoint.npz")
    net.save(checkpoint_path)

    metrics = {}
    metrics_truth = {}
    for split in sorted(dataset.splits):
        x_raw, y_raw = dataset.split_arrays(split)
        if x_raw.shape[0] == 0:
            continue
        mean, var = _predict_denormalized(net, x_raw, net.n_mc)
        metrics[split] = evaluate_predictions(
            split, dataset.target_names, y_raw, mean, var
        ).to_dict()
        if dataset.truth is not None:
            _, y_true = dataset.split_arrays(split, use_truth=True)
            metrics_truth[split] = evaluate_predictions(
                split, dataset.target_names, y_true, mean, var
            ).to_dict()

    summary = {
        "command": "train",
        "version": __version__,
        "config": dict(entries),
        "seed": spec.seed,
        "n_iterations": result.n_iterations,
        "final_elbo": result.final_elbo,
        "metrics": metrics,
        "checkpoint": "checkpoint.npz",
        "wall_time_s": result.wall_time_s,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if metrics_truth:
        summary["metrics_vs_truth"] = metrics_truth
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for split, report in metrics.items():
        print(
            f"split {split}: nmse {_format_float(report['mean_nmse'])} "
            f"mnll {_format_float(report['mean_mnll'])}"
        )
    print(f"wrote checkpoint and summary to {out_dir}")
    return EXIT_OK


def _write_trace(path, rows):
    with open(path, "w") as fh:
        fh.write("iteration,elbo,val_nmse,val_mnll\n")
        for row in rows:
            fh.write(
                f"{row.iteration},{_format_float(row.elbo)},"
                f"{_format_float(row.val_nmse)},{_format_float(row.val_mnll)}\n"
            )


# -- evaluate -------------------------------------------------------------------


def cmd_evaluate(args):
    net = DLFMNetwork.load(args.checkpoint)
    dataset = load_dataset(args.data, args.splits)
    x_raw, y_raw = dataset.split_arrays(args.split, use_truth=args.use_truth)
    if x_raw.shape[0] == 0:
        raise DataError(f"split {args.split!r} is empty")
    n_mc = args.n_mc if args.n_mc is not None else net.n_mc
    mean, var = _predict_denormalized(net, x_raw, n_mc)
    report = evaluate_predictions(
        args.split, dataset.target_names, y_raw, mean, var
    )
    for name, value in report.to_dict()["nmse"].items():
        print(f"nmse {name} {_format_float(value)}")
    for name, value in report.to_dict()["mnll"].items():
        print(f"mnll {name} {_format_float(value)}")
    print(f"mean_nmse {_format_float(report.mean_nmse)}")
    print(f"mean_mnll {_format_float(report.mean_mnll)}")
    if args.out:
        payload = report.to_dict()
        payload["n_mc"] = n_mc
        payload["vs_truth"] = bool(args.use_truth)
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


# -- predict --------------------------------------------------------------------


def cmd_predict(args):
    net = DLFMNetwork.load(args.checkpoint)
    inputs, input_names = load_inputs_csv(args.inputs)
    n_mc = args.n_mc if args.n_mc is not None else net.n_mc
    if inputs.shape[0] == 0:
        mean = np.zeros((0, net.config.output_dim))
        var = np.zeros((0, net.config.output_dim))
    else:
        mean, var = _predict_denormalized(net, inputs, n_mc)
    target_names = [f"y{i + 1}" for i in range(net.config.output_dim)]
    out_path = _resolve_out(args.out, "predictions.csv")
    write_predictions_csv(out_path, inputs, mean, var, input_names, target_names)
    print(f"wrote {inputs.shape[0]} predictions to {out_path}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="deeplfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a benchmark dataset")
    gen.add_argument("system", choices=["toy", "fitzhugh-nagumo", "lorenz"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None)
    gen.add_argument("--points", type=int, default=600)
    gen.add_argument("--noise-var", type=float, default=None)
    gen.add_argument("--scenario", choices=["a", "b"], default="a")
    gen.add_argument("--train-fraction", type=float, default=0.8)
    gen.set_defaults(func=cmd_generate)

    trn = sub.add_parser("train", help="train a model from a config file")
    trn.add_argument("--config", required=True)
    trn.add_argument("--seed", type=int, default=None)
    trn.add_argument("--out", default=None)
    trn.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--splits", default=None)
    ev.add_argument("--split", default="test")
    ev.add_argument("--use-truth", action="store_true",
                    help="evaluate against noiseless truth columns")
    ev.add_argument("--n-mc", type=int, default=None)
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", help="predict at new inputs")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--inputs", required=True)
    pr.add_argument("--out", default=None)
    pr.add_argument("--n-mc", type=int, default=None)
    pr.add_argument("--seed", type=int, default=None)
    pr.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, ForwardError, IntegrationError, DomainError,
            GraphError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
