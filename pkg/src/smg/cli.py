"""Command-line entry point: ``smg {train,verify,export-masks,inspect-dataset}``.

Exit codes
  0  success
  1  unexpected internal error
  2  invalid command line
  3  dataset missing or malformed
  4  invalid configuration
  5  shape or contract violation (e.g. checkpoint incompatible with dataset)
  6  training aborted on non-finite values
  7  a verification suite failed

Failures print one JSON object ``{"error": kind, "message": ..., "exit_code": n}``
on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .errors import ConfigError, ConstraintError, ContractError, DatasetError, TrainingError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATASET = 3
EXIT_CONFIG = 4
EXIT_CONTRACT = 5
EXIT_TRAINING = 6
EXIT_VERIFY = 7

_TRAIN_FLAGS = {
    # flag: (config field, type, help)
    "--layers": ("layers", int, "number of soft-mask layers K; grid {2,3,4,5}"),
    "--hidden": ("hidden", int, "hidden width d; grid {32,64,128} bio, {64,128,256} social"),
    "--lr": ("lr", float, "Adam learning rate; grid {0.005,0.001,0.0005}"),
    "--lr-decay": ("lr_decay", float, "multiplicative lr decay per period; range [0.7, 1]"),
    "--lr-period": ("lr_period", int, "epochs between lr decays; grid {50,100}"),
    "--batch-size": ("batch_size", int, "graphs per batch; grid {64,128}"),
    "--dropout": ("dropout", float, "dropout on node states; grid {0, 0.5}"),
    "--epochs": ("epochs", int, "training epochs per fold"),
    "--seed": ("seed", int, "seed for folds, initialisation and shuffling"),
    "--channel-mode": ("channel_mode", str, "scalar or multi (one mask per channel)"),
    "--readout": ("readout", str, "sum or jk (concatenated per-layer sums)"),
    "--folds": ("folds", int, "number of cross-validation folds"),
    "--repeats": ("repeats", int, "independent repeats of the whole cross-validation"),
    "--mask-mode": ("mask_mode", str, "learned, or ones to disable masking"),
    "--dtype": ("dtype", str, "float64 or float32"),
    "--mask-snapshots": ("mask_snapshots", int, "test graphs per fold exported as DOT"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message, EXIT_USAGE, usage=self.format_usage())


def _fail(kind: str, message: str, code: int, usage: str | None = None):
    if usage:
        sys.stderr.write(usage)
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    raise SystemExit(code)


def build_parser() -> argparse.ArgumentParser:
    from .train import TrainConfig

    defaults = TrainConfig()
    parser = _Parser(
        prog="smg",
        description="Soft-mask GNN: train, verify the subgraph-equivalence properties, export mask weights.",
        epilog="exit codes: 0 ok, 1 internal, 2 usage, 3 dataset, 4 config, 5 shape/contract, 6 training, 7 verification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    train = sub.add_parser("train", help="k-fold cross-validation on a TU dataset")
    train.add_argument("--dataset", required=True, help="TU dataset directory (or a name under $SMG_DATA_DIR)")
    train.add_argument("--config", help="JSON file with TrainConfig fields; flags override it (default: none)")
    train.add_argument("--run-dir", help="output directory (default: runs/<dataset>_seed<seed>)")
    train.add_argument("--parallel-folds", type=int, default=1, help="worker processes for folds (default: 1)")
    train.add_argument("--allow-off-grid", action="store_true", default=None,
                       help="accept hyperparameters outside the search grid (default: off)")
    for flag, (name, typ, text) in _TRAIN_FLAGS.items():
        train.add_argument(flag, dest=name, type=typ, default=None,
                           help=f"{text} (default: {getattr(defaults, name)})")

    verify = sub.add_parser("verify", help="run randomized equivalence and invariance suites")
    from .theory import SUITES

    verify.add_argument("--suite", default="all", choices=["all", *SUITES], help="suite to run (default: all)")
    verify.add_argument("--trials", type=int, default=None, help="instances per suite (default: suite-specific)")
    verify.add_argument("--seed", type=int, default=42, help="suite seed (default: 42)")
    verify.add_argument("--out", help="also write the JSON report here (default: stdout only)")

    export = sub.add_parser("export-masks", help="write per-layer mask DOT files from a checkpoint")
    export.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    export.add_argument("--dataset", required=True, help="TU dataset directory the model was trained on")
    export.add_argument("--out", default="masks", help="output directory (default: masks)")
    which = export.add_mutually_exclusive_group()
    which.add_argument("--graphs", type=int, nargs="+", help="0-based graph ids (default: graph 0)")
    which.add_argument("--all-graphs", action="store_true", help="export every graph (default: off)")

    inspect = sub.add_parser("inspect-dataset", help="print graph count, classes and mean node count")
    inspect.add_argument("--path", required=True, help="TU dataset directory")
    inspect.add_argument("--json", action="store_true", help="emit JSON instead of text (default: off)")
    return parser


def _load(path: str):
    from .tu import load_tu_dataset, resolve_dataset_path

    return load_tu_dataset(resolve_dataset_path(path))


def resolve_train_config(args) -> "TrainConfig":
    """Flag beats config file beats built-in default."""
    from .train import TrainConfig

    values: dict = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    for f in fields(TrainConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    try:
        return TrainConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def cmd_train(args) -> int:
    from .train import run_cv

    config = resolve_train_config(args)
    graphs = _load(args.dataset)
    run_dir = Path(args.run_dir or f"runs/{Path(args.dataset).name}_seed{config.seed}")
    result = run_cv(graphs, config, run_dir, parallel_folds=args.parallel_folds)
    summary = {**result.summary(), "run_dir": str(run_dir)}
    print(json.dumps(summary, indent=2))
    if result.failed:
        _fail("training", f"{len(summary['failed_folds'])} fold(s) failed; see {run_dir}/final_report.json", EXIT_TRAINING)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .theory import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    for name in names:
        kwargs = {"seed": args.seed}
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be positive")
            kwargs["trials"] = args.trials
        reports.append(SUITES[name](**kwargs).to_dict())
    payload = reports[0] if len(reports) == 1 else {"suites": reports, "passed": all(r["passed"] for r in reports)}
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_VERIFY


def cmd_export(args) -> int:
    from .layers import load_checkpoint
    from .viz import export_snapshot

    try:
        model = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise DatasetError(f"checkpoint not found: {args.checkpoint}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ContractError(f"unreadable checkpoint {args.checkpoint}: {exc}") from None
    graphs = _load(args.dataset)
    ids = range(len(graphs)) if args.all_graphs else (args.graphs or [0])
    written = []
    for gid in ids:
        if not 0 <= gid < len(graphs):
            raise ContractError(f"graph id {gid} outside 0..{len(graphs) - 1}")
        written.extend(str(p) for p in export_snapshot(model, graphs[gid], args.out))
    print(json.dumps({"files": written}, indent=2))
    return EXIT_OK


def cmd_inspect(args) -> int:
    from .tu import dataset_summary

    stats = dataset_summary(_load(args.path))
    if args.json:
        print(json.dumps(stats))
    else:
        print(f"{stats['graphs']} graphs, {stats['classes']} classes, avg nodes {stats['avg_nodes']:.1f}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "verify": cmd_verify, "export-masks": cmd_export, "inspect-dataset": cmd_inspect}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DatasetError as exc:
        _fail("dataset", str(exc), EXIT_DATASET)
    except ConfigError as exc:
        _fail("config", str(exc), EXIT_CONFIG)
    except TrainingError as exc:
        _fail("training", str(exc), EXIT_TRAINING)
    except (ContractError, ConstraintError) as exc:
        _fail("contract", str(exc), EXIT_CONTRACT)
    except OSError as exc:
        _fail("io", str(exc), EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
