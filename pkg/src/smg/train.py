"""Losses, the epoch loop and the k-fold cross-validation driver."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, TrainingError
from .graph import Graph, make_batch, stratified_kfold
from .layers import ModelConfig, SmgModel, model_forward, save_checkpoint
from .optim import AdamState, adam_step
from .tensor import Tensor

log = logging.getLogger(__name__)

# hyperparameter search grid; values outside it need allow_off_grid
GRID = {
    "layers": (2, 3, 4, 5),
    "hidden": (32, 64, 128, 256),
    "lr": (0.005, 0.001, 0.0005),
    "lr_period": (50, 100),
    "batch_size": (64, 128),
    "dropout": (0.0, 0.5),
}
HIDDEN_BIO = (32, 64, 128)
HIDDEN_SOCIAL = (64, 128, 256)


@dataclass
class TrainConfig:
    layers: int = 3
    hidden: int = 32
    lr: float = 0.005
    lr_decay: float = 0.8
    lr_period: int = 50
    batch_size: int = 64
    dropout: float = 0.5
    epochs: int = 300
    seed: int = 0
    channel_mode: str = "scalar"
    readout: str = "sum"
    folds: int = 10
    repeats: int = 1
    mask_mode: str = "learned"
    task: str = "classification"
    dtype: str = "float64"
    mask_snapshots: int = 2
    allow_off_grid: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.channel_mode not in ("scalar", "multi"):
            raise ConfigError(f"channel_mode must be scalar or multi, got {self.channel_mode!r}")
        if self.readout not in ("sum", "jk"):
            raise ConfigError(f"readout must be sum or jk, got {self.readout!r}")
        if self.mask_mode not in ("learned", "ones"):
            raise ConfigError("mask_mode must be learned or ones")
        if self.task not in ("classification", "regression"):
            raise ConfigError("task must be classification or regression")
        if self.epochs < 1 or self.folds < 2 or self.repeats < 1 or self.batch_size < 1:
            raise ConfigError("epochs, batch_size and repeats must be positive and folds >= 2")
        if not self.lr > 0 or self.lr_period < 1 or not 0 < self.lr_decay <= 1:
            raise ConfigError("lr must be positive, lr_period >= 1 and lr_decay in (0, 1]")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.allow_off_grid:
            return
        problems = [
            f"{name}={getattr(self, name)} not in {grid}"
            for name, grid in GRID.items()
            if getattr(self, name) not in grid
        ]
        if not 0.7 <= self.lr_decay <= 1.0:
            problems.append(f"lr_decay={self.lr_decay} not in [0.7, 1]")
        if problems:
            raise ConfigError("off-grid hyperparameters (pass allow_off_grid to override): " + "; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def model_config(self, in_dim: int, num_outputs: int) -> ModelConfig:
        return ModelConfig(
            in_dim=in_dim,
            hidden=self.hidden,
            num_classes=num_outputs,
            layers=self.layers,
            channel_mode=self.channel_mode,
            readout=self.readout,
            dropout=self.dropout,
            dtype=self.dtype,
        )


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step decay: ``lr * decay ** (epoch // period)`` for 0-based epochs."""
    return config.lr * config.lr_decay ** (epoch // config.lr_period)


# ---------------------------------------------------------------------------
# losses


def cross_entropy_loss(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under row-wise softmax."""
    labels = np.asarray(labels)
    G, C = logits.shape
    if labels.shape != (G,):
        raise ContractError(f"expected {G} labels, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= C) or np.any(labels != np.round(labels)):
        raise ContractError(f"labels must be integers in [0, {C})")
    onehot = np.zeros((G, C), dtype=logits.dtype)
    onehot[np.arange(G), labels.astype(np.int64)] = 1.0
    picked = T.sum_all(T.log_softmax(logits) * Tensor(onehot))
    return picked * (-1.0 / G)


def mae_loss(pred: Tensor, targets) -> Tensor:
    """Mean absolute error; the subgradient at an exact tie is 0."""
    targets = np.asarray(targets, dtype=pred.dtype)
    if targets.size != pred.data.size:
        raise ContractError(f"{targets.size} targets for predictions of shape {pred.shape}")
    return T.mean_all(T.absolute(pred - Tensor(targets.reshape(pred.shape))))


def accuracy(logits: np.ndarray, labels) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    return float(np.mean(np.argmax(logits, axis=1) == labels))


# ---------------------------------------------------------------------------
# epoch loop


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float
    lr: float


def _loss(model: SmgModel, out, batch, config: TrainConfig) -> Tensor:
    if config.task == "regression":
        return mae_loss(out.logits, batch.labels)
    return cross_entropy_loss(out.logits, batch.labels.astype(np.int64))


def _override(model: SmgModel, batch, config: TrainConfig):
    if config.mask_mode == "ones":
        return np.ones((model.num_layers, batch.graph.num_nodes))
    return None


def train_epoch(
    model: SmgModel,
    graphs: Sequence[Graph],
    optimizer: AdamState,
    config: TrainConfig,
    epoch: int,
    rng: np.random.Generator,
) -> EpochMetrics:
    """One shuffled pass over ``graphs``; sets the scheduled lr first."""
    if not graphs:
        raise ContractError("train_epoch needs at least one graph")
    optimizer.lr = lr_at(epoch, config)
    order = rng.permutation(len(graphs))
    total_loss = 0.0
    correct = 0.0
    for bi, start in enumerate(range(0, len(order), config.batch_size)):
        batch = make_batch([graphs[i] for i in order[start : start + config.batch_size]])
        out = model_forward(model, batch, _override(model, batch, config), training=True, rng=rng)
        loss = _loss(model, out, batch, config)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}, lr {optimizer.lr:g}")
        model.zero_grad()
        T.backward(loss)
        try:
            adam_step(model.parameters(), optimizer)
        except TrainingError as exc:
            raise TrainingError(f"{exc} (epoch {epoch}, batch {bi}, lr {optimizer.lr:g})") from None
        total_loss += value * batch.num_graphs
        if config.task == "classification":
            correct += accuracy(out.logits.data, batch.labels) * batch.num_graphs
    n = len(graphs)
    return EpochMetrics(epoch, total_loss / n, correct / n if config.task == "classification" else float("nan"), optimizer.lr)


def evaluate(model: SmgModel, graphs: Sequence[Graph], config: TrainConfig, batch_size: int = 256) -> tuple[float, float]:
    """Mean loss and accuracy (or MAE for regression) without dropout."""
    if not graphs:
        return float("nan"), float("nan")
    total, metric = 0.0, 0.0
    with T.no_grad():
        for start in range(0, len(graphs), batch_size):
            batch = make_batch(list(graphs[start : start + batch_size]))
            out = model_forward(model, batch, _override(model, batch, config))
            total += _loss(model, out, batch, config).item() * batch.num_graphs
            if config.task == "classification":
                metric += accuracy(out.logits.data, batch.labels) * batch.num_graphs
            else:
                metric += float(np.abs(out.logits.data.ravel() - batch.labels).sum())
    return total / len(graphs), metric / len(graphs)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldReport:
    fold_index: int
    repeat: int
    train_loss: list[float]
    train_accuracy: list[float]
    test_accuracy: float
    wall_time: float
    lrs: list[float] = field(default_factory=list)
    test_curve: list[float] = field(default_factory=list)
    failed: bool = False
    error: str | None = None


@dataclass
class CVResult:
    folds: list[FoldReport]
    mean_accuracy: float
    std_accuracy: float
    failed: bool
    config: TrainConfig

    def summary(self) -> dict:
        return {
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "fold_accuracies": [f.test_accuracy for f in self.folds],
            "failed": self.failed,
            "failed_folds": [f.fold_index for f in self.folds if f.failed],
            "repeats": self.config.repeats,
        }


def dataset_dims(graphs: Sequence[Graph], task: str) -> tuple[int, int]:
    in_dim = graphs[0].features.shape[1]
    if task == "regression":
        return in_dim, 1
    return in_dim, int(max(g.label for g in graphs)) + 1


def train_fold(
    graphs: Sequence[Graph],
    train_ids: Sequence[int],
    test_ids: Sequence[int],
    config: TrainConfig,
    fold_index: int = 0,
    repeat: int = 0,
    eval_every: int = 0,
) -> tuple[FoldReport, SmgModel]:
    """Train a fresh model on one split; test accuracy is taken at the last epoch."""
    rng = np.random.default_rng([config.seed, repeat, fold_index])
    in_dim, outputs = dataset_dims(graphs, config.task)
    model = SmgModel(config.model_config(in_dim, outputs), rng)
    optimizer = AdamState(lr=config.lr)
    train = [graphs[i] for i in train_ids]
    test = [graphs[i] for i in test_ids]
    report = FoldReport(fold_index, repeat, [], [], float("nan"), 0.0)
    start = time.perf_counter()
    try:
        for epoch in range(config.epochs):
            m = train_epoch(model, train, optimizer, config, epoch, rng)
            report.train_loss.append(m.loss)
            report.train_accuracy.append(m.accuracy)
            report.lrs.append(m.lr)
            if eval_every and (epoch + 1) % eval_every == 0:
                report.test_curve.append(evaluate(model, test, config)[1])
        report.test_accuracy = evaluate(model, test, config)[1]
    except TrainingError as exc:
        report.failed = True
        report.error = str(exc)
        log.error("fold %d failed: %s", fold_index, exc)
    report.wall_time = time.perf_counter() - start
    return report, model


def _fold_job(args):
    graphs, split, config, repeat = args
    return train_fold(graphs, split.train_ids, split.test_ids, config, split.fold_index, repeat)


def run_cv(
    graphs: Sequence[Graph],
    config: TrainConfig,
    run_dir: str | Path | None = None,
    parallel_folds: int = 1,
) -> CVResult:
    """k-fold cross-validation, each fold from a fresh initialisation.

    The aggregate is the mean and sample standard deviation of the final-epoch
    test accuracies over all folds of all repeats.
    """
    # regression targets are continuous, so folds are only shuffled
    labels = [g.label for g in graphs] if config.task == "classification" else [0] * len(graphs)
    jobs = []
    for repeat in range(config.repeats):
        for split in stratified_kfold(labels, config.folds, config.seed + repeat):
            jobs.append((graphs, split, config, repeat))
    if parallel_folds > 1:
        with ProcessPoolExecutor(parallel_folds) as pool:
            results = list(pool.map(_fold_job, jobs))
    else:
        results = [_fold_job(job) for job in jobs]
    reports = [r for r, _ in results]
    accs = np.array([r.test_accuracy for r in reports if not r.failed])
    mean = float(accs.mean()) if len(accs) else float("nan")
    std = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
    result = CVResult(reports, mean, std, any(r.failed for r in reports), config)
    if run_dir is not None:
        write_run_dir(Path(run_dir), graphs, jobs, results, result)
    return result


def write_run_dir(run_dir: Path, graphs, jobs, results, result: CVResult) -> None:
    """Persist config.json, metrics.csv, final_report.json, checkpoints/ and masks/."""
    from .viz import export_snapshot

    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(asdict(result.config), indent=2, sort_keys=True))
    with open(run_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "fold", "loss", "train_acc", "test_acc", "lr", "repeat"])
        for report in result.folds:
            last = len(report.train_loss) - 1
            for epoch, (loss, acc, lr) in enumerate(zip(report.train_loss, report.train_accuracy, report.lrs)):
                test = report.test_accuracy if epoch == last else ""
                writer.writerow([epoch, report.fold_index, repr(loss), repr(acc), test, repr(lr), report.repeat])
    final = result.summary()
    final["folds"] = [
        {k: v for k, v in asdict(r).items() if k not in ("train_loss", "train_accuracy", "lrs")} for r in result.folds
    ]
    (run_dir / "final_report.json").write_text(json.dumps(final, indent=2))
    for (graphs_, split, config, repeat), (report, model) in zip(jobs, results):
        suffix = f"_r{repeat}" if config.repeats > 1 else ""
        save_checkpoint(model, run_dir / "checkpoints" / f"fold_{split.fold_index}{suffix}.ckpt",
                        extra={"fold": split.fold_index, "repeat": repeat, "test_ids": split.test_ids})
        if repeat == 0:
            for gid in split.test_ids[: config.mask_snapshots]:
                export_snapshot(model, graphs[gid], run_dir / "masks")


def sweep(graphs: Sequence[Graph], base: TrainConfig, grid: dict[str, Sequence], run_root=None) -> list[tuple[dict, CVResult]]:
    """Run cross-validation for every combination in ``grid``."""
    names = list(grid)
    results = []
    for values in itertools.product(*(grid[n] for n in names)):
        overrides = dict(zip(names, values))
        config = replace(base, **overrides)
        tag = "_".join(f"{k}{v}" for k, v in overrides.items())
        run_dir = None if run_root is None else Path(run_root) / tag
        results.append((overrides, run_cv(graphs, config, run_dir)))
    return results


# ---------------------------------------------------------------------------
# synthetic regression data


def triangle_count(graph: Graph) -> int:
    a = graph.adjacency.toarray()
    np.fill_diagonal(a, 0)
    return int(round(np.trace(a @ a @ a) / 6))


def synthetic_triangle_dataset(num_graphs: int, seed: int = 0, n_range=(6, 14), p: float = 0.3) -> list[Graph]:
    """Random graphs labelled with their triangle count divided by the dataset maximum."""
    from .graph import erdos_renyi, one_hot_degree_features

    rng = np.random.default_rng(seed)
    graphs = [erdos_renyi(int(rng.integers(n_range[0], n_range[1] + 1)), p, rng) for _ in range(num_graphs)]
    counts = np.array([triangle_count(g) for g in graphs], dtype=np.float64)
    scale = counts.max() if counts.max() > 0 else 1.0
    graphs = [replace(g, label=float(c / scale), id=i) for i, (g, c) in enumerate(zip(graphs, counts))]
    return one_hot_degree_features(graphs)
