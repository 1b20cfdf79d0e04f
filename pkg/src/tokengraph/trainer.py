"""Few-shot training protocol: fixed 20-per-class splits, batch-8 shuffled
epochs, best-validation model selection, repeated seeds, and the
n-hop / hidden-dimension ablation grid.

One experiment fixes a single split (from split_seed) and repeats
training across train_seeds; only initialization and shuffling vary
between repeats.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .embeddings import EmbeddingShard, Manifest
from .errors import NonFiniteError, ValidationError
from .gnn_core import (
    ModelParams,
    adam_step,
    backward,
    init_adam_state,
    init_params,
    model_forward,
    save_model,
    softmax_cross_entropy,
)
from .graph_builder import TokenGraph, collate, graph_from_ids
from .metrics import accuracy, macro_f1

EVAL_BATCH = 64
THREADS_ENV = "TOKENGRAPH_THREADS"


@dataclass(frozen=True)
class FewShotSplit:
    train_ids: tuple[int, ...]
    val_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    shots: int
    split_seed: int


@dataclass(frozen=True)
class TrainConfig:
    n_hop: int = 1
    hidden_dim: int = 128
    lr: float = 0.00005
    epochs: int = 200
    batch_size: int = 8
    add_special: bool = True
    train_seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    strict_determinism: bool = True
    shots: int = 20
    split_seed: int = 0

    def validate(self) -> None:
        if self.n_hop < 1:
            raise ValidationError(f"n_hop must be >= 1, got {self.n_hop}")
        if self.hidden_dim < 1:
            raise ValidationError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.shots < 1:
            raise ValidationError(f"shots must be >= 1, got {self.shots}")
        if not self.train_seeds:
            raise ValidationError("train_seeds must contain at least one seed")

    def to_dict(self) -> dict:
        return {
            "n_hop": self.n_hop,
            "hidden_dim": self.hidden_dim,
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "add_special": self.add_special,
            "train_seeds": list(self.train_seeds),
            "strict_determinism": self.strict_determinism,
            "shots": self.shots,
            "split_seed": self.split_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "train_seeds" in kwargs:
            kwargs["train_seeds"] = tuple(int(s) for s in kwargs["train_seeds"])
        config = cls(**kwargs)
        config.validate()
        return config


@dataclass
class SeedRecord:
    seed: int
    best_epoch: int
    val_accuracy: float
    test_accuracy: float
    test_macro_f1: float
    epoch_mean_loss: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "val_accuracy": self.val_accuracy,
            "test_accuracy": self.test_accuracy,
            "test_macro_f1": self.test_macro_f1,
            "epoch_mean_loss": self.epoch_mean_loss,
        }


@dataclass
class RunReport:
    config: dict
    split_seed: int
    label_names: list[str]
    records: list[SeedRecord]
    mean_test_accuracy: float
    std_test_accuracy: float
    mean_test_macro_f1: float
    std_test_macro_f1: float
    exported_seed: int
    exported_params: ModelParams | None = None  # kept in memory, not serialized

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "split_seed": self.split_seed,
            "label_names": self.label_names,
            "records": [r.to_dict() for r in self.records],
            "mean_test_accuracy": self.mean_test_accuracy,
            "std_test_accuracy": self.std_test_accuracy,
            "mean_test_macro_f1": self.mean_test_macro_f1,
            "std_test_macro_f1": self.std_test_macro_f1,
            "exported_seed": self.exported_seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        records = [
            SeedRecord(
                seed=int(r["seed"]),
                best_epoch=int(r["best_epoch"]),
                val_accuracy=float(r["val_accuracy"]),
                test_accuracy=float(r["test_accuracy"]),
                test_macro_f1=float(r["test_macro_f1"]),
                epoch_mean_loss=[float(x) for x in r.get("epoch_mean_loss", [])],
            )
            for r in data["records"]
        ]
        return cls(
            config=dict(data["config"]),
            split_seed=int(data["split_seed"]),
            label_names=list(data["label_names"]),
            records=records,
            mean_test_accuracy=float(data["mean_test_accuracy"]),
            std_test_accuracy=float(data["std_test_accuracy"]),
            mean_test_macro_f1=float(data["mean_test_macro_f1"]),
            std_test_macro_f1=float(data["std_test_macro_f1"]),
            exported_seed=int(data["exported_seed"]),
        )


def make_split(manifest: Manifest, shots: int = 20, split_seed: int = 0) -> FewShotSplit:
    """Seeded per-class shuffle: first `shots` train, next `shots` val, rest test."""
    by_label: dict[str, list[int]] = {name: [] for name in manifest.label_names}
    for sample_id, label, _ in manifest.entries:
        by_label[label].append(sample_id)
    rng = np.random.default_rng(split_seed)
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for name in manifest.label_names:
        ids = sorted(by_label[name])
        if len(ids) < 2 * shots:
            raise ValidationError(
                f"class {name!r} has {len(ids)} samples, needs at least {2 * shots} "
                f"for {shots}-shot train and validation"
            )
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        train.extend(shuffled[:shots])
        val.extend(shuffled[shots : 2 * shots])
        test.extend(shuffled[2 * shots :])
    return FewShotSplit(
        train_ids=tuple(train),
        val_ids=tuple(val),
        test_ids=tuple(test),
        shots=shots,
        split_seed=split_seed,
    )


def graphs_for_ids(
    shard: EmbeddingShard,
    manifest: Manifest,
    ids,
    n_hop: int,
) -> list[TokenGraph]:
    records = shard.by_sample()
    label_of = {sid: manifest.label_index(label) for sid, label, _ in manifest.entries}
    graphs = []
    for sample_id in ids:
        rec = records.get(sample_id)
        if rec is None:
            raise ValidationError(f"split references sample {sample_id} missing from shard")
        graphs.append(
            graph_from_ids(
                sample_id,
                rec.token_ids,
                rec.matrix,
                n_hop=n_hop,
                label=label_of[sample_id],
            )
        )
    return graphs


def _predict(graphs: list[TokenGraph], params: ModelParams) -> list[int]:
    preds: list[int] = []
    for start in range(0, len(graphs), EVAL_BATCH):
        batch = collate(graphs[start : start + EVAL_BATCH])
        logits, _ = model_forward(batch, params)
        preds.extend(int(i) for i in logits.argmax(axis=1))
    return preds


def evaluate_graphs(graphs: list[TokenGraph], params: ModelParams) -> tuple[float, float, int]:
    golds = [g.label for g in graphs]
    preds = _predict(graphs, params)
    n_classes = params.n_classes
    return accuracy(preds, golds), macro_f1(preds, golds, n_classes), len(golds)


def train_one(
    shard: EmbeddingShard,
    manifest: Manifest,
    split: FewShotSplit,
    config: TrainConfig,
    seed: int,
) -> tuple[ModelParams, SeedRecord]:
    """Train for config.epochs, retaining the best-validation parameters.

    Ties in validation accuracy go to the earliest epoch. With epochs=0 the
    initial parameters are retained and evaluated as-is.
    """
    config.validate()
    train_graphs = graphs_for_ids(shard, manifest, split.train_ids, config.n_hop)
    val_graphs = graphs_for_ids(shard, manifest, split.val_ids, config.n_hop)
    test_graphs = graphs_for_ids(shard, manifest, split.test_ids, config.n_hop)
    n_classes = len(manifest.label_names)

    rng = np.random.default_rng(seed)
    params = init_params(shard.dim, config.hidden_dim, n_classes, rng)
    state = init_adam_state(params)

    best_params = params.copy()
    best_val = -1.0
    best_epoch = 0
    epoch_mean_loss: list[float] = []

    n_train = len(train_graphs)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        loss_sum = 0.0
        for start in range(0, n_train, config.batch_size):
            chunk = [train_graphs[i] for i in order[start : start + config.batch_size]]
            batch = collate(chunk)
            logits, cache = model_forward(batch, params)
            loss, dlogits = softmax_cross_entropy(logits, batch.labels)
            if not np.isfinite(loss):
                raise NonFiniteError(
                    f"non-finite loss at epoch {epoch}, batch starting at {start}"
                )
            grads = backward(cache, dlogits, params)
            params, state = adam_step(params, grads, state, lr=config.lr)
            loss_sum += loss * len(chunk)
        epoch_mean_loss.append(loss_sum / n_train)
        val_acc, _, _ = evaluate_graphs(val_graphs, params)
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_params = params.copy()

    if config.epochs == 0:
        best_val, _, _ = evaluate_graphs(val_graphs, best_params)

    test_acc, test_f1, _ = evaluate_graphs(test_graphs, best_params)
    record = SeedRecord(
        seed=seed,
        best_epoch=best_epoch,
        val_accuracy=best_val,
        test_accuracy=test_acc,
        test_macro_f1=test_f1,
        epoch_mean_loss=epoch_mean_loss,
    )
    return best_params, record


def _worker_count(config: TrainConfig) -> int:
    if config.strict_determinism:
        return 1
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV}={raw!r} is not an integer") from exc
    return max(1, workers)


def run_experiment(
    shard: EmbeddingShard,
    manifest: Manifest,
    config: TrainConfig,
) -> RunReport:
    """One fixed split, one training run per seed, aggregated metrics."""
    config.validate()
    split = make_split(manifest, shots=config.shots, split_seed=config.split_seed)

    workers = _worker_count(config)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda seed: train_one(shard, manifest, split, config, seed),
                    config.train_seeds,
                )
            )
    else:
        results = [
            train_one(shard, manifest, split, config, seed)
            for seed in config.train_seeds
        ]

    records = [record for _, record in results]
    accs = np.array([r.test_accuracy for r in records])
    f1s = np.array([r.test_macro_f1 for r in records])
    # exported model: best validation accuracy, ties to the first seed listed
    exported_idx = max(
        range(len(records)), key=lambda i: (records[i].val_accuracy, -i)
    )
    return RunReport(
        config=config.to_dict(),
        split_seed=config.split_seed,
        label_names=list(manifest.label_names),
        records=records,
        mean_test_accuracy=float(np.mean(accs)),
        std_test_accuracy=float(np.std(accs)),
        mean_test_macro_f1=float(np.mean(f1s)),
        std_test_macro_f1=float(np.std(f1s)),
        exported_seed=records[exported_idx].seed,
        exported_params=results[exported_idx][0],
    )


def ablate(
    shard: EmbeddingShard,
    manifest: Manifest,
    base_config: TrainConfig,
    n_hops: tuple[int, ...] = (1, 2, 3),
    hidden_dims: tuple[int, ...] = (64, 128, 256),
) -> list[RunReport]:
    """Cartesian grid over n_hop and hidden_dim, ranked by mean test accuracy."""
    if not n_hops or not hidden_dims:
        raise ValidationError("ablation grid must not be empty")
    reports = []
    for n_hop in n_hops:
        for hidden_dim in hidden_dims:
            cell = replace(base_config, n_hop=n_hop, hidden_dim=hidden_dim)
            reports.append(run_experiment(shard, manifest, cell))
    reports.sort(key=lambda r: -r.mean_test_accuracy)
    return reports


def generate_synthetic(
    classes: int = 2,
    per_class: int = 200,
    vocab_size: int = 1000,
    markers_per_class: int = 5,
    text_len: int = 12,
    seed: int = 0,
) -> tuple[str, str]:
    """Separable synthetic dataset: filler words plus class-marker words.

    Returns (dataset JSON-lines, vocabulary file text). Every sample holds
    text_len filler words and 1..markers_per_class markers drawn from its
    own class's disjoint marker set; deterministic in seed.
    """
    if classes < 2:
        raise ValidationError(f"need at least 2 classes, got {classes}")
    if per_class < 1 or text_len < 1 or markers_per_class < 1:
        raise ValidationError("per_class, text_len, markers_per_class must be >= 1")
    n_markers = classes * markers_per_class
    if vocab_size <= n_markers:
        raise ValidationError(
            f"vocab_size={vocab_size} must exceed classes*markers_per_class={n_markers}"
        )
    words = [f"w{i:05d}" for i in range(vocab_size)]
    vocab_lines = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", *words]
    rng = np.random.default_rng(seed)
    filler_pool = np.arange(n_markers, vocab_size)
    dataset_lines = []
    sample_id = 0
    for cls in range(classes):
        marker_pool = np.arange(cls * markers_per_class, (cls + 1) * markers_per_class)
        for _ in range(per_class):
            k = int(rng.integers(1, markers_per_class + 1))
            chosen = list(rng.choice(filler_pool, size=text_len)) + list(
                rng.choice(marker_pool, size=k)
            )
            order = rng.permutation(len(chosen))
            text = " ".join(words[chosen[i]] for i in order)
            dataset_lines.append(
                json.dumps(
                    {"id": sample_id, "label": f"class{cls}", "text": text},
                    sort_keys=True,
                )
            )
            sample_id += 1
    return "\n".join(dataset_lines) + "\n", "\n".join(vocab_lines) + "\n"


def save_report(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())


def load_report(path) -> RunReport:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed report JSON: {exc}") from exc
    try:
        return RunReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: not a run report: {exc}") from exc


def export_model(report: RunReport, path) -> None:
    if report.exported_params is None:
        raise ValidationError("report carries no trained parameters to export")
    save_model(report.exported_params, path)
