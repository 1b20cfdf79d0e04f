"""Command-line entry point: tokenize, embed, train, evaluate, ablate,
and compare runs for significance.

Exit codes: 0 success, 1 validation error (bad arguments or inputs),
2 runtime failure (corrupt files, numerical aborts).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import datasets, trainer
from .embeddings import read_manifest, read_shard, validate_consistency, write_manifest, write_shard
from .errors import TokenGraphError, ValidationError
from .gnn_core import load_model
from .metrics import welch_t_test
from .tokenizer import load_vocab, tokenize


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract says 1
        raise _UsageError(message)


def _write_json(path, payload) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _require_file(path, what: str) -> None:
    if not os.path.isfile(path):
        raise ValidationError(f"{what} not found: {path}")


def cmd_tokenize(args) -> int:
    _require_file(args.data, "dataset")
    _require_file(args.vocab, "vocabulary")
    samples = datasets.load_dataset(args.data)
    if not samples:
        raise ValidationError(f"dataset {args.data} contains no samples")
    vocab = load_vocab(args.vocab)
    per_sample = []
    total = 0
    unk = 0
    for sample in samples:
        seq = tokenize(
            sample.text, vocab, add_special=args.add_special,
            max_len=args.max_len, sample_id=sample.sample_id,
        )
        n_unk = sum(1 for tid in seq.token_ids if tid == vocab.unk_id)
        per_sample.append({"id": sample.sample_id, "n_tokens": len(seq), "n_unk": n_unk})
        total += len(seq)
        unk += n_unk
    report = {
        "n_samples": len(samples),
        "total_tokens": total,
        "unk_tokens": unk,
        "vocabulary_coverage": 1.0 - unk / total,
        "add_special": args.add_special,
        "per_sample": per_sample,
    }
    _write_json(args.out, report)
    return 0


def cmd_embed_fallback(args) -> int:
    _require_file(args.data, "dataset")
    _require_file(args.vocab, "vocabulary")
    if args.dim < 1:
        raise ValidationError(f"--dim must be >= 1, got {args.dim}")
    samples = datasets.load_dataset(args.data)
    if not samples:
        raise ValidationError(f"dataset {args.data} contains no samples")
    vocab = load_vocab(args.vocab)
    shard, manifest = datasets.build_fallback_shard(
        samples, vocab, dim=args.dim, seed=args.seed, add_special=args.add_special
    )
    write_shard(shard, args.out_shard)
    write_manifest(manifest, args.out_manifest)
    return 0


def _load_inputs(shard_path, manifest_path):
    _require_file(shard_path, "shard")
    _require_file(manifest_path, "manifest")
    shard = read_shard(shard_path)
    manifest = read_manifest(manifest_path)
    validate_consistency(shard, manifest)
    return shard, manifest


def _load_config(path) -> trainer.TrainConfig:
    if path is None:
        return trainer.TrainConfig()
    _require_file(path, "config")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed config JSON: {exc}") from exc
    return trainer.TrainConfig.from_dict(data)


def cmd_train(args) -> int:
    shard, manifest = _load_inputs(args.shard, args.manifest)
    config = _load_config(args.config)
    report = trainer.run_experiment(shard, manifest, config)
    trainer.save_report(report, args.out_report)
    if args.out_model:
        trainer.export_model(report, args.out_model)
    return 0


def cmd_evaluate(args) -> int:
    _require_file(args.model, "model checkpoint")
    shard, manifest = _load_inputs(args.shard, args.manifest)
    _require_file(args.split, "split spec")
    with open(args.split, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.split}: malformed split JSON: {exc}") from exc
    for key in ("split_seed", "shots"):
        if key not in spec:
            raise ValidationError(f"{args.split}: split spec lacks {key!r}")
    subset = spec.get("subset", "test")
    if subset not in ("train", "val", "test"):
        raise ValidationError(f"{args.split}: subset must be train|val|test, got {subset!r}")
    n_hop = int(spec.get("n_hop", 1))
    params = load_model(args.model)
    if params.n_classes != len(manifest.label_names):
        raise ValidationError(
            f"model has {params.n_classes} classes but manifest lists "
            f"{len(manifest.label_names)} labels"
        )
    if params.in_dim != shard.dim:
        raise ValidationError(
            f"model expects dim {params.in_dim} but shard provides {shard.dim}"
        )
    split = trainer.make_split(manifest, shots=int(spec["shots"]), split_seed=int(spec["split_seed"]))
    ids = getattr(split, f"{subset}_ids")
    graphs = trainer.graphs_for_ids(shard, manifest, ids, n_hop)
    acc, f1, n = trainer.evaluate_graphs(graphs, params)
    _write_json("-", {"subset": subset, "n_samples": n, "accuracy": acc, "macro_f1": f1})
    return 0


def _parse_grid(raw: str) -> dict[str, tuple[int, ...]]:
    allowed = {"n_hop", "hidden_dim"}
    grid: dict[str, tuple[int, ...]] = {}
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValidationError(f"malformed grid component {part!r}, expected key=v1,v2")
        key, values = part.split("=", 1)
        key = key.strip()
        if key not in allowed:
            raise ValidationError(f"unknown grid key {key!r}, allowed: {sorted(allowed)}")
        try:
            grid[key] = tuple(int(v) for v in values.split(",") if v.strip())
        except ValueError as exc:
            raise ValidationError(f"non-integer value in grid {part!r}") from exc
        if not grid[key]:
            raise ValidationError(f"grid key {key!r} has no values")
    if not grid:
        raise ValidationError(f"empty ablation grid {raw!r}")
    return grid


def cmd_ablate(args) -> int:
    shard, manifest = _load_inputs(args.shard, args.manifest)
    config = _load_config(args.config)
    grid = _parse_grid(args.grid)
    reports = trainer.ablate(
        shard,
        manifest,
        config,
        n_hops=grid.get("n_hop", (config.n_hop,)),
        hidden_dims=grid.get("hidden_dim", (config.hidden_dim,)),
    )
    table = [
        {
            "n_hop": r.config["n_hop"],
            "hidden_dim": r.config["hidden_dim"],
            "mean_test_accuracy": r.mean_test_accuracy,
            "std_test_accuracy": r.std_test_accuracy,
            "mean_test_macro_f1": r.mean_test_macro_f1,
            "report": r.to_dict(),
        }
        for r in reports
    ]
    _write_json(args.out, {"cells": table})
    return 0


def cmd_significance(args) -> int:
    _require_file(args.report_a, "report A")
    _require_file(args.report_b, "report B")
    report_a = trainer.load_report(args.report_a)
    report_b = trainer.load_report(args.report_b)
    scores_a = [r.test_accuracy for r in report_a.records]
    scores_b = [r.test_accuracy for r in report_b.records]
    if len(scores_a) < 2 or len(scores_b) < 2:
        raise ValidationError("both reports need at least 2 per-seed records")
    result = welch_t_test(scores_a, scores_b, alpha=args.alpha, bonferroni_m=args.m)
    _write_json(
        "-",
        {
            "metric": "test_accuracy",
            "samples_a": scores_a,
            "samples_b": scores_b,
            "t": result.t,
            "df": result.df,
            "p": result.p,
            "alpha": args.alpha,
            "bonferroni_m": args.m,
            "significant": result.significant,
            "variance_floored": result.variance_floored,
        },
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tokengraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="tokenize a dataset and report token statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--add-special", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("embed-fallback", help="tokenize and write fallback-embedding shard")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--add-special", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out-shard", required=True)
    p.add_argument("--out-manifest", required=True)
    p.set_defaults(func=cmd_embed_fallback)

    p = sub.add_parser("train", help="run the few-shot training protocol")
    p.add_argument("--shard", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split subset")
    p.add_argument("--model", required=True)
    p.add_argument("--shard", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, help="JSON file with split_seed, shots, subset")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="grid over n_hop and hidden_dim")
    p.add_argument("--shard", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--grid", required=True, help='e.g. "n_hop=1,2,3;hidden_dim=64,128,256"')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("significance", help="Welch t-test between two run reports")
    p.add_argument("--report-a", required=True)
    p.add_argument("--report-b", required=True)
    p.add_argument("--m", type=int, default=1, help="Bonferroni correction factor")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_significance)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TokenGraphError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
