"""Run a BERT-style checkpoint over a dataset and write shard + manifest.

Each sample is tokenized with the checkpoint's own tokenizer, pushed
through one forward pass, and the final hidden layer's token vectors are
stored as 32-bit floats. Records are written ordered by sample id with
single-threaded inference by default, so identical jobs produce
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .errors import ExtractionError
from .shard_io import ManifestData, Record, write_manifest, write_shard


@dataclass(frozen=True)
class DatasetSample:
    sample_id: int
    text: str
    label: str


def load_dataset(path) -> list[DatasetSample]:
    """Canonical JSON-lines: one object per line with id, text, label."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    samples = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        try:
            row = json.loads(line)
            sample = DatasetSample(int(row["id"]), str(row["text"]), str(row["label"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ExtractionError(f"{path}:{lineno}: malformed dataset row: {exc}") from exc
        if sample.sample_id in seen:
            raise ExtractionError(f"{path}:{lineno}: duplicate id {sample.sample_id}")
        seen.add(sample.sample_id)
        samples.append(sample)
    if not samples:
        raise ExtractionError(f"{path}: dataset is empty")
    return samples


@dataclass
class ExtractionJob:
    model_id: str
    dataset_path: str | Path
    out_shard: str | Path
    out_manifest: str | Path
    max_len: int = 512
    include_special: bool = True
    batch_size: int = 8
    threads: int = 1
    expect_dim: int | None = None  # e.g. 768 to insist on BERT-base width


@dataclass
class ExtractionResult:
    n_samples: int
    dim: int
    truncated: int
    mean_l2: float
    model_id: str


@dataclass
class InMemoryExtraction:
    records: list[Record]
    manifest: ManifestData
    result: ExtractionResult
    _row_norm_sum: float = field(default=0.0, repr=False)


def _chunks(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def run_model_over_dataset(job: ExtractionJob) -> InMemoryExtraction:
    """Tokenize + embed every sample; does not touch the filesystem outputs."""
    if job.max_len < 2:
        raise ExtractionError(f"max_len must be >= 2, got {job.max_len}")
    if job.batch_size < 1:
        raise ExtractionError(f"batch_size must be >= 1, got {job.batch_size}")
    samples = sorted(load_dataset(job.dataset_path), key=lambda s: s.sample_id)

    tokenizer = AutoTokenizer.from_pretrained(job.model_id)
    model = AutoModel.from_pretrained(job.model_id)
    model.eval()
    hidden = int(model.config.hidden_size)
    if job.expect_dim is not None and hidden != job.expect_dim:
        raise ExtractionError(
            f"checkpoint {job.model_id} has hidden width {hidden}, "
            f"job expects {job.expect_dim}"
        )
    torch.set_num_threads(max(1, job.threads))

    records: list[Record] = []
    entries: list[tuple[int, str, int]] = []
    truncated = 0
    norm_sum = 0.0
    n_rows = 0
    with torch.no_grad():
        for batch in _chunks(samples, job.batch_size):
            enc = tokenizer(
                [s.text for s in batch],
                truncation=True,
                max_length=job.max_len,
                padding=True,
                return_tensors="pt",
            )
            full_lens = [
                len(tokenizer(s.text, truncation=False)["input_ids"]) for s in batch
            ]
            out = model(
                input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
            )
            hidden_states = out.last_hidden_state.to(torch.float64)
            for i, sample in enumerate(batch):
                n_tokens = int(enc["attention_mask"][i].sum())
                if full_lens[i] > n_tokens:
                    truncated += 1
                ids = enc["input_ids"][i, :n_tokens].numpy()
                vectors = hidden_states[i, :n_tokens].numpy()
                if not job.include_special:
                    ids = ids[1:-1]
                    vectors = vectors[1:-1]
                if ids.shape[0] == 0:
                    raise ExtractionError(
                        f"sample {sample.sample_id}: no tokens left after "
                        f"stripping special tokens"
                    )
                norm_sum += float(np.linalg.norm(vectors, axis=1).sum())
                n_rows += ids.shape[0]
                records.append(
                    Record(
                        sample_id=sample.sample_id,
                        token_ids=ids.astype(np.uint32),
                        matrix=vectors.astype(np.float32),
                    )
                )
                entries.append((sample.sample_id, sample.label, ids.shape[0]))

    result = ExtractionResult(
        n_samples=len(samples),
        dim=hidden,
        truncated=truncated,
        mean_l2=norm_sum / n_rows,
        model_id=job.model_id,
    )
    manifest = ManifestData(
        entries=entries,
        label_names=sorted({s.label for s in samples}),
        meta={
            "model": job.model_id,
            "include_special": job.include_special,
            "max_len": job.max_len,
            "truncated": truncated,
            "mean_l2": result.mean_l2,
        },
    )
    return InMemoryExtraction(records=records, manifest=manifest, result=result)


def extract(job: ExtractionJob) -> ExtractionResult:
    """End-to-end: embed the dataset and write shard + manifest files."""
    extraction = run_model_over_dataset(job)
    write_shard(extraction.records, extraction.result.dim, job.out_shard)
    write_manifest(extraction.manifest, job.out_manifest)
    return extraction.result
