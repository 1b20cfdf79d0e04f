"""Canonical dataset loading and the tokenize-then-embed pipeline step.

Datasets are UTF-8 JSON-lines, one object per sample with fields
id (integer), text (string), label (string).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingShard, Manifest, ShardRecord, fallback_embed
from .errors import ValidationError
from .tokenizer import Vocab, tokenize


@dataclass(frozen=True)
class Sample:
    sample_id: int
    text: str
    label: str


def load_dataset(path) -> list[Sample]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    samples: list[Sample] = []
    seen: set[int] = set()
    for lineno, line in enumerate(lines, start=1):
        try:
            row = json.loads(line)
            sample = Sample(int(row["id"]), str(row["text"]), str(row["label"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: malformed dataset row: {exc}") from exc
        if sample.sample_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate sample id {sample.sample_id}")
        seen.add(sample.sample_id)
        samples.append(sample)
    return samples


def label_names_of(samples: list[Sample]) -> list[str]:
    return sorted({s.label for s in samples})


def build_fallback_shard(
    samples: list[Sample],
    vocab: Vocab,
    dim: int,
    seed: int,
    add_special: bool = True,
    max_len: int = 512,
) -> tuple[EmbeddingShard, Manifest]:
    """Tokenize every sample and embed it with the deterministic fallback."""
    if not samples:
        raise ValidationError("cannot embed an empty dataset")
    records = []
    entries = []
    for sample in samples:
        seq = tokenize(
            sample.text, vocab, add_special=add_special, max_len=max_len,
            sample_id=sample.sample_id,
        )
        matrix = fallback_embed(seq, dim, seed)
        records.append(
            ShardRecord(
                sample_id=sample.sample_id,
                token_ids=np.asarray(seq.token_ids, dtype=np.uint32),
                matrix=matrix,
            )
        )
        entries.append((sample.sample_id, sample.label, len(seq)))
    shard = EmbeddingShard(dim=dim, records=records)
    shard.validate()
    manifest = Manifest(entries=entries, label_names=label_names_of(samples))
    manifest.validate()
    return shard, manifest
