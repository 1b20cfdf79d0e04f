"""Writers for the tokengraph interchange files.

Implemented independently against the documented byte layout so this
side never shares serialization code with the consumer that reads it.

Shard, little-endian: magic "TGEB" | version u32 (=1) | record count u64;
per record: sample_id u64 | token_count u32 | dim u32 |
token_ids u32 x token_count | floats f32 x (token_count * dim) row-major.

Manifest: JSON-lines; header object with label_names plus provenance
keys, then {"id", "label", "n_tokens"} per sample.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ExtractionError

SHARD_MAGIC = b"TGEB"
SHARD_VERSION = 1


@dataclass
class Record:
    sample_id: int
    token_ids: np.ndarray  # (N,) uint32
    matrix: np.ndarray  # (N, dim) float32


def write_shard(records: list[Record], dim: int, path) -> None:
    if dim <= 0:
        raise ExtractionError(f"shard dim must be positive, got {dim}")
    with open(path, "wb") as fh:
        fh.write(SHARD_MAGIC)
        fh.write(struct.pack("<IQ", SHARD_VERSION, len(records)))
        for rec in records:
            ids = np.ascontiguousarray(rec.token_ids, dtype="<u4")
            mat = np.ascontiguousarray(rec.matrix, dtype="<f4")
            if mat.shape != (ids.shape[0], dim):
                raise ExtractionError(
                    f"sample {rec.sample_id}: matrix {mat.shape} does not match "
                    f"({ids.shape[0]}, {dim})"
                )
            if not np.isfinite(mat).all():
                raise ExtractionError(f"sample {rec.sample_id}: non-finite embeddings")
            fh.write(struct.pack("<QII", rec.sample_id, ids.shape[0], dim))
            fh.write(ids.tobytes())
            fh.write(mat.tobytes())


@dataclass
class ManifestData:
    entries: list[tuple[int, str, int]]  # (sample_id, label, n_tokens)
    label_names: list[str]
    meta: dict = field(default_factory=dict)


def write_manifest(manifest: ManifestData, path) -> None:
    header = {"label_names": list(manifest.label_names), **manifest.meta}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for sample_id, label, n_tokens in manifest.entries:
            fh.write(
                json.dumps(
                    {"id": sample_id, "label": label, "n_tokens": n_tokens},
                    sort_keys=True,
                )
                + "\n"
            )
