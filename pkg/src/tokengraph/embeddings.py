"""Precomputed token-embedding storage and a deterministic fallback embedder.

Shard files decouple embedding extraction from training. Layout, all
little-endian:

    magic "TGEB" | version u32 (=1) | record count u64
    per record: sample_id u64 | token_count u32 | dim u32
                | token_ids u32 x token_count
                | floats f32 x (token_count * dim), row-major

The manifest is JSON-lines: a header object carrying label_names (plus
optional provenance keys), then one object per sample with fields
id, label, n_tokens.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ShardFormatError, ValidationError
from .tokenizer import TokenSequence

SHARD_MAGIC = b"TGEB"
SHARD_VERSION = 1


@dataclass
class ShardRecord:
    sample_id: int
    token_ids: np.ndarray  # (N,) uint32
    matrix: np.ndarray  # (N, dim) float32


@dataclass
class EmbeddingShard:
    """Ordered per-sample embedding matrices, all with the same width."""

    dim: int
    records: list[ShardRecord] = field(default_factory=list)

    def validate(self) -> None:
        # The file layout stores dim per record, so an empty shard carries no
        # width; reading one yields dim=0, which must stay writable.
        if self.dim < 0 or (self.records and self.dim <= 0):
            raise ValidationError(f"shard dim must be positive, got {self.dim}")
        seen: set[int] = set()
        for rec in self.records:
            if rec.sample_id in seen:
                raise ValidationError(f"duplicate sample_id {rec.sample_id} in shard")
            seen.add(rec.sample_id)
            n = len(rec.token_ids)
            if rec.matrix.shape != (n, self.dim):
                raise ValidationError(
                    f"sample {rec.sample_id}: matrix shape {rec.matrix.shape} "
                    f"does not match ({n}, {self.dim})"
                )
            if not np.isfinite(rec.matrix).all():
                raise ValidationError(
                    f"sample {rec.sample_id}: non-finite embedding values"
                )

    def by_sample(self) -> dict[int, ShardRecord]:
        return {rec.sample_id: rec for rec in self.records}


@dataclass
class Manifest:
    """Sample ids, label strings, and token counts for one dataset."""

    entries: list[tuple[int, str, int]]  # (sample_id, label, token_count)
    label_names: list[str]
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        known = set(self.label_names)
        seen: set[int] = set()
        for sample_id, label, n_tokens in self.entries:
            if sample_id in seen:
                raise ValidationError(f"duplicate sample_id {sample_id} in manifest")
            seen.add(sample_id)
            if label not in known:
                raise ValidationError(
                    f"sample {sample_id}: label {label!r} not in label_names"
                )
            if n_tokens < 1:
                raise ValidationError(f"sample {sample_id}: n_tokens must be >= 1")

    def label_index(self, label: str) -> int:
        return self.label_names.index(label)


def write_shard(shard: EmbeddingShard, path) -> None:
    """Write a shard file; byte-identical output for identical inputs."""
    shard.validate()
    with open(path, "wb") as fh:
        fh.write(SHARD_MAGIC)
        fh.write(struct.pack("<IQ", SHARD_VERSION, len(shard.records)))
        for rec in shard.records:
            token_ids = np.ascontiguousarray(rec.token_ids, dtype="<u4")
            matrix = np.ascontiguousarray(rec.matrix, dtype="<f4")
            fh.write(struct.pack("<QII", rec.sample_id, len(token_ids), shard.dim))
            fh.write(token_ids.tobytes())
            fh.write(matrix.tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ShardFormatError(f"shard truncated while reading {what}")
    return data


def read_shard(path) -> EmbeddingShard:
    """Read a shard file; exact inverse of write_shard at bit level."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != SHARD_MAGIC:
            raise ShardFormatError(f"bad shard magic {magic!r}, expected {SHARD_MAGIC!r}")
        version, count = struct.unpack("<IQ", _read_exact(fh, 12, "header"))
        if version != SHARD_VERSION:
            raise ShardFormatError(f"unsupported shard version {version}")
        records: list[ShardRecord] = []
        dim: int | None = None
        for _ in range(count):
            sample_id, n_tokens, rec_dim = struct.unpack(
                "<QII", _read_exact(fh, 16, "record header")
            )
            if dim is None:
                dim = rec_dim
            elif rec_dim != dim:
                raise ShardFormatError(
                    f"sample {sample_id}: dim {rec_dim} differs from shard dim {dim}"
                )
            ids = np.frombuffer(
                _read_exact(fh, 4 * n_tokens, "token ids"), dtype="<u4"
            )
            floats = np.frombuffer(
                _read_exact(fh, 4 * n_tokens * rec_dim, "embedding matrix"),
                dtype="<f4",
            ).reshape(n_tokens, rec_dim)
            records.append(ShardRecord(sample_id, ids.copy(), floats.copy()))
        if fh.read(1):
            raise ShardFormatError("trailing bytes after final shard record")
    shard = EmbeddingShard(dim=dim if dim is not None else 0, records=records)
    shard.validate()
    return shard


def write_manifest(manifest: Manifest, path) -> None:
    manifest.validate()
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


def read_manifest(path) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        rows = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed manifest JSON: {exc}") from exc
    if "label_names" not in header:
        raise ValidationError(f"{path}: manifest header lacks label_names")
    label_names = list(header["label_names"])
    meta = {k: v for k, v in header.items() if k != "label_names"}
    entries = []
    for row in rows:
        try:
            entries.append((int(row["id"]), str(row["label"]), int(row["n_tokens"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed manifest row {row!r}") from exc
    manifest = Manifest(entries=entries, label_names=label_names, meta=meta)
    manifest.validate()
    return manifest


def validate_consistency(shard: EmbeddingShard, manifest: Manifest) -> None:
    """Reject shard/manifest pairs whose ids or token counts disagree."""
    records = shard.by_sample()
    for sample_id, _, n_tokens in manifest.entries:
        rec = records.get(sample_id)
        if rec is None:
            raise ValidationError(f"sample {sample_id} in manifest but not in shard")
        if len(rec.token_ids) != n_tokens:
            raise ValidationError(
                f"sample {sample_id}: manifest says {n_tokens} tokens, "
                f"shard has {len(rec.token_ids)}"
            )
    if len(manifest.entries) != len(shard.records):
        raise ValidationError(
            f"manifest has {len(manifest.entries)} samples, shard has "
            f"{len(shard.records)}"
        )


_MASK64 = (1 << 64) - 1
_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64_stream(init_state: int, count: int) -> np.ndarray:
    """First `count` outputs of the SplitMix64 sequence seeded at init_state."""
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(init_state & _MASK64) + steps * _SM64_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _SM64_MIX1
        z = (z ^ (z >> np.uint64(27))) * _SM64_MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def _token_unit_vector(seed: int, token_id: int, dim: int) -> np.ndarray:
    """Deterministic unit vector for one token id.

    SplitMix64 stream seeded with (seed XOR token_id) feeds Box-Muller
    pairs in fixed order; intermediates are 64-bit, storage is 32-bit.
    """
    n_pairs = (dim + 1) // 2
    raw = _splitmix64_stream((seed ^ token_id) & _MASK64, 2 * n_pairs)
    # u in (0, 1]: top 53 bits, shifted into the unit interval
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * u2
    vec = np.empty(2 * n_pairs, dtype=np.float64)
    vec[0::2] = radius * np.cos(angle)
    vec[1::2] = radius * np.sin(angle)
    vec = vec[:dim]
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def fallback_embed(seq: TokenSequence, dim: int, seed: int) -> np.ndarray:
    """Static per-token-id embeddings so the pipeline runs without a PLM.

    Row i depends only on (seed, token_id_i, dim): identical token ids get
    identical rows, so these are position-independent, not contextual.
    """
    if dim < 1:
        raise ValidationError(f"embedding dim must be >= 1, got {dim}")
    cache: dict[int, np.ndarray] = {}
    rows = np.empty((len(seq), dim), dtype=np.float32)
    for i, token_id in enumerate(seq.token_ids):
        vec = cache.get(token_id)
        if vec is None:
            vec = _token_unit_vector(seed, token_id, dim)
            cache[token_id] = vec
        rows[i] = vec
    return rows
