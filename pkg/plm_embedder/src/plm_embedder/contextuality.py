"""Check that extracted embeddings are genuinely contextual: the same
vocabulary token appearing in two different samples should get different
vectors almost always.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExtractionError
from .shard_io import Record


@dataclass
class ContextualityReport:
    n_pairs: int
    n_distinct: int  # pairs whose cosine similarity is below 1 - 1e-6

    @property
    def distinct_rate(self) -> float:
        return self.n_distinct / self.n_pairs if self.n_pairs else 0.0

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "n_distinct": self.n_distinct,
            "distinct_rate": self.distinct_rate,
        }


def contextuality_check(
    records: list[Record], min_pairs: int = 100, seed: int = 0
) -> ContextualityReport:
    """Sample cross-sample occurrences of the same token id, compare rows.

    A pair counts as distinct when cosine similarity < 1 - 1e-6. Static
    (non-contextual) embeddings score a distinct rate of 0.
    """
    occurrences: dict[int, list[np.ndarray]] = {}
    for rec in records:
        seen_here: set[int] = set()
        for pos, token_id in enumerate(rec.token_ids.tolist()):
            if token_id in seen_here:
                continue  # one occurrence per sample keeps pairs cross-context
            seen_here.add(token_id)
            occurrences.setdefault(token_id, []).append(
                rec.matrix[pos].astype(np.float64)
            )
    candidates = [vecs for vecs in occurrences.values() if len(vecs) >= 2]
    rng = np.random.default_rng(seed)
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    for vecs in candidates:
        for i in range(len(vecs) - 1):
            pairs.append((vecs[i], vecs[i + 1]))
    if len(pairs) < min_pairs:
        raise ExtractionError(
            f"only {len(pairs)} cross-context token pairs available, "
            f"need at least {min_pairs}"
        )
    if len(pairs) > min_pairs:
        idx = rng.choice(len(pairs), size=min_pairs, replace=False)
        pairs = [pairs[i] for i in idx]
    n_distinct = 0
    for a, b in pairs:
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        cosine = float(a @ b / denom) if denom > 0 else 1.0
        if cosine < 1.0 - 1e-6:
            n_distinct += 1
    return ContextualityReport(n_pairs=len(pairs), n_distinct=n_distinct)
