"""Per-sample token graphs: nodes are tokens, edges link sequence neighbours.

Stored edges are symmetric, self-loop free, and local: every directed
pair (u, v) satisfies 1 <= |u - v| <= n_hop. Self-loops are added later
inside the attention layer, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tokenizer import TokenSequence


@dataclass
class TokenGraph:
    """One sample as a graph: node token ids, features, directed edge pairs."""

    sample_id: int
    node_token_ids: np.ndarray  # (N,) int64
    features: np.ndarray  # (N, d) float64
    edges: np.ndarray  # (E, 2) int64 directed pairs, symmetric
    label: int | None = None

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


@dataclass
class GraphBatch:
    """Several graphs packed into one node set for a single forward pass."""

    graphs: list[TokenGraph]
    features: np.ndarray  # (total_nodes, d)
    edges: np.ndarray  # (total_edges, 2) re-indexed with per-graph offsets
    membership: np.ndarray  # (total_nodes,) node index -> graph index
    labels: np.ndarray  # (G,) int64, -1 where a graph has no label

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])


def build_edges(seq_len: int, n_hop: int) -> np.ndarray:
    """All directed pairs (u, v) with u != v and |u - v| <= n_hop.

    Directed count is 2 * sum_{k=1..n_hop} max(0, seq_len - k).
    """
    if seq_len < 1:
        raise ValidationError(f"seq_len must be >= 1, got {seq_len}")
    if n_hop < 1:
        raise ValidationError(f"n_hop must be >= 1, got {n_hop}")
    sources = []
    targets = []
    for k in range(1, n_hop + 1):
        if seq_len - k <= 0:
            break
        u = np.arange(seq_len - k, dtype=np.int64)
        sources.extend((u, u + k))
        targets.extend((u + k, u))
    if not sources:
        return np.empty((0, 2), dtype=np.int64)
    return np.stack(
        (np.concatenate(sources), np.concatenate(targets)), axis=1
    )


def build_graph(
    seq: TokenSequence,
    feats: np.ndarray,
    n_hop: int = 1,
    label: int | None = None,
) -> TokenGraph:
    """Build the token graph for one sample from its sequence and features."""
    return graph_from_ids(seq.sample_id, seq.token_ids, feats, n_hop=n_hop, label=label)


def graph_from_ids(
    sample_id: int,
    token_ids,
    feats: np.ndarray,
    n_hop: int = 1,
    label: int | None = None,
) -> TokenGraph:
    node_ids = np.asarray(token_ids, dtype=np.int64)
    features = np.asarray(feats, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != node_ids.shape[0]:
        raise ValidationError(
            f"sample {sample_id}: feature rows {features.shape} do not match "
            f"{node_ids.shape[0]} tokens"
        )
    return TokenGraph(
        sample_id=sample_id,
        node_token_ids=node_ids,
        features=features,
        edges=build_edges(node_ids.shape[0], n_hop),
        label=label,
    )


def collate(graphs: list[TokenGraph]) -> GraphBatch:
    """Concatenate graphs into one batch; edges re-indexed, membership emitted."""
    if not graphs:
        raise ValidationError("cannot collate an empty list of graphs")
    dim = graphs[0].dim
    for g in graphs:
        if g.dim != dim:
            raise ValidationError(
                f"mixed feature dims in batch: {dim} vs {g.dim} (sample {g.sample_id})"
            )
    offsets = np.cumsum([0] + [g.num_nodes for g in graphs[:-1]])
    features = np.concatenate([g.features for g in graphs], axis=0)
    edges = np.concatenate(
        [g.edges + off for g, off in zip(graphs, offsets)], axis=0
    )
    membership = np.concatenate(
        [np.full(g.num_nodes, i, dtype=np.int64) for i, g in enumerate(graphs)]
    )
    labels = np.array(
        [-1 if g.label is None else g.label for g in graphs], dtype=np.int64
    )
    return GraphBatch(
        graphs=list(graphs),
        features=features,
        edges=edges,
        membership=membership,
        labels=labels,
    )
