"""Two-layer single-head graph-attention classifier with analytic gradients.

Forward pass per layer: z_i = W x_i, attention logit for a (center i,
neighbor j) pair is LeakyReLU(a_src.z_i + a_dst.z_j, slope 0.2) over
j in N(i) plus a self-loop, normalized with a max-subtracted softmax,
then h_i = sum_j alpha_ij z_j + bias. Layers: 768 -> 128 -> 128 with ELU
after layer 1 only, mean pooling per graph, linear output. All internal
arithmetic is float64; backpropagation is exact and verified against
central finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, ShardFormatError, ValidationError
from .graph_builder import GraphBatch

LEAKY_SLOPE = 0.2
MODEL_MAGIC = b"TGMP"
MODEL_VERSION = 1


@dataclass
class GATLayerParams:
    W: np.ndarray  # (out_dim, in_dim)
    a_src: np.ndarray  # (out_dim,)
    a_dst: np.ndarray  # (out_dim,)
    bias: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return int(self.W.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.W.shape[0])


@dataclass
class ModelParams:
    layer1: GATLayerParams
    layer2: GATLayerParams
    out_W: np.ndarray  # (C, hidden)
    out_b: np.ndarray  # (C,)

    @property
    def in_dim(self) -> int:
        return self.layer1.in_dim

    @property
    def hidden_dim(self) -> int:
        return self.layer1.out_dim

    @property
    def n_classes(self) -> int:
        return int(self.out_W.shape[0])

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameter tensors in the fixed serialization/update order."""
        out = []
        for prefix, layer in (("layer1", self.layer1), ("layer2", self.layer2)):
            out.extend(
                (f"{prefix}.{name}", getattr(layer, name))
                for name in ("W", "a_src", "a_dst", "bias")
            )
        out.append(("out_W", self.out_W))
        out.append(("out_b", self.out_b))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            layer1=GATLayerParams(
                self.layer1.W.copy(),
                self.layer1.a_src.copy(),
                self.layer1.a_dst.copy(),
                self.layer1.bias.copy(),
            ),
            layer2=GATLayerParams(
                self.layer2.W.copy(),
                self.layer2.a_src.copy(),
                self.layer2.a_dst.copy(),
                self.layer2.bias.copy(),
            ),
            out_W=self.out_W.copy(),
            out_b=self.out_b.copy(),
        )

    def get(self, name: str) -> np.ndarray:
        for key, arr in self.arrays():
            if key == name:
                return arr
        raise KeyError(name)


def init_params(
    in_dim: int, hidden_dim: int, n_classes: int, seed: int | np.random.Generator
) -> ModelParams:
    """Glorot-uniform weights and attention vectors, zero biases."""
    rng = np.random.default_rng(seed)

    def glorot(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    def gat_layer(d_in, d_out):
        W = glorot((d_out, d_in), d_in, d_out)
        # attention vector acts like a Linear(2*out_dim -> 1)
        a_src = glorot(d_out, 2 * d_out, 1)
        a_dst = glorot(d_out, 2 * d_out, 1)
        return GATLayerParams(W, a_src, a_dst, np.zeros(d_out))

    layer1 = gat_layer(in_dim, hidden_dim)
    layer2 = gat_layer(hidden_dim, hidden_dim)
    out_W = glorot((n_classes, hidden_dim), hidden_dim, n_classes)
    return ModelParams(layer1, layer2, out_W, np.zeros(n_classes))


def zeros_like_params(params: ModelParams) -> ModelParams:
    return ModelParams(
        layer1=GATLayerParams(
            np.zeros_like(params.layer1.W),
            np.zeros_like(params.layer1.a_src),
            np.zeros_like(params.layer1.a_dst),
            np.zeros_like(params.layer1.bias),
        ),
        layer2=GATLayerParams(
            np.zeros_like(params.layer2.W),
            np.zeros_like(params.layer2.a_src),
            np.zeros_like(params.layer2.a_dst),
            np.zeros_like(params.layer2.bias),
        ),
        out_W=np.zeros_like(params.out_W),
        out_b=np.zeros_like(params.out_b),
    )


@dataclass
class GATCache:
    X: np.ndarray
    z: np.ndarray
    centers: np.ndarray
    neighbors: np.ndarray
    pair_logits: np.ndarray  # pre-LeakyReLU attention inputs
    alpha: np.ndarray


@dataclass
class ForwardCache:
    """Everything the exact backward pass needs, keyed to one batch."""

    n_nodes: int
    membership: np.ndarray
    counts: np.ndarray
    layer1: GATCache
    h1_pre: np.ndarray  # layer-1 output before ELU
    h1_act: np.ndarray
    layer2: GATCache
    h2: np.ndarray
    pooled: np.ndarray


def _attention_pairs(edges: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    loop = np.arange(n_nodes, dtype=np.int64)
    if edges.size == 0:
        return loop, loop
    return (
        np.concatenate((edges[:, 0], loop)),
        np.concatenate((edges[:, 1], loop)),
    )


def gat_forward(
    X: np.ndarray, edges: np.ndarray, params: GATLayerParams
) -> tuple[np.ndarray, GATCache]:
    """One attention layer over a (possibly batched) node set."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.in_dim:
        raise ValidationError(
            f"feature matrix {X.shape} does not match layer input dim {params.in_dim}"
        )
    if not np.isfinite(X).all():
        raise NonFiniteError("non-finite node features in attention layer input")
    n = X.shape[0]
    z = X @ params.W.T
    centers, neighbors = _attention_pairs(edges, n)
    src_scores = z @ params.a_src
    dst_scores = z @ params.a_dst
    pair_logits = src_scores[centers] + dst_scores[neighbors]
    e = np.where(pair_logits > 0, pair_logits, LEAKY_SLOPE * pair_logits)
    # max-subtracted segment softmax, grouped by center node
    seg_max = np.full(n, -np.inf)
    np.maximum.at(seg_max, centers, e)
    exp_e = np.exp(e - seg_max[centers])
    denom = np.zeros(n)
    np.add.at(denom, centers, exp_e)
    alpha = exp_e / denom[centers]
    H = np.zeros_like(z)
    np.add.at(H, centers, alpha[:, None] * z[neighbors])
    H += params.bias
    return H, GATCache(X, z, centers, neighbors, pair_logits, alpha)


def _attention_softmax_grad(
    alpha: np.ndarray, dalpha: np.ndarray, centers: np.ndarray, n_nodes: int
) -> np.ndarray:
    """Backward through the per-center softmax that produced alpha."""
    weighted = np.zeros(n_nodes)
    np.add.at(weighted, centers, alpha * dalpha)
    return alpha * (dalpha - weighted[centers])


def gat_backward(
    cache: GATCache, dH: np.ndarray, params: GATLayerParams
) -> tuple[GATLayerParams, np.ndarray]:
    """Gradients of one attention layer; returns (param grads, dX)."""
    n = cache.X.shape[0]
    centers, neighbors = cache.centers, cache.neighbors
    z, alpha = cache.z, cache.alpha

    dbias = dH.sum(axis=0)
    # aggregation H_i = sum_p alpha_p z_{nbr(p)}
    dalpha = np.einsum("pf,pf->p", dH[centers], z[neighbors])
    dz = np.zeros_like(z)
    np.add.at(dz, neighbors, alpha[:, None] * dH[centers])

    de = _attention_softmax_grad(alpha, dalpha, centers, n)
    dlogits = de * np.where(cache.pair_logits > 0, 1.0, LEAKY_SLOPE)
    dsrc = np.zeros(n)
    np.add.at(dsrc, centers, dlogits)
    ddst = np.zeros(n)
    np.add.at(ddst, neighbors, dlogits)

    da_src = z.T @ dsrc
    da_dst = z.T @ ddst
    dz += np.outer(dsrc, params.a_src) + np.outer(ddst, params.a_dst)

    dW = dz.T @ cache.X
    dX = dz @ params.W
    return GATLayerParams(dW, da_src, da_dst, dbias), dX


def elu(x: np.ndarray) -> np.ndarray:
    """y = x for x > 0, e^x - 1 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, np.expm1(x))


def _elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def mean_pool(H: np.ndarray, membership: np.ndarray, n_graphs: int | None = None) -> np.ndarray:
    """Arithmetic mean of node rows per graph."""
    if n_graphs is None:
        n_graphs = int(membership.max()) + 1 if membership.size else 0
    counts = np.bincount(membership, minlength=n_graphs).astype(np.float64)
    if (counts == 0).any():
        raise ValidationError("membership contains an empty graph")
    pooled = np.zeros((n_graphs, H.shape[1]))
    np.add.at(pooled, membership, H)
    return pooled / counts[:, None]


def model_forward(
    batch: GraphBatch, params: ModelParams
) -> tuple[np.ndarray, ForwardCache]:
    """Logits for every graph in the batch, plus the backward cache."""
    h1_pre, c1 = gat_forward(batch.features, batch.edges, params.layer1)
    h1_act = elu(h1_pre)
    h2, c2 = gat_forward(h1_act, batch.edges, params.layer2)
    counts = np.bincount(batch.membership, minlength=batch.num_graphs).astype(np.float64)
    pooled = mean_pool(h2, batch.membership, batch.num_graphs)
    logits = pooled @ params.out_W.T + params.out_b
    cache = ForwardCache(
        n_nodes=batch.num_nodes,
        membership=batch.membership,
        counts=counts,
        layer1=c1,
        h1_pre=h1_pre,
        h1_act=h1_act,
        layer2=c2,
        h2=h2,
        pooled=pooled,
    )
    return logits, cache


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood with log-sum-exp stabilization."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValidationError(f"labels shape {labels.shape} does not match {n} graphs")
    if ((labels < 0) | (labels >= c)).any():
        raise ValidationError(f"label out of range [0, {c})")
    shift = logits - logits.max(axis=1, keepdims=True)
    log_probs = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return float(loss), dlogits


def backward(cache: ForwardCache, dlogits: np.ndarray, params: ModelParams) -> ModelParams:
    """Exact gradients of the loss w.r.t. every parameter."""
    if dlogits.shape[0] != cache.pooled.shape[0]:
        raise ValidationError("dlogits does not match the cached batch")
    dout_W = dlogits.T @ cache.pooled
    dout_b = dlogits.sum(axis=0)
    dpooled = dlogits @ params.out_W
    dh2 = dpooled[cache.membership] / cache.counts[cache.membership][:, None]
    g2, dh1_act = gat_backward(cache.layer2, dh2, params.layer2)
    dh1 = dh1_act * _elu_grad(cache.h1_pre)
    g1, _ = gat_backward(cache.layer1, dh1, params.layer1)
    return ModelParams(layer1=g1, layer2=g2, out_W=dout_W, out_b=dout_b)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam_state(params: ModelParams) -> AdamState:
    return AdamState(
        m={name: np.zeros_like(arr) for name, arr in params.arrays()},
        v={name: np.zeros_like(arr) for name, arr in params.arrays()},
        t=0,
    )


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """Standard bias-corrected Adam update; functional, inputs untouched."""
    grad_map = dict(grads.arrays())
    for name, g in grad_map.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in {name}")
    t = state.t + 1
    new_params = params.copy()
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in new_params.arrays():
        g = grad_map[name]
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def batch_loss(batch: GraphBatch, params: ModelParams) -> float:
    logits, _ = model_forward(batch, params)
    loss, _ = softmax_cross_entropy(logits, batch.labels)
    return loss


def _kink_signature(cache: ForwardCache) -> tuple[np.ndarray, ...]:
    """Sign pattern at the piecewise-linear points of the forward pass."""
    return (
        cache.layer1.pair_logits > 0,
        cache.h1_pre > 0,
        cache.layer2.pair_logits > 0,
    )


def grad_check(
    batch: GraphBatch,
    params: ModelParams,
    step: float = 1e-5,
    coords_per_param: int = 4,
    seed: int = 0,
) -> float:
    """Max relative error of analytic gradients vs central differences.

    Samples coords_per_param coordinates per parameter tensor. Two kinds
    of coordinate are excluded as incomparable: those whose +/-step
    evaluations land on different sides of a LeakyReLU/ELU kink, and
    those where both the analytic and the numeric value sit below the
    float64 cancellation noise of the central difference (a structurally
    zero gradient cannot be measured at this step size; a wrong gradient
    still registers because one side stays far above the floor).
    """
    logits, cache = model_forward(batch, params)
    _, dlogits = softmax_cross_entropy(logits, batch.labels)
    grads = dict(backward(cache, dlogits, params).arrays())

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, arr in params.arrays():
        size = arr.size
        n_coords = min(coords_per_param, size)
        flat_idx = rng.choice(size, size=n_coords, replace=False)
        for idx in flat_idx:
            probe = params.copy()
            target = probe.get(name).reshape(-1)
            target[idx] += step
            logits_p, cache_p = model_forward(batch, probe)
            loss_p, _ = softmax_cross_entropy(logits_p, batch.labels)
            target[idx] -= 2.0 * step
            logits_m, cache_m = model_forward(batch, probe)
            loss_m, _ = softmax_cross_entropy(logits_m, batch.labels)
            sig_p, sig_m = _kink_signature(cache_p), _kink_signature(cache_m)
            if any((a != b).any() for a, b in zip(sig_p, sig_m)):
                continue  # crossed a kink; central difference invalid here
            numeric = (loss_p - loss_m) / (2.0 * step)
            analytic = grads[name].reshape(-1)[idx]
            noise = (
                64.0 * np.finfo(np.float64).eps
                * max(abs(loss_p), abs(loss_m), 1.0) / (2.0 * step)
            )
            if abs(numeric) <= noise and abs(analytic) <= noise:
                continue  # both below finite-difference measurement precision
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_model(params: ModelParams, path) -> None:
    """Checkpoint: magic TGMP | version u32 | d,hidden,C u32 | f64 blocks."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(
            struct.pack(
                "<IIII",
                MODEL_VERSION,
                params.in_dim,
                params.hidden_dim,
                params.n_classes,
            )
        )
        for _, arr in params.arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> ModelParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != MODEL_MAGIC:
        raise ShardFormatError(f"not a model checkpoint: bad magic in {path}")
    version, in_dim, hidden, n_classes = struct.unpack("<IIII", data[4:20])
    if version != MODEL_VERSION:
        raise ShardFormatError(f"unsupported checkpoint version {version}")
    shapes = [
        (hidden, in_dim),
        (hidden,),
        (hidden,),
        (hidden,),
        (hidden, hidden),
        (hidden,),
        (hidden,),
        (hidden,),
        (n_classes, hidden),
        (n_classes,),
    ]
    arrays = []
    offset = 20
    for shape in shapes:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(data):
            raise ShardFormatError("model checkpoint truncated")
        arrays.append(
            np.frombuffer(data[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(data):
        raise ShardFormatError("trailing bytes after final checkpoint block")
    return ModelParams(
        layer1=GATLayerParams(*arrays[0:4]),
        layer2=GATLayerParams(*arrays[4:8]),
        out_W=arrays[8],
        out_b=arrays[9],
    )
