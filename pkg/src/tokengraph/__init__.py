"""Few-shot short-text classification over per-sample token graphs.

Each sample is tokenized with lowercased WordPiece, turned into a graph
whose nodes are tokens (edges link tokens within n sequence positions,
features are per-token embeddings), and classified by a two-layer
single-head graph-attention network trained from scratch.
"""

from .embeddings import (
    EmbeddingShard,
    Manifest,
    ShardRecord,
    fallback_embed,
    read_manifest,
    read_shard,
    validate_consistency,
    write_manifest,
    write_shard,
)
from .errors import NonFiniteError, ShardFormatError, TokenGraphError, ValidationError
from .gnn_core import (
    AdamState,
    GATLayerParams,
    ModelParams,
    adam_step,
    backward,
    elu,
    gat_forward,
    grad_check,
    init_adam_state,
    init_params,
    load_model,
    mean_pool,
    model_forward,
    save_model,
    softmax_cross_entropy,
)
from .graph_builder import GraphBatch, TokenGraph, build_edges, build_graph, collate
from .metrics import WelchResult, accuracy, macro_f1, welch_t_test
from .tokenizer import TokenSequence, Vocab, basic_tokenize, load_vocab, tokenize, wordpiece
from .trainer import (
    FewShotSplit,
    RunReport,
    SeedRecord,
    TrainConfig,
    ablate,
    generate_synthetic,
    make_split,
    run_experiment,
    train_one,
)

__version__ = "0.1.0"
