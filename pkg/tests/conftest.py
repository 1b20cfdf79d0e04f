import os

import numpy as np
import pytest

from tokengraph import datasets, load_vocab
from tokengraph.trainer import generate_synthetic

TOY_VOCAB_LINES = [
    "[PAD]",
    "[UNK]",
    "[CLS]",
    "[SEP]",
    "hello",
    ",",
    "world",
    "!",
    "un",
    "##aff",
    "##able",
    "a",
    "ab",
    "##b",
    "b",
    "the",
    "cat",
    "##s",
]


@pytest.fixture(scope="session")
def toy_vocab_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    path.write_text("\n".join(TOY_VOCAB_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def toy_vocab(toy_vocab_path):
    return load_vocab(toy_vocab_path)


@pytest.fixture(scope="session")
def synthetic_paths(tmp_path_factory):
    """Small synthetic corpus for fast trainer/CLI tests."""
    data_jsonl, vocab_txt = generate_synthetic(
        classes=2, per_class=60, vocab_size=300, markers_per_class=5,
        text_len=10, seed=11,
    )
    root = tmp_path_factory.mktemp("synthetic")
    data_path = root / "data.jsonl"
    vocab_path = root / "vocab.txt"
    data_path.write_text(data_jsonl, encoding="utf-8")
    vocab_path.write_text(vocab_txt, encoding="utf-8")
    return data_path, vocab_path


@pytest.fixture(scope="session")
def small_shard_manifest(synthetic_paths):
    """Low-dimensional shard over the small synthetic corpus."""
    data_path, vocab_path = synthetic_paths
    samples = datasets.load_dataset(data_path)
    vocab = load_vocab(vocab_path)
    return datasets.build_fallback_shard(samples, vocab, dim=64, seed=5)


def rng_for(test_seed: int) -> np.random.Generator:
    return np.random.default_rng(test_seed)
