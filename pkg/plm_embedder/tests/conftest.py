import json

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

WORDS = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "cat", "dog", "sat", "ran", "on", "mat", "hill", "and",
    "hello", "world", "big", "small", "red", "blue", "bird", "fish",
    "house", "tree", "sun", "moon", "fast", "slow", "old", "new",
    "un", "##aff", "##able", "##s", "##ing", ",", ".", "!", "cafe",
]

TEXTS = [
    "the cat sat on the mat",
    "a dog ran on the hill",
    "the big red cat and the small blue bird",
    "hello world , the sun is not in vocab",
    "a fast fish and a slow bird",
    "the old house and the new tree",
    "unaffable cats sitting",
    "the moon , the sun and the hill .",
]


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    """Random-weight BERT saved locally so tests never touch the network."""
    root = tmp_path_factory.mktemp("tiny-bert")
    vocab = {w: i for i, w in enumerate(WORDS)}
    tokenizer = BertTokenizer(vocab=vocab, do_lower_case=True)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(WORDS),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return root


@pytest.fixture(scope="session")
def vocab_txt(tmp_path_factory):
    """The same vocabulary as a plain one-token-per-line file."""
    path = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    path.write_text("\n".join(WORDS) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def dataset_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "data.jsonl"
    rows = [
        {"id": i, "text": text, "label": "even" if i % 2 == 0 else "odd"}
        for i, text in enumerate(TEXTS)
    ]
    path.write_text(
        "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n",
        encoding="utf-8",
    )
    return path
