"""Compare the standalone WordPiece implementation against a checkpoint
tokenizer on sampled texts.

Divergences are expected for inputs exercising accent stripping or CJK
character splitting, which the standalone tokenizer deliberately omits;
on ASCII English text the two should almost always agree.
"""

from __future__ import annotations

from dataclasses import dataclass

from tokengraph.errors import ValidationError
from tokengraph.tokenizer import load_vocab, tokenize


@dataclass
class Divergence:
    text: str
    standalone: list[str]
    checkpoint: list[str]


@dataclass
class ParityReport:
    n_compared: int
    n_mismatched: int
    first_divergence: Divergence | None

    @property
    def mismatch_rate(self) -> float:
        return self.n_mismatched / self.n_compared if self.n_compared else 0.0

    def to_dict(self) -> dict:
        payload = {
            "n_compared": self.n_compared,
            "n_mismatched": self.n_mismatched,
            "mismatch_rate": self.mismatch_rate,
        }
        if self.first_divergence is not None:
            payload["first_divergence"] = {
                "text": self.first_divergence.text,
                "standalone": self.first_divergence.standalone,
                "checkpoint": self.first_divergence.checkpoint,
            }
        return payload


def _standalone_tokens(text: str, vocab) -> list[str]:
    try:
        return tokenize(text, vocab, add_special=False).surfaces
    except ValidationError:
        return []  # empty input tokenizes to nothing on both sides


def verify_tokenizer_parity(vocab_path, texts, checkpoint_tokenizer) -> ParityReport:
    """Tokenize each text both ways and report the mismatch rate."""
    vocab = load_vocab(vocab_path)
    n_mismatched = 0
    first: Divergence | None = None
    texts = list(texts)
    for text in texts:
        ours = _standalone_tokens(text, vocab)
        theirs = list(checkpoint_tokenizer.tokenize(text))
        if ours != theirs:
            n_mismatched += 1
            if first is None:
                first = Divergence(text=text, standalone=ours, checkpoint=theirs)
    return ParityReport(
        n_compared=len(texts), n_mismatched=n_mismatched, first_divergence=first
    )
