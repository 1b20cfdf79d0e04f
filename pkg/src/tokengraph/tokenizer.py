"""Lowercased WordPiece tokenization from a plain vocabulary file.

Covers English corpora: no accent stripping and no CJK character
splitting. Punctuation is every Unicode P* character plus the ASCII
symbols $+<=>^`|~, which matches uncased-BERT behaviour on English text.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .errors import ValidationError

UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
PAD_TOKEN = "[PAD]"

_ASCII_SYMBOL_PUNCT = frozenset("$+<=>^`|~")


@dataclass(frozen=True)
class Vocab:
    """Immutable token-string -> dense-id mapping with resolved specials.

    [UNK] must be present so tokenization is total; the other special
    tokens are optional and resolve to None when absent.
    """

    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]
    unk_id: int
    cls_id: int | None = None
    sep_id: int | None = None
    pad_id: int | None = None

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)


@dataclass(frozen=True)
class TokenSequence:
    """Ordered (token_id, surface) pairs for one sample."""

    sample_id: int
    tokens: tuple[tuple[int, str], ...] = field(default_factory=tuple)
    includes_special: bool = False

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def token_ids(self) -> list[int]:
        return [tid for tid, _ in self.tokens]

    @property
    def surfaces(self) -> list[str]:
        return [surface for _, surface in self.tokens]


def load_vocab(path) -> Vocab:
    """Load a vocab.txt-style file: one token per line, line index = id."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    token_to_id: dict[str, int] = {}
    tokens: list[str] = []
    for idx, line in enumerate(lines):
        token = line.rstrip("\r\n").strip()
        if not token:
            raise ValidationError(f"{path}: empty token at line {idx}")
        if token in token_to_id:
            raise ValidationError(f"{path}: duplicate token {token!r} at line {idx}")
        token_to_id[token] = idx
        tokens.append(token)
    if not tokens:
        raise ValidationError(f"{path}: vocabulary file is empty")
    if UNK_TOKEN not in token_to_id:
        raise ValidationError(f"{path}: vocabulary lacks required {UNK_TOKEN} token")
    return Vocab(
        token_to_id=token_to_id,
        id_to_token=tuple(tokens),
        unk_id=token_to_id[UNK_TOKEN],
        cls_id=token_to_id.get(CLS_TOKEN),
        sep_id=token_to_id.get(SEP_TOKEN),
        pad_id=token_to_id.get(PAD_TOKEN),
    )


def _is_punctuation(ch: str) -> bool:
    return ch in _ASCII_SYMBOL_PUNCT or unicodedata.category(ch).startswith("P")


def basic_tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation into own words."""
    words: list[str] = []
    for chunk in text.lower().split():
        buf: list[str] = []
        for ch in chunk:
            if _is_punctuation(ch):
                if buf:
                    words.append("".join(buf))
                    buf = []
                words.append(ch)
            else:
                buf.append(ch)
        if buf:
            words.append("".join(buf))
    return words


def wordpiece(word: str, vocab: Vocab, max_chars: int = 100) -> list[tuple[int, str]]:
    """Greedy longest-match-first decomposition of one lowercased word.

    Non-initial pieces carry the "##" prefix. Any unmatched position, or a
    word longer than max_chars, maps the whole word to [UNK].
    """
    if not word:
        raise ValidationError("wordpiece requires a non-empty word")
    if len(word) > max_chars:
        return [(vocab.unk_id, UNK_TOKEN)]
    pieces: list[tuple[int, str]] = []
    start = 0
    while start < len(word):
        end = len(word)
        match: str | None = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            if piece in vocab:
                match = piece
                break
            end -= 1
        if match is None:
            return [(vocab.unk_id, UNK_TOKEN)]
        pieces.append((vocab.token_to_id[match], match))
        start = end
    return pieces


def tokenize(
    text: str,
    vocab: Vocab,
    add_special: bool = True,
    max_len: int = 512,
    sample_id: int = 0,
) -> TokenSequence:
    """Tokenize one text sample into a TokenSequence.

    basic_tokenize then wordpiece per word; with add_special the result is
    wrapped in [CLS]/[SEP] and the piece list is truncated before [SEP] is
    appended so the total length never exceeds max_len.
    """
    if max_len < (2 if add_special else 1):
        raise ValidationError(f"max_len={max_len} leaves no room for tokens")
    pieces: list[tuple[int, str]] = []
    for word in basic_tokenize(text):
        pieces.extend(wordpiece(word, vocab))
    if add_special:
        if vocab.cls_id is None or vocab.sep_id is None:
            raise ValidationError("vocabulary lacks [CLS]/[SEP] but add_special=True")
        tokens = [(vocab.cls_id, CLS_TOKEN)]
        tokens.extend(pieces[: max_len - 2])
        tokens.append((vocab.sep_id, SEP_TOKEN))
        return TokenSequence(sample_id, tuple(tokens), includes_special=True)
    if not pieces:
        raise ValidationError(
            f"sample {sample_id}: empty token sequence (a graph needs at least one node)"
        )
    return TokenSequence(sample_id, tuple(pieces[:max_len]), includes_special=False)
