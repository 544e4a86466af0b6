"""Tokenization, vocabulary construction and embedding handling.

The vocabulary must be built from training-fold texts only; lookups of
anything unseen fall back to the unknown token, so no operation here ever
fails on new text.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"
UNK_INDEX = 0
PAD_INDEX = 1

DEFAULT_EMBED_DIM = 200
OOV_INIT_RANGE = 0.25

# Scanned left to right on lowercased text; earlier alternatives win.
_TOKEN_RE = re.compile(
    r"""
    (?P<url>https?://\S+|www\.\S+)
    | (?P<mention>@\w+)
    | (?P<hashtag>\#\w+)
    | (?P<word>\w+)
    | (?P<punct>\S)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[str]:
    """Split a raw utterance into tokens.

    Rules: lowercase everything; @-mentions become the literal token
    ``<mention>`` and URLs become ``<url>``; hashtags are kept (lowercased,
    leading # preserved); any other punctuation character is a standalone
    token; whitespace only separates.
    """
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(text.lower()):
        kind = match.lastgroup
        if kind == "url":
            tokens.append("<url>")
        elif kind == "mention":
            tokens.append("<mention>")
        else:
            tokens.append(match.group())
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-to-index map with <unk> at 0 and <pad> at 1."""

    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def encode(self, tokens: list[str]) -> list[int]:
        """Token indices for a sequence; empty input maps to a single pad."""
        if not tokens:
            return [PAD_INDEX]
        return [self.index.get(t, UNK_INDEX) for t in tokens]

    def tokens_in_order(self) -> list[str]:
        ordered = sorted(self.index.items(), key=lambda kv: kv[1])
        return [token for token, _ in ordered]


def build_vocab(train_texts: list[str], min_count: int = 1) -> Vocabulary:
    """Vocabulary over tokens with training frequency >= min_count.

    Only the given texts are consulted (pass the training fold, never test
    data). Tokens are indexed by descending frequency, ties alphabetically,
    after the two specials.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for text in train_texts:
        counts.update(tokenize(text))
    kept = [t for t, c in counts.items() if c >= min_count and t not in (UNK_TOKEN, PAD_TOKEN)]
    kept.sort(key=lambda t: (-counts[t], t))
    index = {UNK_TOKEN: UNK_INDEX, PAD_TOKEN: PAD_INDEX}
    for offset, token in enumerate(kept):
        index[token] = 2 + offset
    return Vocabulary(index)


def init_embeddings(vocab: Vocabulary, dim: int = DEFAULT_EMBED_DIM, seed: int = 0) -> np.ndarray:
    """Seeded uniform [-0.25, 0.25] embedding matrix with a zero pad row."""
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-OOV_INIT_RANGE, OOV_INIT_RANGE, size=(len(vocab), dim))
    matrix[PAD_INDEX] = 0.0
    return matrix


def load_pretrained_embeddings(
    path: str | Path,
    vocab: Vocabulary,
    dim: int = DEFAULT_EMBED_DIM,
    seed: int = 0,
) -> np.ndarray:
    """Embedding matrix for ``vocab`` initialized from a pretrained file.

    The file holds one token per line followed by ``dim`` decimal numbers,
    single-space separated. Rows for tokens present in the file copy the file
    values; everything else (including the specials) keeps the seeded uniform
    [-0.25, 0.25] init, and the pad row stays zero.
    """
    matrix = init_embeddings(vocab, dim, seed)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise FormatError(
                    f"expected {dim} values for token {token!r}, got {len(values)}",
                    lineno,
                )
            row = vocab.index.get(token)
            if row is None or row == PAD_INDEX:
                continue
            try:
                matrix[row] = [float(v) for v in values]
            except ValueError:
                raise FormatError(f"non-numeric value for token {token!r}", lineno) from None
    return matrix


def average_embedding(tokens: list[str], vocab: Vocabulary, emb: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the tokens' embedding rows (order-independent).

    Unknown tokens use the <unk> row; an empty token list yields the zero
    vector.
    """
    if not tokens:
        return np.zeros(emb.shape[1], dtype=emb.dtype)
    rows = [vocab.lookup(t) for t in tokens]
    return emb[rows].mean(axis=0)
