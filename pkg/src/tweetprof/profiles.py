"""Tweet vectors, timeline profile vectors and their concatenation.

A tweet is the mean embedding of its tokens. A user's timeline profile pools
every token across all timeline tweets into one bag and averages that, so a
two-token tweet weighs twice as much as a one-token tweet; the profile is
therefore invariant to reordering tokens inside a tweet but not to moving
tokens between tweets. Users without a timeline get a zero profile, which
keeps tweets from low-history authors classifiable.
"""

from __future__ import annotations

from enum import Enum
from typing import Mapping

import numpy as np

from .corpus import Tweet, UserTimeline
from .text import Vocabulary, average_embedding, tokenize


class ProfileMode(str, Enum):
    BASELINE = "baseline"
    TIMELINE = "timeline"


def tweet_vector(tweet: Tweet, vocab: Vocabulary, emb: np.ndarray) -> np.ndarray:
    """Mean embedding of the tweet's tokens; zero vector for empty text."""
    return average_embedding(tokenize(tweet.text), vocab, emb)


def timeline_vector(
    timeline: UserTimeline | None, vocab: Vocabulary, emb: np.ndarray
) -> np.ndarray:
    """Mean embedding over the pooled tokens of all timeline tweets."""
    if timeline is None:
        return np.zeros(emb.shape[1], dtype=emb.dtype)
    pooled: list[str] = []
    for text in timeline.tweets:
        pooled.extend(tokenize(text))
    return average_embedding(pooled, vocab, emb)


def featurize(
    tweet: Tweet,
    timelines: Mapping[str, UserTimeline],
    mode: ProfileMode,
    vocab: Vocabulary,
    emb: np.ndarray,
) -> np.ndarray:
    """Feature vector for one tweet: length d in baseline mode, 2d with the
    timeline profile concatenated after the tweet vector."""
    tv = tweet_vector(tweet, vocab, emb)
    if mode == ProfileMode.BASELINE:
        return tv
    profile = timeline_vector(timelines.get(tweet.user_id), vocab, emb)
    return np.concatenate([tv, profile])


def feature_matrix(
    tweets,
    timelines: Mapping[str, UserTimeline],
    mode: ProfileMode,
    vocab: Vocabulary,
    emb: np.ndarray,
) -> np.ndarray:
    return np.stack([featurize(t, timelines, mode, vocab, emb) for t in tweets])


def feature_matrix_tsv(tweets, matrix: np.ndarray) -> str:
    """TSV export, one row per tweet with the tweet id in the first column."""
    lines = []
    for tweet, row in zip(tweets, matrix):
        lines.append(tweet.id + "\t" + "\t".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"
