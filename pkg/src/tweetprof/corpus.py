"""Data model, JSONL ingestion, dataset fusion and the synthetic corpus.

Datasets are immutable once built: loaders and generators return fresh
objects and never mutate their inputs, so a Dataset can be shared freely
across threads.

File formats (one JSON object per line, UTF-8):
  tweets:    {"id": str, "user_id": str, "text": str, "label": str}
  timelines: {"user_id": str, "tweets": [str, ...]}   # most-recent-first
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, IntegrityError, ParseError, SchemaError
from .rng import Xoshiro256StarStar

TIMELINE_CAP = 20
FUSE_DEFAULT_CAP = 250

# Base-dataset class names treated as the non-hate side when collapsing to
# the fused binary scheme; everything else counts as hate.
NON_HATE_CLASS_NAMES = ("neither", "none", "non-hate", "normal")


@dataclass(frozen=True)
class LabelScheme:
    """Named, ordered set of class names; class index = position."""

    name: str
    classes: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ConfigError(f"scheme {self.name!r} needs at least 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigError(f"scheme {self.name!r} has duplicate class names")

    def index_of(self, class_name: str) -> int:
        try:
            return self.classes.index(class_name)
        except ValueError:
            raise SchemaError(
                f"unknown label {class_name!r} for scheme {self.name!r}"
            ) from None

    @property
    def n_classes(self) -> int:
        return len(self.classes)


WASEEM_BINARY = LabelScheme("waseem-binary", ("none", "sexism"))
DAVIDSON_TERNARY = LabelScheme("davidson-ternary", ("hate", "offensive", "neither"))
FUSED_BINARY = LabelScheme("fused-binary", ("non-hate", "hate"))
SYNTHETIC_BINARY = LabelScheme("synthetic-binary", ("non-hate", "hate"))

SCHEMES = {
    s.name: s
    for s in (WASEEM_BINARY, DAVIDSON_TERNARY, FUSED_BINARY, SYNTHETIC_BINARY)
}


@dataclass(frozen=True)
class Tweet:
    id: str
    user_id: str
    text: str
    label: int


@dataclass(frozen=True)
class UserTimeline:
    """Up to TIMELINE_CAP historical tweet texts, most recent first."""

    user_id: str
    tweets: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tweets)


@dataclass(frozen=True)
class Dataset:
    scheme: LabelScheme
    tweets: tuple[Tweet, ...]
    timelines: Mapping[str, UserTimeline] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.tweets)

    def user_ids(self) -> list[str]:
        """Distinct author ids in first-appearance order."""
        seen: dict[str, None] = {}
        for t in self.tweets:
            seen.setdefault(t.user_id, None)
        return list(seen)


def _iter_jsonl(path: str | Path):
    """Yield (line_number, parsed object) for non-blank lines of a JSONL file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("record is not a JSON object", lineno)
            yield lineno, obj


def _require_str(obj: dict, key: str, lineno: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ParseError(f"missing or non-string field {key!r}", lineno)
    return value


def load_dataset(path: str | Path, scheme: LabelScheme) -> Dataset:
    """Read a tweet JSONL file into a Dataset under ``scheme``.

    Raises ParseError (bad line), SchemaError (unknown label name) or
    IntegrityError (duplicate tweet id), each naming the offending input.
    """
    tweets: list[Tweet] = []
    seen_ids: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        tweet_id = _require_str(obj, "id", lineno)
        user_id = _require_str(obj, "user_id", lineno)
        text = _require_str(obj, "text", lineno)
        label_name = _require_str(obj, "label", lineno)
        label = scheme.index_of(label_name)
        if tweet_id in seen_ids:
            raise IntegrityError(f"duplicate tweet id {tweet_id!r} at line {lineno}")
        seen_ids.add(tweet_id)
        tweets.append(Tweet(tweet_id, user_id, text, label))
    return Dataset(scheme=scheme, tweets=tuple(tweets))


def load_timelines(path: str | Path) -> dict[str, UserTimeline]:
    """Read a timeline JSONL file; each timeline is truncated to the 20 most
    recent entries (the head of the stored list)."""
    timelines: dict[str, UserTimeline] = {}
    for lineno, obj in _iter_jsonl(path):
        user_id = _require_str(obj, "user_id", lineno)
        raw = obj.get("tweets")
        if not isinstance(raw, list) or any(not isinstance(t, str) for t in raw):
            raise ParseError("field 'tweets' must be an array of strings", lineno)
        timelines[user_id] = UserTimeline(user_id, tuple(raw[:TIMELINE_CAP]))
    return timelines


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write tweets back out in the ingestion JSONL format."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in dataset.tweets:
            record = {
                "id": t.id,
                "user_id": t.user_id,
                "text": t.text,
                "label": dataset.scheme.classes[t.label],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_timelines(timelines: Mapping[str, UserTimeline], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user_id in timelines:
            tl = timelines[user_id]
            fh.write(
                json.dumps(
                    {"user_id": user_id, "tweets": list(tl.tweets)},
                    ensure_ascii=False,
                )
                + "\n"
            )


def fuse_datasets(
    base: Dataset,
    donor: Dataset,
    hate_class: str,
    cap: int = FUSE_DEFAULT_CAP,
    non_hate_names: Iterable[str] = NON_HATE_CLASS_NAMES,
) -> Dataset:
    """Collapse ``base`` to binary hate vs non-hate and add the donor's
    hate-labeled tweets, keeping at most ``cap`` tweets per (user, class).

    Base classes whose name appears in ``non_hate_names`` map to non-hate;
    every other base class maps to hate. Only donor tweets labeled exactly
    ``hate_class`` are taken. Retention under the cap keeps the first ``cap``
    tweets in input order (base first, then donor), which makes the fusion
    deterministic.
    """
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    donor_hate_index = donor.scheme.index_of(hate_class)
    non_hate = set(non_hate_names)

    hate_idx = FUSED_BINARY.index_of("hate")
    non_hate_idx = FUSED_BINARY.index_of("non-hate")

    candidates: list[Tweet] = []
    for t in base.tweets:
        name = base.scheme.classes[t.label]
        label = non_hate_idx if name in non_hate else hate_idx
        candidates.append(Tweet(t.id, t.user_id, t.text, label))
    for t in donor.tweets:
        if t.label == donor_hate_index:
            candidates.append(Tweet(t.id, t.user_id, t.text, hate_idx))

    kept: list[Tweet] = []
    seen_ids: set[str] = set()
    per_user_class: dict[tuple[str, int], int] = {}
    for t in candidates:
        if t.id in seen_ids:
            raise IntegrityError(f"duplicate tweet id {t.id!r} across fused inputs")
        seen_ids.add(t.id)
        key = (t.user_id, t.label)
        count = per_user_class.get(key, 0)
        if count >= cap:
            continue
        per_user_class[key] = count + 1
        kept.append(t)

    timelines = dict(base.timelines)
    for user_id, tl in donor.timelines.items():
        timelines.setdefault(user_id, tl)
    return Dataset(scheme=FUSED_BINARY, tweets=tuple(kept), timelines=timelines)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic corpus.

    ``activity_exponent`` shapes the power-law of tweets per user;
    ``top_hater_share`` is the fraction of hate tweets authored by the single
    most prolific hater; ``signal_strength`` is the probability that each
    timeline tweet of a hater contains hate-marker tokens.
    """

    n_users: int = 150
    n_tweets: int = 2000
    hate_class_fraction: float = 0.3
    hater_fraction: float = 0.2
    top_hater_share: float = 0.3
    activity_exponent: float = 1.1
    signal_strength: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError("n_users must be >= 1")
        if self.n_tweets < self.n_users:
            raise ConfigError("n_tweets must be >= n_users")
        for name in ("hate_class_fraction", "hater_fraction", "top_hater_share",
                     "signal_strength"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.activity_exponent <= 0:
            raise ConfigError("activity_exponent must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.hate_class_fraction > 0 and self.hater_fraction == 0:
            raise ConfigError(
                "hate_class_fraction > 0 requires hater_fraction > 0"
            )


# Text assembly constants for the generator. Hate tweets are explicit
# (hate-marker tokens) half the time and implicit (ambiguous tokens only)
# otherwise; ambiguous tokens also show up in a slice of ordinary tweets, so
# tweet text alone cannot fully resolve the label.
N_FILLER_TOKENS = 200
N_AMBIGUOUS_TOKENS = 30
EXPLICIT_HATE_FRACTION = 0.5
AMBIGUOUS_NOISE_RATE = 0.2
# A hater's ordinary output scales with their hate output, so every hater
# hates at about this rate; their history is then actually predictive of
# their behavior instead of contradicting it.
HATER_HATE_RATE = 0.7
# Most users have a nearly full timeline, the rest spread over 0-15; this
# mirrors the subgroup counts observed on the real datasets.
FULL_TIMELINE_RATE = 0.8

_FILLER = [f"w{i:03d}" for i in range(N_FILLER_TOKENS)]
_AMBIGUOUS = [f"amb{i:02d}" for i in range(N_AMBIGUOUS_TOKENS)]


def hate_lexicon() -> list[str]:
    """Hate-marker tokens shipped with the package (synthetic placeholders,
    deliberately not real slurs)."""
    data = resources.files("tweetprof").joinpath("data/hate_lexicon.txt")
    tokens = [line.strip() for line in data.read_text("utf-8").splitlines()]
    return [t for t in tokens if t and not t.startswith("#")]


def _sample_power_law_owner(rng: Xoshiro256StarStar, cdf: list[float]) -> int:
    u = rng.random()
    lo, hi = 0, len(cdf) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _filler_text(rng: Xoshiro256StarStar, lo: int = 4, hi: int = 10) -> list[str]:
    n = rng.randint(lo, hi)
    return [rng.choice(_FILLER) for _ in range(n)]


def _with_tokens(
    rng: Xoshiro256StarStar, pool: list[str], lo: int = 4, hi: int = 10, inserts: tuple[int, int] = (1, 3)
) -> list[str]:
    words = _filler_text(rng, lo, hi)
    for _ in range(rng.randint(*inserts)):
        words.insert(rng.randbelow(len(words) + 1), rng.choice(pool))
    return words


def synth_corpus(config: SynthConfig) -> Dataset:
    """Generate a labeled binary corpus plus a timeline for every user.

    The construction is a pure function of ``config``: every random draw goes
    through the seeded xoshiro256** stream, so identical configs give
    bit-identical corpora. Hate tweets are authored only by haters, with the
    designated top hater receiving ``top_hater_share`` of them; remaining
    activity follows rank^(-activity_exponent).
    """
    rng = Xoshiro256StarStar(config.seed)
    markers = hate_lexicon()

    users = [f"u{i:04d}" for i in range(config.n_users)]
    hater_order = list(range(config.n_users))
    rng.shuffle(hater_order)

    n_hate = round(config.hate_class_fraction * config.n_tweets)
    n_haters = 0
    if config.hater_fraction > 0:
        n_haters = max(1, round(config.hater_fraction * config.n_users))
    hater_pool = hater_order[:n_haters]
    top_hater = hater_pool[0] if hater_pool else None

    # Hate tweet authorship: the top hater takes its share, the rest spread
    # uniformly over the remaining haters (or also the top one if alone).
    hate_count = [0] * config.n_users
    if n_hate > 0:
        n_top = round(config.top_hater_share * n_hate)
        hate_count[top_hater] += n_top
        others = hater_pool[1:] or hater_pool
        for _ in range(n_hate - n_top):
            hate_count[rng.choice(others)] += 1
    hate_authors: list[int] = []
    for idx in range(config.n_users):
        hate_authors.extend([idx] * hate_count[idx])

    # Ordinary tweets: haters first get a quota that keeps their personal
    # hate rate near HATER_HATE_RATE (a prolific hater is a prolific user);
    # the rest follows a power law over the remaining users.
    n_normal = config.n_tweets - n_hate
    quota = [round(c * (1.0 - HATER_HATE_RATE) / HATER_HATE_RATE) for c in hate_count]
    total_quota = sum(quota)
    if total_quota > n_normal:
        scale = n_normal / total_quota
        quota = [int(q * scale) for q in quota]
        total_quota = sum(quota)
    normal_authors: list[int] = []
    for idx in range(config.n_users):
        normal_authors.extend([idx] * quota[idx])

    pool = [idx for idx in range(config.n_users) if hate_count[idx] == 0]
    if not pool:
        pool = list(range(config.n_users))
    rng.shuffle(pool)
    weights = [(r + 1) ** (-config.activity_exponent) for r in range(len(pool))]
    total_w = sum(weights)
    cdf: list[float] = []
    acc = 0.0
    for w in weights:
        acc += w / total_w
        cdf.append(acc)
    cdf[-1] = 1.0
    for _ in range(n_normal - total_quota):
        normal_authors.append(pool[_sample_power_law_owner(rng, cdf)])

    tweets: list[Tweet] = []
    hate_idx = SYNTHETIC_BINARY.index_of("hate")
    non_hate_idx = SYNTHETIC_BINARY.index_of("non-hate")
    tweet_no = 0

    for author in hate_authors:
        if rng.random() < EXPLICIT_HATE_FRACTION:
            words = _with_tokens(rng, markers)
        else:
            words = _with_tokens(rng, _AMBIGUOUS)
        tweets.append(
            Tweet(f"t{tweet_no:06d}", users[author], " ".join(words), hate_idx)
        )
        tweet_no += 1
    for author in normal_authors:
        if rng.random() < AMBIGUOUS_NOISE_RATE:
            words = _with_tokens(rng, _AMBIGUOUS)
        else:
            words = _filler_text(rng)
        tweets.append(
            Tweet(f"t{tweet_no:06d}", users[author], " ".join(words), non_hate_idx)
        )
        tweet_no += 1

    # Interleave hate and normal tweets deterministically so input order does
    # not encode the label.
    rng.shuffle(tweets)
    tweets = [
        Tweet(f"t{i:06d}", t.user_id, t.text, t.label)
        for i, t in enumerate(tweets)
    ]

    # Timeline tweets are longer than body tweets so that, absent a hate
    # signal, every user's pooled profile concentrates near the global filler
    # mean instead of acting as a memorizable per-user fingerprint. A hater,
    # for timeline purposes, is a user who actually authors hate tweets.
    hater_set = {idx for idx in range(config.n_users) if hate_count[idx] > 0}
    timelines: dict[str, UserTimeline] = {}
    for idx, user in enumerate(users):
        if rng.random() < FULL_TIMELINE_RATE:
            length = rng.randint(16, TIMELINE_CAP)
        else:
            length = rng.randint(0, 15)
        history: list[str] = []
        for _ in range(length):
            if idx in hater_set and rng.random() < config.signal_strength:
                history.append(" ".join(_with_tokens(rng, markers, 8, 16, (2, 4))))
            else:
                history.append(" ".join(_filler_text(rng, 8, 16)))
        timelines[user] = UserTimeline(user, tuple(history))

    return Dataset(scheme=SYNTHETIC_BINARY, tweets=tuple(tweets), timelines=timelines)


def activity_distribution(
    dataset: Dataset,
    only_hate: bool = False,
    hate_class: str | None = None,
) -> list[tuple[int, int]]:
    """Per-user tweet counts as (rank, count), sorted by count descending.

    With ``only_hate`` set, counts cover only tweets labeled ``hate_class``
    and users without any such tweet are dropped.
    """
    if only_hate:
        if hate_class is None:
            raise ConfigError("only_hate requires hate_class")
        hate_index = dataset.scheme.index_of(hate_class)

    counts: dict[str, int] = {}
    for t in dataset.tweets:
        if only_hate and t.label != hate_index:
            continue
        counts[t.user_id] = counts.get(t.user_id, 0) + 1

    ordered = sorted(counts.values(), reverse=True)
    return [(rank, count) for rank, count in enumerate(ordered, start=1)]


def distribution_to_tsv(rows: list[tuple[int, int]]) -> str:
    """Two-column TSV export with a header row."""
    lines = ["rank\tcount"]
    lines.extend(f"{rank}\t{count}" for rank, count in rows)
    return "\n".join(lines) + "\n"
