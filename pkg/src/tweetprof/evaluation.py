"""Cross-validation, confusion-matrix metrics and timeline-length bins.

Metric conventions (the literature leaves these open, so they are pinned
here):
  * Cross-fold aggregation pools confusion counts rather than averaging
    per-fold percentages; pooling stays stable when classes are rare.
  * Undefined cells (zero denominators) render as the literal string NAN.
  * The overall macro row substitutes 0 for undefined per-class components,
    so it is always a number.
  * Timeline-bin rows average only classes with gold instances in the bin
    and let an undefined component (a class never predicted inside the bin)
    propagate, so such a bin renders NAN for macro P/F1 while recall stays
    defined. An empty bin renders count 0 and all-NAN metrics.
Percentages print with one decimal place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import profiles
from .corpus import Dataset, LabelScheme, Tweet, UserTimeline
from .errors import InputError
from .gbdt import GBDTConfig, fit_gbdt, predict_gbdt_batch
from .profiles import ProfileMode
from .recurrent import RecurrentConfig, extract_embeddings, train_recurrent
from .text import build_vocab, init_embeddings, load_pretrained_embeddings, tokenize

TIMELINE_BINS = ((0, 5), (6, 10), (11, 15), (16, 20))


class SplitMode(str, Enum):
    BY_TWEET = "by-tweet"
    BY_USER = "by-user"


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: Mapping[str, int]  # tweet id -> fold index
    mode: SplitMode
    seed: int

    def fold_of(self, tweet_id: str) -> int:
        return self.assignment[tweet_id]


def split_by_tweet(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle then round-robin; fold sizes differ by at most one.

    Prolific users are expected to straddle folds in this mode.
    """
    n = len(dataset.tweets)
    if k < 2 or k > n:
        raise InputError(f"k must be in [2, {n}], got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    assignment = {
        dataset.tweets[int(idx)].id: pos % k for pos, idx in enumerate(order)
    }
    return FoldPlan(k=k, assignment=assignment, mode=SplitMode.BY_TWEET, seed=seed)


def split_by_user(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Round-robin over shuffled users; every tweet follows its author, so
    fold user-sets are pairwise disjoint."""
    users = dataset.user_ids()
    if k < 2 or k > len(users):
        raise InputError(f"k must be in [2, {len(users)}], got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(users))
    user_fold = {users[int(idx)]: pos % k for pos, idx in enumerate(order)}
    assignment = {t.id: user_fold[t.user_id] for t in dataset.tweets}
    return FoldPlan(k=k, assignment=assignment, mode=SplitMode.BY_USER, seed=seed)


@dataclass
class ConfusionMatrix:
    """Counts with gold labels on rows and predictions on columns."""

    counts: np.ndarray
    classes: tuple[str, ...]

    @classmethod
    def empty(cls, classes: Sequence[str]) -> "ConfusionMatrix":
        n = len(classes)
        return cls(np.zeros((n, n), dtype=np.int64), tuple(classes))

    def add(self, gold: int, predicted: int, count: int = 1) -> None:
        self.counts[gold, predicted] += count

    def merge(self, other: "ConfusionMatrix") -> None:
        self.counts += other.counts

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _prf_percent(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1) in percent; NaN where the denominator is 0."""
    p = 100.0 * tp / (tp + fp) if tp + fp > 0 else math.nan
    r = 100.0 * tp / (tp + fn) if tp + fn > 0 else math.nan
    if math.isnan(p) or math.isnan(r) or p + r == 0.0:
        f1 = math.nan
    else:
        f1 = 2.0 * p * r / (p + r)
    return p, r, f1


def _zero_if_nan(values: list[float]) -> float:
    return sum(0.0 if math.isnan(v) else v for v in values) / len(values)


@dataclass(frozen=True)
class MetricsReport:
    classes: tuple[str, ...]
    counts: tuple[int, ...]                        # gold count per class
    per_class: tuple[tuple[float, float, float], ...]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]

    def to_text(self) -> str:
        width = max([len(c) for c in self.classes] + [len("macro avg")]) + 2
        header = f"{'class':<{width}}{'P':>8}{'R':>8}{'F1':>8}{'count':>8}"
        lines = [header]
        for name, (p, r, f1), count in zip(self.classes, self.per_class, self.counts):
            lines.append(
                f"{name:<{width}}{_fmt(p):>8}{_fmt(r):>8}{_fmt(f1):>8}{count:>8}"
            )
        for label, triple in (("micro avg", self.micro), ("macro avg", self.macro)):
            p, r, f1 = triple
            lines.append(
                f"{label:<{width}}{_fmt(p):>8}{_fmt(r):>8}{_fmt(f1):>8}{sum(self.counts):>8}"
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": list(self.counts),
            "per_class": {
                name: {"precision": _jsonable(p), "recall": _jsonable(r), "f1": _jsonable(f1)}
                for name, (p, r, f1) in zip(self.classes, self.per_class)
            },
            "micro": {
                "precision": _jsonable(self.micro[0]),
                "recall": _jsonable(self.micro[1]),
                "f1": _jsonable(self.micro[2]),
            },
            "macro": {
                "precision": _jsonable(self.macro[0]),
                "recall": _jsonable(self.macro[1]),
                "f1": _jsonable(self.macro[2]),
            },
        }


def _fmt(value: float) -> str:
    return "NAN" if math.isnan(value) else f"{value:.1f}"


def _jsonable(value: float):
    return "NAN" if math.isnan(value) else value


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class and aggregate P/R/F1 in percent.

    Micro metrics pool true/false positives over all classes; in
    single-label classification micro P = R = F1 = accuracy. The macro row
    is the unweighted class mean with undefined components counted as 0.
    """
    counts = cm.counts
    n = len(cm.classes)
    per_class = []
    for c in range(n):
        tp = int(counts[c, c])
        fp = int(counts[:, c].sum()) - tp
        fn = int(counts[c, :].sum()) - tp
        per_class.append(_prf_percent(tp, fp, fn))

    total = cm.total
    correct = int(np.trace(counts))
    micro = _prf_percent(correct, total - correct, total - correct)

    if total > 0:
        macro = tuple(
            _zero_if_nan([row[i] for row in per_class]) for i in range(3)
        )
    else:
        macro = (math.nan, math.nan, math.nan)

    return MetricsReport(
        classes=cm.classes,
        counts=tuple(int(counts[c, :].sum()) for c in range(n)),
        per_class=tuple(per_class),
        micro=micro,
        macro=macro,  # type: ignore[arg-type]
    )


def micro_macro(cm: ConfusionMatrix) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    report = metrics_from_confusion(cm)
    return report.micro, report.macro


@dataclass(frozen=True)
class TweetResult:
    tweet_id: str
    user_id: str
    gold: int
    predicted: int
    fold: int


@dataclass(frozen=True)
class BinRow:
    label: str
    count: int
    macro_p: float
    macro_r: float
    macro_f1: float


@dataclass(frozen=True)
class BinReport:
    rows: tuple[BinRow, ...]

    def to_tsv(self) -> str:
        lines = ["bin\tcount\tmacro_p\tmacro_r\tmacro_f1"]
        for row in self.rows:
            lines.append(
                f"{row.label}\t{row.count}\t{_fmt(row.macro_p)}\t{_fmt(row.macro_r)}\t{_fmt(row.macro_f1)}"
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "bins": [
                {
                    "bin": row.label,
                    "count": row.count,
                    "macro_p": _jsonable(row.macro_p),
                    "macro_r": _jsonable(row.macro_r),
                    "macro_f1": _jsonable(row.macro_f1),
                }
                for row in self.rows
            ]
        }


def _bin_macro(sub: ConfusionMatrix) -> tuple[float, float, float]:
    """NaN-propagating macro over classes with gold instances in the bin."""
    counts = sub.counts
    present = [c for c in range(len(sub.classes)) if counts[c, :].sum() > 0]
    if not present:
        return math.nan, math.nan, math.nan
    triples = []
    for c in present:
        tp = int(counts[c, c])
        fp = int(counts[:, c].sum()) - tp
        fn = int(counts[c, :].sum()) - tp
        triples.append(_prf_percent(tp, fp, fn))
    return tuple(sum(t[i] for t in triples) / len(triples) for i in range(3))  # type: ignore[return-value]


def bin_by_timeline_length(
    results: Sequence[TweetResult],
    timelines: Mapping[str, UserTimeline],
    classes: Sequence[str],
) -> BinReport:
    """Macro metrics per timeline-length bin {0-5, 6-10, 11-15, 16-20}.

    An author absent from the timeline map counts as length 0. Bin counts
    always sum to the number of results.
    """
    sub_cms = [ConfusionMatrix.empty(classes) for _ in TIMELINE_BINS]
    for result in results:
        timeline = timelines.get(result.user_id)
        length = len(timeline) if timeline is not None else 0
        for b, (lo, hi) in enumerate(TIMELINE_BINS):
            if lo <= length <= hi:
                sub_cms[b].add(result.gold, result.predicted)
                break
    rows = []
    for (lo, hi), sub in zip(TIMELINE_BINS, sub_cms):
        macro_p, macro_r, macro_f1 = _bin_macro(sub)
        rows.append(BinRow(f"{lo}-{hi}", sub.total, macro_p, macro_r, macro_f1))
    return BinReport(tuple(rows))


@dataclass(frozen=True)
class ExperimentResult:
    scheme: LabelScheme
    plan: FoldPlan
    confusion: ConfusionMatrix
    metrics: MetricsReport
    bins: BinReport
    fold_reports: tuple[MetricsReport, ...]
    results: tuple[TweetResult, ...]


def _drop_rare_classes(dataset: Dataset, k: int) -> Dataset:
    """Remove classes with fewer tweets than folds and reindex the scheme."""
    per_class = [0] * dataset.scheme.n_classes
    for t in dataset.tweets:
        per_class[t.label] += 1
    keep = [c for c in range(dataset.scheme.n_classes) if per_class[c] >= k]
    if len(keep) == dataset.scheme.n_classes:
        return dataset
    if len(keep) < 2:
        raise InputError(
            f"fewer than 2 classes have at least {k} tweets; cannot evaluate"
        )
    remap = {old: new for new, old in enumerate(keep)}
    scheme = LabelScheme(
        dataset.scheme.name + "-reduced",
        tuple(dataset.scheme.classes[c] for c in keep),
    )
    tweets = tuple(
        Tweet(t.id, t.user_id, t.text, remap[t.label])
        for t in dataset.tweets
        if t.label in remap
    )
    return Dataset(scheme=scheme, tweets=tweets, timelines=dataset.timelines)


def _fold_seeds(master_seed: int, fold: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(fold,))
    state = ss.generate_state(2)
    return int(state[0]), int(state[1])


def run_experiment(
    dataset: Dataset,
    mode: ProfileMode,
    split_mode: SplitMode,
    k: int,
    recurrent_config: RecurrentConfig,
    gbdt_config: GBDTConfig,
    seed: int,
    min_count: int = 1,
    embeddings_path: str | None = None,
) -> ExperimentResult:
    """Full k-fold run of the two-phase pipeline.

    Classes with fewer tweets than folds are dropped up front. Per fold: the
    vocabulary comes from that fold's training texts only, embeddings are
    (re)initialized and fine-tuned by the recurrent phase, features are built
    per ``mode`` and a GBDT is fit on the training half; predictions on the
    held-out fold accumulate into one pooled confusion matrix. Everything is
    seeded from ``seed``, so identical inputs give identical reports.
    """
    data = _drop_rare_classes(dataset, k)
    n_classes = data.scheme.n_classes
    if split_mode == SplitMode.BY_TWEET:
        plan = split_by_tweet(data, k, seed)
    else:
        plan = split_by_user(data, k, seed)

    pooled = ConfusionMatrix.empty(data.scheme.classes)
    fold_reports: list[MetricsReport] = []
    results: list[TweetResult] = []

    for fold in range(k):
        train = [t for t in data.tweets if plan.fold_of(t.id) != fold]
        test = [t for t in data.tweets if plan.fold_of(t.id) == fold]
        if not train or not test:
            raise InputError(f"fold {fold} has an empty train or test side")

        emb_seed, rec_seed = _fold_seeds(seed, fold)
        vocab = build_vocab([t.text for t in train], min_count)
        if embeddings_path is not None:
            emb0 = load_pretrained_embeddings(
                embeddings_path, vocab, recurrent_config.embed_dim, emb_seed
            )
        else:
            emb0 = init_embeddings(vocab, recurrent_config.embed_dim, emb_seed)

        rc = replace(recurrent_config, seed=rec_seed, n_classes=n_classes)
        encoded = [(vocab.encode(tokenize(t.text)), t.label) for t in train]
        try:
            model = train_recurrent(encoded, rc, emb0)
            emb = extract_embeddings(model)
            X_train = profiles.feature_matrix(train, data.timelines, mode, vocab, emb)
            X_test = profiles.feature_matrix(test, data.timelines, mode, vocab, emb)
            gbdt_model = fit_gbdt(
                X_train, [t.label for t in train], gbdt_config, n_classes=n_classes
            )
            probs = predict_gbdt_batch(gbdt_model, X_test)
        except Exception as exc:
            exc.args = (f"fold {fold}: {exc}",)
            raise

        predictions = probs.argmax(axis=1)
        fold_cm = ConfusionMatrix.empty(data.scheme.classes)
        for tweet, pred in zip(test, predictions):
            fold_cm.add(tweet.label, int(pred))
            results.append(
                TweetResult(tweet.id, tweet.user_id, tweet.label, int(pred), fold)
            )
        pooled.merge(fold_cm)
        fold_reports.append(metrics_from_confusion(fold_cm))

    return ExperimentResult(
        scheme=data.scheme,
        plan=plan,
        confusion=pooled,
        metrics=metrics_from_confusion(pooled),
        bins=bin_by_timeline_length(results, data.timelines, data.scheme.classes),
        fold_reports=tuple(fold_reports),
        results=tuple(results),
    )
