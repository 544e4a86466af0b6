"""Phase two: gradient-boosted regression trees over dense feature vectors.

Newton boosting on a logistic objective (binary) or one tree per class on a
softmax objective (multiclass). Splits come from exact greedy search over
every midpoint between consecutive distinct sorted feature values; ties in
gain break toward the lowest feature index, then the lowest threshold, so a
fit is a pure function of its inputs. There is no row or feature
subsampling.

Leaf values are Newton steps -G/(H + lambda), stored pre-multiplied by the
learning rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError, ShapeError

PRIOR_CLAMP = 1e-12


@dataclass(frozen=True)
class GBDTConfig:
    n_rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    reg_lambda: float = 1.0
    seed: int = 0  # reserved: fits are deterministic, nothing is subsampled

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ConfigError("n_rounds must be >= 0")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.reg_lambda < 0:
            raise ConfigError("reg_lambda must be >= 0")


class RegressionTree:
    """Binary axis-aligned tree in flat arrays; samples route left iff
    feature value <= threshold."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf values for every row of X, routed vectorized level by level."""
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        idx = np.zeros(len(X), dtype=np.intp)
        while True:
            active = feat[idx] >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            go_left = X[rows, feat[nodes]] <= thr[nodes]
            idx[rows] = np.where(go_left, left[nodes], right[nodes])
        return value[idx]

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0) if self.feature else 0

    def to_dict(self) -> dict:
        def walk(node: int) -> dict:
            if self.feature[node] < 0:
                return {"value": self.value[node]}
            return {
                "feature": self.feature[node],
                "threshold": self.threshold[node],
                "left": walk(self.left[node]),
                "right": walk(self.right[node]),
            }

        return walk(0)

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionTree":
        tree = cls()

        def walk(obj: dict) -> int:
            node = tree._add_node()
            if "value" in obj:
                tree.value[node] = float(obj["value"])
            else:
                tree.feature[node] = int(obj["feature"])
                tree.threshold[node] = float(obj["threshold"])
                tree.left[node] = walk(obj["left"])
                tree.right[node] = walk(obj["right"])
            return node

        walk(payload)
        return tree


@dataclass
class GBDTModel:
    """Additive ensemble: base scores plus one tree (binary) or one tree per
    class (softmax) for each boosting round."""

    n_classes: int
    n_features: int
    base_scores: np.ndarray           # (1,) binary log-odds or (n_classes,) log-priors
    rounds: list[list[RegressionTree]] = field(default_factory=list)

    @property
    def objective(self) -> str:
        return "binary-logistic" if self.n_classes == 2 else "softmax"

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


def _validate_features(features, labels=None) -> np.ndarray:
    if isinstance(features, np.ndarray):
        if features.ndim != 2:
            raise ShapeError(f"feature matrix must be 2-D, got {features.ndim}-D")
        X = np.asarray(features, dtype=np.float64)
    else:
        rows = [np.asarray(row, dtype=np.float64) for row in features]
        if not rows:
            raise InputError("no samples")
        widths = {row.shape for row in rows}
        if len(widths) != 1 or rows[0].ndim != 1:
            raise ShapeError(f"ragged feature vectors: lengths {sorted(len(r) for r in rows)[:5]}...")
        X = np.stack(rows)
    if len(X) == 0:
        raise InputError("no samples")
    if labels is not None and len(labels) != len(X):
        raise ShapeError(f"{len(X)} feature rows but {len(labels)} labels")
    return X


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def _node_totals(g: np.ndarray, h: np.ndarray) -> tuple[float, float]:
    """Sequential sums of g and h in the canonical (g, h) sort order.

    Accumulating in a canonical order makes every statistic a function of the
    sample multiset alone, so fitting is bit-identical under any permutation
    of the training rows.
    """
    order = np.lexsort((h, g))
    return float(np.cumsum(g[order])[-1]), float(np.cumsum(h[order])[-1])


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    g_total: float,
    h_total: float,
    cfg: GBDTConfig,
) -> tuple[int, float, float] | None:
    """Exact greedy search; returns (feature, threshold, gain) or None.

    Candidates are midpoints between consecutive distinct sorted values,
    with prefix statistics accumulated in the canonical (value, g, h) order
    (see _node_totals). Gains are compared with strict >, walking features
    in ascending order and thresholds ascending within a feature, which
    implements the (lowest feature, lowest threshold) tie rule. Zero-gain
    splits are accepted (the children may still separate, as in XOR-style
    data); negative gains, which the lambda regularizer can produce, are
    not.
    """
    n, m = X.shape
    lam = cfg.reg_lambda
    msl = cfg.min_samples_leaf
    parent = g_total * g_total / (h_total + lam)

    best: tuple[int, float, float] | None = None
    best_gain = -np.inf
    for j in range(m):
        order = np.lexsort((h, g, X[:, j]))
        xs = X[order, j]
        cs_g = np.cumsum(g[order])
        cs_h = np.cumsum(h[order])
        gl = cs_g[:-1]
        hl = cs_h[:-1]
        gr = g_total - gl
        hr = h_total - hl
        counts_left = np.arange(1, n)
        valid = (xs[1:] != xs[:-1]) & (counts_left >= msl) & (n - counts_left >= msl)
        if not valid.any():
            continue
        gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
        gains[~valid] = -np.inf
        k = int(np.argmax(gains))  # first max: lowest threshold in this feature
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best = (j, float((xs[k] + xs[k + 1]) / 2.0), best_gain)
    if best is None or best_gain < 0.0:
        return None
    return best


def _fit_tree(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: GBDTConfig
) -> tuple[RegressionTree, np.ndarray]:
    """One regression tree on gradient/hessian stats; also returns the
    (already shrunk) training predictions so fit_gbdt can update scores
    without re-routing."""
    tree = RegressionTree()
    train_pred = np.zeros(len(X))
    root = tree._add_node()
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(len(X)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        g_node = g[rows]
        h_node = h[rows]
        g_total, h_total = _node_totals(g_node, h_node)
        split = None
        if depth < cfg.max_depth and len(rows) >= 2 * cfg.min_samples_leaf:
            split = _best_split(X[rows], g_node, h_node, g_total, h_total, cfg)
        if split is None:
            leaf = -g_total / (h_total + cfg.reg_lambda) * cfg.learning_rate
            tree.value[node] = leaf
            train_pred[rows] = leaf
            continue
        feature, threshold, _ = split
        tree.feature[node] = feature
        tree.threshold[node] = threshold
        go_left = X[rows, feature] <= threshold
        left = tree._add_node()
        right = tree._add_node()
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, rows[go_left], depth + 1))
        stack.append((right, rows[~go_left], depth + 1))
    return tree, train_pred


def _base_scores(labels: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    priors = np.clip(counts / counts.sum(), PRIOR_CLAMP, 1.0)
    if n_classes == 2:
        p1 = priors[1] / (priors[0] + priors[1])
        p1 = min(max(p1, PRIOR_CLAMP), 1.0 - PRIOR_CLAMP)
        return np.array([np.log(p1 / (1.0 - p1))])
    return np.log(priors)


def fit_gbdt(
    features: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
    config: GBDTConfig = GBDTConfig(),
    n_classes: int | None = None,
) -> GBDTModel:
    """Boost ``config.n_rounds`` rounds of Newton trees.

    Binary targets train a single logistic-score tree per round; three or
    more classes train one tree per class per round against softmax
    gradients, all computed from the probabilities at the round's start.
    """
    X = _validate_features(features, labels)
    y = np.asarray(labels, dtype=np.intp)
    if y.min() < 0:
        raise InputError("labels must be non-negative class indices")
    inferred = max(2, int(y.max()) + 1)
    if n_classes is None:
        n_classes = inferred
    elif n_classes < inferred:
        raise InputError(f"labels reach class {y.max()} but n_classes={n_classes}")

    model = GBDTModel(
        n_classes=n_classes,
        n_features=X.shape[1],
        base_scores=_base_scores(y, n_classes),
    )

    if n_classes == 2:
        scores = np.full(len(X), model.base_scores[0])
        y_float = y.astype(np.float64)
        for _ in range(config.n_rounds):
            p = _sigmoid(scores)
            g = p - y_float
            h = p * (1.0 - p)
            tree, train_pred = _fit_tree(X, g, h, config)
            scores += train_pred
            model.rounds.append([tree])
    else:
        scores = np.tile(model.base_scores, (len(X), 1))
        onehot = np.zeros((len(X), n_classes))
        onehot[np.arange(len(X)), y] = 1.0
        for _ in range(config.n_rounds):
            p = _softmax(scores)
            g_all = p - onehot
            h_all = p * (1.0 - p)
            round_trees = []
            updates = np.empty_like(scores)
            for c in range(n_classes):
                tree, train_pred = _fit_tree(X, g_all[:, c], h_all[:, c], config)
                round_trees.append(tree)
                updates[:, c] = train_pred
            scores += updates
            model.rounds.append(round_trees)
    return model


def _raw_scores(model: GBDTModel, X: np.ndarray, upto_round: int | None = None) -> np.ndarray:
    limit = model.n_rounds if upto_round is None else upto_round
    if model.n_classes == 2:
        scores = np.full(len(X), model.base_scores[0])
        for trees in model.rounds[:limit]:
            scores += trees[0].predict(X)
        return scores
    scores = np.tile(model.base_scores, (len(X), 1))
    for trees in model.rounds[:limit]:
        for c, tree in enumerate(trees):
            scores[:, c] += tree.predict(X)
    return scores


def _probabilities(model: GBDTModel, scores: np.ndarray) -> np.ndarray:
    if model.n_classes == 2:
        p = _sigmoid(scores)
        return np.stack([1.0 - p, p], axis=1)
    return _softmax(scores)


def predict_gbdt(model: GBDTModel, feature_vector: Sequence[float] | np.ndarray) -> np.ndarray:
    """Class probability vector for one feature vector."""
    x = np.asarray(feature_vector, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ShapeError(
            f"expected a vector of length {model.n_features}, got shape {x.shape}"
        )
    return _probabilities(model, _raw_scores(model, x[None, :]))[0]


def predict_gbdt_batch(model: GBDTModel, features: np.ndarray) -> np.ndarray:
    """(n, n_classes) probability matrix for a feature matrix."""
    X = _validate_features(features)
    if X.shape[1] != model.n_features:
        raise ShapeError(
            f"expected {model.n_features} features, got {X.shape[1]}"
        )
    return _probabilities(model, _raw_scores(model, X))


def _log_loss(model: GBDTModel, scores: np.ndarray, y: np.ndarray) -> float:
    if model.n_classes == 2:
        yf = y.astype(np.float64)
        losses = yf * np.logaddexp(0.0, -scores) + (1.0 - yf) * np.logaddexp(0.0, scores)
    else:
        zmax = scores.max(axis=1)
        lse = np.log(np.exp(scores - zmax[:, None]).sum(axis=1)) + zmax
        losses = lse - scores[np.arange(len(y)), y]
    return float(losses.mean())


def staged_training_loss(
    model: GBDTModel,
    features: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
) -> list[float]:
    """Mean log-loss after 0, 1, ..., n_rounds rounds (n_rounds+1 entries).

    Entry 0 is the prior-only loss; the sequence is non-increasing within
    1e-9 on the data the model was fitted on.
    """
    X = _validate_features(features, labels)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got {X.shape[1]}")
    y = np.asarray(labels, dtype=np.intp)
    if model.n_classes == 2:
        scores = np.full(len(X), model.base_scores[0])
    else:
        scores = np.tile(model.base_scores, (len(X), 1))
    losses = [_log_loss(model, scores, y)]
    for trees in model.rounds:
        if model.n_classes == 2:
            scores += trees[0].predict(X)
        else:
            for c, tree in enumerate(trees):
                scores[:, c] += tree.predict(X)
        losses.append(_log_loss(model, scores, y))
    return losses


def model_to_json(model: GBDTModel) -> str:
    """Stable-key JSON dump of base scores and every tree."""
    payload = {
        "format": "tweetprof-gbdt",
        "version": 1,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "objective": model.objective,
        "base_scores": model.base_scores.tolist(),
        "rounds": [[tree.to_dict() for tree in trees] for trees in model.rounds],
    }
    return json.dumps(payload, sort_keys=True)


def model_from_json(text: str) -> GBDTModel:
    payload = json.loads(text)
    if payload.get("format") != "tweetprof-gbdt":
        raise InputError("not a gbdt model dump")
    model = GBDTModel(
        n_classes=int(payload["n_classes"]),
        n_features=int(payload["n_features"]),
        base_scores=np.asarray(payload["base_scores"], dtype=np.float64),
    )
    model.rounds = [
        [RegressionTree.from_dict(obj) for obj in trees]
        for trees in payload["rounds"]
    ]
    return model
