"""Phase one: LSTM classifier trained with cross-entropy and Adam.

The point of this phase is not the classifier itself but its first layer:
training fine-tunes the embedding matrix, which is then extracted and used
to build averaged-embedding features for the boosted-tree phase.

Everything runs in float64 numpy. Sequences are front-padded (and, when too
long, front-truncated) to exactly ``max_seq_len`` steps; the pad token's
embedding row is frozen at zero but the recurrence still runs over pad steps.
Binary schemes use a single sigmoid unit, three or more classes a softmax.
Gate layout in the fused weight matrices is [input | forget | cell | output].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, NumericError, TrainingError
from .text import PAD_INDEX, Vocabulary

CHECKPOINT_FORMAT = "tweetprof-recurrent-checkpoint"
CHECKPOINT_VERSION = 1

INIT_WEIGHT_RANGE = 0.08
FORGET_BIAS = 1.0


@dataclass(frozen=True)
class RecurrentConfig:
    embed_dim: int = 200
    hidden_dim: int = 200
    dropout_embed: float = 0.25
    dropout_lstm: float = 0.5
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    max_seq_len: int = 40
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embed_dim and hidden_dim must be >= 1")
        if not (0.0 <= self.dropout_embed < 1.0 and 0.0 <= self.dropout_lstm < 1.0):
            raise ConfigError("dropout rates must lie in [0, 1)")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_seq_len < 1:
            raise ConfigError("max_seq_len must be >= 1")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")

    @property
    def output_units(self) -> int:
        return 1 if self.n_classes == 2 else self.n_classes


@dataclass
class RecurrentModel:
    """All trainable tensors plus the config they were built under."""

    config: RecurrentConfig
    embedding: np.ndarray        # (V, d)
    w_x: np.ndarray              # (d, 4h) input-to-gates
    w_h: np.ndarray              # (h, 4h) recurrent
    b: np.ndarray                # (4h,)
    w_out: np.ndarray            # (h, output_units)
    b_out: np.ndarray            # (output_units,)
    epoch_losses: list[float] = field(default_factory=list)

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "embedding": self.embedding,
            "w_x": self.w_x,
            "w_h": self.w_h,
            "b": self.b,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }


def init_model(
    config: RecurrentConfig,
    init_emb: np.ndarray,
    rng: np.random.Generator | None = None,
) -> RecurrentModel:
    """Seeded model init: uniform [-0.08, 0.08] weights, forget bias +1."""
    if init_emb.shape[1] != config.embed_dim:
        raise ConfigError(
            f"init embedding dim {init_emb.shape[1]} != config embed_dim {config.embed_dim}"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d, h, u = config.embed_dim, config.hidden_dim, config.output_units
    w_x = rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, size=(d, 4 * h))
    w_h = rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, size=(h, 4 * h))
    b = np.zeros(4 * h)
    b[h : 2 * h] = FORGET_BIAS
    w_out = rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, size=(h, u))
    b_out = np.zeros(u)
    return RecurrentModel(
        config=config,
        embedding=np.array(init_emb, dtype=np.float64, copy=True),
        w_x=w_x,
        w_h=w_h,
        b=b,
        w_out=w_out,
        b_out=b_out,
    )


def prepare_sequence(indices: list[int], max_seq_len: int) -> list[int]:
    """Front-pad with the pad token, or keep the last ``max_seq_len`` tokens."""
    if len(indices) >= max_seq_len:
        return list(indices[-max_seq_len:])
    return [PAD_INDEX] * (max_seq_len - len(indices)) + list(indices)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_batch(
    model: RecurrentModel,
    batch: np.ndarray,
    train_mode: bool,
    rng: np.random.Generator | None,
) -> dict:
    """Run the LSTM over a (B, T) index batch and cache every intermediate."""
    cfg = model.config
    B, T = batch.shape
    h = cfg.hidden_dim

    x = model.embedding[batch]  # (B, T, d)
    if train_mode and cfg.dropout_embed > 0.0:
        keep = 1.0 - cfg.dropout_embed
        mask_embed = (rng.random(x.shape) < keep).astype(np.float64) / keep
        x = x * mask_embed
    else:
        mask_embed = None

    gates_i = np.empty((T, B, h))
    gates_f = np.empty((T, B, h))
    gates_g = np.empty((T, B, h))
    gates_o = np.empty((T, B, h))
    tanh_c = np.empty((T, B, h))
    hs = np.zeros((T + 1, B, h))
    cs = np.zeros((T + 1, B, h))

    for t in range(T):
        a = x[:, t, :] @ model.w_x + hs[t] @ model.w_h + model.b
        i = _sigmoid(a[:, :h])
        f = _sigmoid(a[:, h : 2 * h])
        g = np.tanh(a[:, 2 * h : 3 * h])
        o = _sigmoid(a[:, 3 * h :])
        c = f * cs[t] + i * g
        tc = np.tanh(c)
        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = i, f, g, o
        cs[t + 1] = c
        tanh_c[t] = tc
        hs[t + 1] = o * tc

    h_final = hs[T]
    if train_mode and cfg.dropout_lstm > 0.0:
        keep = 1.0 - cfg.dropout_lstm
        mask_lstm = (rng.random(h_final.shape) < keep).astype(np.float64) / keep
        h_dropped = h_final * mask_lstm
    else:
        mask_lstm = None
        h_dropped = h_final

    z = h_dropped @ model.w_out + model.b_out  # (B, u)

    if cfg.output_units == 1:
        p = _sigmoid(z[:, 0])
        probs = np.stack([1.0 - p, p], axis=1)
    else:
        shifted = z - z.max(axis=1, keepdims=True)
        ez = np.exp(shifted)
        probs = ez / ez.sum(axis=1, keepdims=True)

    return {
        "batch": batch,
        "x": x,
        "mask_embed": mask_embed,
        "mask_lstm": mask_lstm,
        "gates": (gates_i, gates_f, gates_g, gates_o),
        "tanh_c": tanh_c,
        "hs": hs,
        "cs": cs,
        "h_dropped": h_dropped,
        "z": z,
        "probs": probs,
    }


def _batch_loss(cache: dict, labels: np.ndarray, n_classes: int) -> float:
    """Mean cross-entropy, computed in the log domain for stability."""
    z = cache["z"]
    if z.shape[1] == 1:
        zv = z[:, 0]
        y = labels.astype(np.float64)
        losses = y * np.logaddexp(0.0, -zv) + (1.0 - y) * np.logaddexp(0.0, zv)
    else:
        lse = np.log(np.exp(z - z.max(axis=1, keepdims=True)).sum(axis=1)) + z.max(axis=1)
        losses = lse - z[np.arange(len(labels)), labels]
    return float(losses.mean())


def _backward_batch(model: RecurrentModel, cache: dict, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every parameter tensor."""
    cfg = model.config
    batch = cache["batch"]
    B, T = batch.shape
    h = cfg.hidden_dim

    if cfg.output_units == 1:
        p = cache["probs"][:, 1]
        dz = ((p - labels.astype(np.float64)) / B)[:, None]
    else:
        dz = cache["probs"].copy()
        dz[np.arange(B), labels] -= 1.0
        dz /= B

    h_dropped = cache["h_dropped"]
    d_w_out = h_dropped.T @ dz
    d_b_out = dz.sum(axis=0)
    dh = dz @ model.w_out.T
    if cache["mask_lstm"] is not None:
        dh = dh * cache["mask_lstm"]

    gates_i, gates_f, gates_g, gates_o = cache["gates"]
    tanh_c, hs, cs, x = cache["tanh_c"], cache["hs"], cache["cs"], cache["x"]

    d_w_x = np.zeros_like(model.w_x)
    d_w_h = np.zeros_like(model.w_h)
    d_b = np.zeros_like(model.b)
    dx = np.empty_like(x)
    dc = np.zeros((B, h))

    for t in range(T - 1, -1, -1):
        i, f, g, o = gates_i[t], gates_f[t], gates_g[t], gates_o[t]
        tc = tanh_c[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        da = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        d_w_x += x[:, t, :].T @ da
        d_w_h += hs[t].T @ da
        d_b += da.sum(axis=0)
        dx[:, t, :] = da @ model.w_x.T
        dh = da @ model.w_h.T
        dc = dc * f

    if cache["mask_embed"] is not None:
        dx = dx * cache["mask_embed"]
    d_emb = np.zeros_like(model.embedding)
    np.add.at(d_emb, batch.reshape(-1), dx.reshape(-1, cfg.embed_dim))

    return {
        "embedding": d_emb,
        "w_x": d_w_x,
        "w_h": d_w_h,
        "b": d_b,
        "w_out": d_w_out,
        "b_out": d_b_out,
    }


def forward(
    model: RecurrentModel,
    token_indices: list[int],
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class probability vector for one sequence.

    Raises InputError on an empty sequence (callers map empty token lists to
    a single pad token before getting here) and NumericError if the network
    produces non-finite values.
    """
    if len(token_indices) == 0:
        raise InputError("empty sequence; encode maps empty input to [pad]")
    if train_mode and rng is None:
        raise InputError("train_mode forward needs an rng for dropout masks")
    prepared = prepare_sequence(list(token_indices), model.config.max_seq_len)
    batch = np.array([prepared], dtype=np.intp)
    cache = _forward_batch(model, batch, train_mode, rng)
    probs = cache["probs"][0]
    if not np.all(np.isfinite(probs)):
        raise NumericError("non-finite class probabilities (divergence)")
    return probs


def train_recurrent(
    fold: list[tuple[list[int], int]],
    config: RecurrentConfig,
    init_emb: np.ndarray,
) -> RecurrentModel:
    """Mini-batch BPTT with Adam over ``config.epochs`` passes.

    Fully deterministic for a given (fold, config, init_emb): parameter init,
    epoch shuffles and dropout masks all come from one generator seeded with
    ``config.seed``. Per-epoch mean losses are recorded on the returned
    model's ``epoch_losses``.
    """
    for _, label in fold:
        if not 0 <= label < config.n_classes:
            raise InputError(f"label {label} outside 0..{config.n_classes - 1}")

    rng = np.random.default_rng(config.seed)
    model = init_model(config, init_emb, rng)
    if config.epochs == 0 or not fold:
        return model

    X = np.array(
        [prepare_sequence(seq, config.max_seq_len) for seq, _ in fold], dtype=np.intp
    )
    y = np.array([label for _, label in fold], dtype=np.intp)
    n = len(fold)

    params = model.parameters()
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            batch_no = start // config.batch_size
            idx = order[start : start + config.batch_size]
            cache = _forward_batch(model, X[idx], train_mode=True, rng=rng)
            loss = _batch_loss(cache, y[idx], config.n_classes)
            if not np.isfinite(loss):
                raise TrainingError("non-finite training loss", epoch, batch_no)
            batch_losses.append(loss)
            grads = _backward_batch(model, cache, y[idx])
            grads["embedding"][PAD_INDEX] = 0.0  # pad row stays frozen

            step += 1
            bc1 = 1.0 - config.beta1 ** step
            bc2 = 1.0 - config.beta2 ** step
            for name, p in params.items():
                g = grads[name]
                adam_m[name] = config.beta1 * adam_m[name] + (1 - config.beta1) * g
                adam_v[name] = config.beta2 * adam_v[name] + (1 - config.beta2) * g * g
                m_hat = adam_m[name] / bc1
                v_hat = adam_v[name] / bc2
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps_adam)
        model.epoch_losses.append(float(np.mean(batch_losses)))
    return model


def extract_embeddings(model: RecurrentModel) -> np.ndarray:
    """The fine-tuned embedding matrix, copied so callers cannot mutate the
    model through it."""
    return model.embedding.copy()


def _example_loss(model: RecurrentModel, indices: list[int], label: int) -> float:
    prepared = prepare_sequence(indices, model.config.max_seq_len)
    batch = np.array([prepared], dtype=np.intp)
    cache = _forward_batch(model, batch, train_mode=False, rng=None)
    return _batch_loss(cache, np.array([label], dtype=np.intp), model.config.n_classes)


def gradient_check(
    model: RecurrentModel,
    example: tuple[list[int], int],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Dropout is off (inference-mode loss), so both sides differentiate the
    same deterministic function. Relative error uses an absolute floor of
    1e-6 in the denominator so coordinates where both gradients vanish do
    not produce 0/0 noise.
    """
    indices, label = example
    if eps <= 0:
        raise InputError("eps must be positive")
    if len(indices) == 0:
        raise InputError("empty sequence")

    prepared = prepare_sequence(list(indices), model.config.max_seq_len)
    batch = np.array([prepared], dtype=np.intp)
    cache = _forward_batch(model, batch, train_mode=False, rng=None)
    analytic = _backward_batch(model, cache, np.array([label], dtype=np.intp))

    worst = 0.0
    for name, tensor in model.parameters().items():
        grad = analytic[name]
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            k = it.multi_index
            saved = tensor[k]
            tensor[k] = saved + eps
            loss_plus = _example_loss(model, indices, label)
            tensor[k] = saved - eps
            loss_minus = _example_loss(model, indices, label)
            tensor[k] = saved
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            ga = grad[k]
            rel = abs(ga - numeric) / max(abs(ga) + abs(numeric), 1e-6)
            if rel > worst:
                worst = rel
            it.iternext()
    return worst


def save_checkpoint(model: RecurrentModel, vocab: Vocabulary, path: str | Path) -> None:
    """Write config, vocabulary and all parameter tensors as one JSON file."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": vocab.tokens_in_order(),
        "params": {k: v.tolist() for k, v in model.parameters().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path: str | Path) -> tuple[RecurrentModel, Vocabulary]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"not a recurrent checkpoint: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {payload.get('version')}")
    config = RecurrentConfig(**payload["config"])
    params = {k: np.array(v, dtype=np.float64) for k, v in payload["params"].items()}
    model = RecurrentModel(config=config, **params)
    vocab = Vocabulary({token: i for i, token in enumerate(payload["vocab"])})
    return model, vocab
