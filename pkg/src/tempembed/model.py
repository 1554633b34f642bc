"""Recurrent link predictor trained by hand-written backprop and Adam.

Each node's aligned embedding rows over time form its input sequence. A GRU
(or the plain ``tanh(A l + B x)`` cell) encodes the sequence, the two node
states of a pair are concatenated, and a head maps the concatenation to a
link probability. Everything is float64 numpy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from tempembed import __version__
from tempembed.errors import ConfigError, DataError, NumericalError
from tempembed.numerics import SplitMix64, derive_seed, glorot_init

PROB_CLAMP = 1e-12
CHECKPOINT_FORMAT = "tempembed-checkpoint"
CHECKPOINT_VERSION = 1

GRU_PARAMS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_n", "U_n", "b_n")
SIMPLE_PARAMS = ("A", "B")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 512
    lr: float = 1e-3
    seed: int = 0
    cell: str = "gru"
    hidden: int | None = None
    head_hidden: int | None = None
    symmetric: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self) -> "TrainConfig":
        if self.cell not in ("gru", "simple"):
            raise ConfigError(f"cell must be 'gru' or 'simple', not {self.cell!r}")
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise ConfigError("epochs must be >= 0, batch_size >= 1 and lr > 0")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError("hidden must be >= 1")
        if self.head_hidden is not None and self.head_hidden < 0:
            raise ConfigError("head_hidden must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("need 0 <= beta1, beta2 < 1 and eps > 0")
        return self

    def hidden_dim(self, input_dim: int) -> int:
        return input_dim if self.hidden is None else self.hidden

    def head_dim(self, input_dim: int) -> int:
        return self.hidden_dim(input_dim) if self.head_hidden is None else self.head_hidden


def init_params(cfg: TrainConfig, input_dim: int, seed: int | None = None) -> dict[str, np.ndarray]:
    """Glorot weights, zero biases; deterministic per seed."""
    seed = cfg.seed if seed is None else seed
    d, h, k = input_dim, cfg.hidden_dim(input_dim), cfg.head_dim(input_dim)
    shapes: dict[str, tuple] = {}
    if cfg.cell == "gru":
        for gate in ("z", "r", "n"):
            shapes[f"W_{gate}"] = (h, d)
            shapes[f"U_{gate}"] = (h, h)
            shapes[f"b_{gate}"] = (h,)
    else:
        shapes["A"] = (h, h)
        shapes["B"] = (h, d)
    if k > 0:
        shapes["head_W"] = (k, 2 * h)
        shapes["head_c"] = (k,)
        shapes["head_w"] = (k,)
    else:
        shapes["head_w"] = (2 * h,)
    shapes["head_b"] = ()

    params = {}
    for i, (name, shape) in enumerate(shapes.items()):
        if len(shape) == 2:
            params[name] = glorot_init(shape[0], shape[1], derive_seed(seed, 100 + i))
        elif name == "head_w":
            params[name] = glorot_init(1, shape[0], derive_seed(seed, 100 + i)).ravel()
        else:
            params[name] = np.zeros(shape)
    return params


def params_fingerprint(params: dict[str, np.ndarray]) -> str:
    h = hashlib.blake2b(digest_size=16)
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name]).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- recurrences


def gru_forward(params, inputs):
    """Run a GRU from a zero state.

    ``inputs`` is ``(T, d)`` for one sequence or ``(T, M, d)`` for ``M``
    sequences in lockstep. Returns the final hidden state (``(h,)`` or
    ``(M, h)``) and the per-step cache needed by :func:`gru_backward`.
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[0] < 1:
        raise DataError("GRU inputs must be (T, d) or (T, M, d) with T >= 1")
    h_dim, d = params["W_z"].shape
    if x.shape[2] != d:
        raise DataError(f"input dim {x.shape[2]} does not match GRU input dim {d}")
    h = np.zeros((x.shape[1], h_dim))
    steps = []
    for xt in x:
        z = sigmoid(xt @ params["W_z"].T + h @ params["U_z"].T + params["b_z"])
        r = sigmoid(xt @ params["W_r"].T + h @ params["U_r"].T + params["b_r"])
        n = np.tanh(xt @ params["W_n"].T + (r * h) @ params["U_n"].T + params["b_n"])
        steps.append((xt, h, z, r, n))
        h = (1.0 - z) * n + z * h
    return (h[0] if single else h), steps


def gru_backward(params, steps, dh):
    """Backprop through time; returns parameter grads and input-state grad."""
    grads = {k: np.zeros_like(params[k]) for k in GRU_PARAMS}
    dh = np.array(dh, dtype=np.float64, ndmin=2)
    for xt, h_prev, z, r, n in reversed(steps):
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z

        da_n = dn * (1.0 - n * n)
        grads["W_n"] += da_n.T @ xt
        grads["U_n"] += da_n.T @ (r * h_prev)
        grads["b_n"] += da_n.sum(axis=0)
        d_rh = da_n @ params["U_n"]
        dr = d_rh * h_prev
        dh_prev += d_rh * r

        da_z = dz * z * (1.0 - z)
        grads["W_z"] += da_z.T @ xt
        grads["U_z"] += da_z.T @ h_prev
        grads["b_z"] += da_z.sum(axis=0)
        dh_prev += da_z @ params["U_z"]

        da_r = dr * r * (1.0 - r)
        grads["W_r"] += da_r.T @ xt
        grads["U_r"] += da_r.T @ h_prev
        grads["b_r"] += da_r.sum(axis=0)
        dh_prev += da_r @ params["U_r"]
        dh = dh_prev
    return grads, dh


def simple_forward(params, inputs):
    """``l <- tanh(A l + B x)`` from ``l = 0``; same shapes as :func:`gru_forward`."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[:, None, :]
    h_dim, d = params["B"].shape
    if x.ndim != 3 or x.shape[2] != d or params["A"].shape != (h_dim, h_dim):
        raise DataError("simple cell dimension mismatch")
    l = np.zeros((x.shape[1], h_dim))
    steps = []
    for xt in x:
        nxt = np.tanh(l @ params["A"].T + xt @ params["B"].T)
        steps.append((xt, l, nxt))
        l = nxt
    return (l[0] if single else l), steps


def simple_recurrence(params, inputs) -> np.ndarray:
    return simple_forward(params, inputs)[0]


def simple_backward(params, steps, dl):
    grads = {k: np.zeros_like(params[k]) for k in SIMPLE_PARAMS}
    dl = np.array(dl, dtype=np.float64, ndmin=2)
    for xt, l_prev, l_new in reversed(steps):
        da = dl * (1.0 - l_new * l_new)
        grads["A"] += da.T @ l_prev
        grads["B"] += da.T @ xt
        dl = da @ params["A"]
    return grads, dl


# ----------------------------------------------------------------------- head


def _head_forward(params, hu, hv):
    c = np.concatenate([hu, hv], axis=-1)
    if "head_W" in params:
        g = np.tanh(c @ params["head_W"].T + params["head_c"])
        logit = g @ params["head_w"] + params["head_b"]
        return sigmoid(logit), (c, g)
    return sigmoid(c @ params["head_w"] + params["head_b"]), (c, None)


def link_score(params, hu, hv):
    """Probability that the pair with states ``hu``, ``hv`` is linked."""
    return _head_forward(params, np.asarray(hu, dtype=np.float64), np.asarray(hv, dtype=np.float64))[0]


def bce_loss(p, p_hat):
    """Binary cross-entropy; each log argument is floored at ``PROB_CLAMP``.

    Flooring the arguments instead of clipping ``p_hat`` keeps a perfect
    prediction at exactly zero loss.
    """
    p = np.asarray(p, dtype=np.float64)
    p_hat = np.asarray(p_hat, dtype=np.float64)
    pos = np.where(p > 0, -p * np.log(np.maximum(p_hat, PROB_CLAMP)), 0.0)
    neg = np.where(p < 1, -(1.0 - p) * np.log(np.maximum(1.0 - p_hat, PROB_CLAMP)), 0.0)
    return np.maximum(pos + neg, 0.0)


# ------------------------------------------------------------ batch interface


@dataclass
class ForwardCache:
    fingerprint: str
    cell: str
    nodes: np.ndarray
    iu: np.ndarray
    iv: np.ndarray
    steps: list
    states: np.ndarray
    head: tuple
    probs: np.ndarray


def cell_kind(params) -> str:
    return "gru" if "W_z" in params else "simple"


def forward(params, sequences, pairs) -> ForwardCache:
    """Probabilities for ``pairs`` given ``sequences`` of shape ``(T, N, d)``.

    Only nodes that occur in ``pairs`` are run through the recurrence.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    nodes, inv = np.unique(pairs, return_inverse=True)
    inv = inv.reshape(-1, 2)
    cell = cell_kind(params)
    x = np.asarray(sequences)[:, nodes, :]
    if cell == "gru":
        states, steps = gru_forward(params, x)
    else:
        states, steps = simple_forward(params, x)
    probs, head = _head_forward(params, states[inv[:, 0]], states[inv[:, 1]])
    return ForwardCache(params_fingerprint(params), cell, nodes, inv[:, 0], inv[:, 1], steps, states, head, probs)


def backward(labels, params, cache: ForwardCache) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch BCE with respect to every parameter."""
    if cache.fingerprint != params_fingerprint(params):
        raise ValueError("stale cache: parameters changed since the forward pass")
    y = np.asarray(labels, dtype=np.float64)
    b = y.size
    h = cache.states.shape[1]
    dlogit = (cache.probs - y) / b
    c, g = cache.head
    grads: dict[str, np.ndarray] = {"head_b": np.asarray(dlogit.sum())}
    if g is not None:
        grads["head_w"] = g.T @ dlogit
        da = np.outer(dlogit, params["head_w"]) * (1.0 - g * g)
        grads["head_W"] = da.T @ c
        grads["head_c"] = da.sum(axis=0)
        dc = da @ params["head_W"]
    else:
        grads["head_w"] = c.T @ dlogit
        dc = np.outer(dlogit, params["head_w"])
    d_states = np.zeros_like(cache.states)
    np.add.at(d_states, cache.iu, dc[:, :h])
    np.add.at(d_states, cache.iv, dc[:, h:])
    if cache.cell == "gru":
        cell_grads, _ = gru_backward(params, cache.steps, d_states)
    else:
        cell_grads, _ = simple_backward(params, cache.steps, d_states)
    grads.update(cell_grads)
    return grads


def batch_loss(params, sequences, pairs, labels) -> float:
    probs = forward(params, sequences, pairs).probs
    return float(np.mean(bce_loss(np.asarray(labels, dtype=np.float64), probs)))


# ----------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    v: dict = field(default_factory=dict)
    s: dict = field(default_factory=dict)


def adam_step(state: AdamState, params, grads):
    """One Adam update of every parameter in place; returns ``(params, state)``."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, g in grads.items():
        p = params[name]
        if np.shape(g) != np.shape(p):
            raise ValueError(f"gradient shape {np.shape(g)} does not match {name} {np.shape(p)}")
        if name not in state.v:
            state.v[name] = np.zeros_like(p)
            state.s[name] = np.zeros_like(p)
        state.v[name] = state.beta1 * state.v[name] + (1.0 - state.beta1) * g
        state.s[name] = state.beta2 * state.s[name] + (1.0 - state.beta2) * (g * g)
        v_hat = state.v[name] / bc1
        s_hat = state.s[name] / bc2
        params[name] = p - state.lr * v_hat / (np.sqrt(s_hat) + state.eps)
    return params, state


# ------------------------------------------------------------------- training


@dataclass
class ModelState:
    config: TrainConfig
    params: dict
    adam: AdamState
    input_scale: float = 1.0
    input_dim: int = 0
    loss_history: list = field(default_factory=list)

    def sequences(self, aligned) -> np.ndarray:
        data = _series_array(aligned)
        if data.shape[2] != self.input_dim:
            raise DataError(f"series dim {data.shape[2]} does not match model input dim {self.input_dim}")
        return data / self.input_scale

    def predict(self, aligned, pairs) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        seq = self.sequences(aligned)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= seq.shape[1]):
            raise DataError("pair references a node missing from the embedding series")
        if pairs.size == 0:
            return np.empty(0)
        probs = forward(self.params, seq, pairs).probs
        if self.config.symmetric:
            probs = 0.5 * (probs + forward(self.params, seq, pairs[:, ::-1]).probs)
        return probs

    def to_json(self) -> dict:
        def tensors(d):
            return {k: {"shape": list(np.shape(v)), "data": np.ravel(v).tolist()} for k, v in sorted(d.items())}

        a = self.adam
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "tool_version": __version__,
            "config": asdict(self.config),
            "input_dim": self.input_dim,
            "input_scale": self.input_scale,
            "step": a.t,
            "params": tensors(self.params),
            "adam": {
                "lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps, "t": a.t,
                "v": tensors(a.v), "s": tensors(a.s),
            },
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelState":
        if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
            raise DataError("not a supported checkpoint")

        def arrays(d):
            return {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d.items()}

        a = doc["adam"]
        adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"], a["t"], arrays(a["v"]), arrays(a["s"]))
        return cls(
            TrainConfig(**doc["config"]),
            arrays(doc["params"]),
            adam,
            float(doc["input_scale"]),
            int(doc["input_dim"]),
            list(doc.get("loss_history", [])),
        )

    def dumps(self, **extra) -> str:
        doc = self.to_json()
        doc.update(extra)
        return json.dumps(doc, separators=(",", ":"))


def _series_array(aligned) -> np.ndarray:
    # ndarrays have their own .data buffer, so test the type rather than the attribute
    if isinstance(aligned, np.ndarray):
        return aligned.astype(np.float64, copy=False)
    return np.asarray(aligned.data if hasattr(aligned, "num_snapshots") else aligned, dtype=np.float64)


def series_scale(data: np.ndarray) -> float:
    rms = float(np.sqrt(np.mean(np.square(data)))) if data.size else 0.0
    return rms if rms > 0 and np.isfinite(rms) else 1.0


def fit(aligned, split, cfg: TrainConfig | None = None) -> ModelState:
    """Train on ``split``'s training pairs; returns the final model state.

    The whole series is divided by one scalar (its RMS) before entering the
    recurrence. With ``cfg.symmetric`` every pair is also trained in reversed
    order, for undirected graphs where ``(u, v)`` and ``(v, u)`` are the same
    link. ``loss_history[0]`` is the loss at initialisation and entry ``e``
    the full training-set loss after epoch ``e``.
    """
    cfg = (cfg or TrainConfig()).validate()
    data = _series_array(aligned)
    if not np.all(np.isfinite(data)):
        raise NumericalError("embedding series contains non-finite values")
    pairs, labels = split.train_examples()
    if len(pairs) == 0:
        raise DataError("empty training set")
    if cfg.symmetric:
        pairs = np.vstack([pairs, pairs[:, ::-1]])
        labels = np.concatenate([labels, labels])
    if pairs.min() < 0 or pairs.max() >= data.shape[1]:
        raise DataError("training pair references a node missing from the embedding series")

    d = data.shape[2]
    state = ModelState(
        cfg,
        init_params(cfg, d, derive_seed(cfg.seed, 7)),
        AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps),
        series_scale(data),
        d,
    )
    seq = data / state.input_scale
    rng = SplitMix64(derive_seed(cfg.seed, 8))

    def full_loss():
        loss = batch_loss(state.params, seq, pairs, labels)
        if not np.isfinite(loss):
            raise NumericalError("training loss became non-finite")
        return loss

    state.loss_history.append(full_loss())
    m = len(pairs)
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            cache = forward(state.params, seq, pairs[idx])
            grads = backward(labels[idx], state.params, cache)
            adam_step(state.adam, state.params, grads)
        state.loss_history.append(full_loss())
    return state
