"""Post-norm Transformer encoder with hand-written backpropagation.

Parameters are a flat ``dict`` of numpy arrays keyed by the names returned
from :func:`parameter_names`; that order is also the checkpoint order.
Weights multiply from the right (``x @ W``), so a projection from ``a`` to
``b`` features has shape ``(a, b)``.

All batched functions take ``ids`` of shape ``(B, T)`` and a boolean
``mask`` marking real (non-padding) positions.  Padding keys are excluded
from attention, so a padded row never influences a real one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BadConfig, IdOutOfRange, PositionOutOfRange, SequenceTooLong

LN_EPS = 1e-12
INIT_STD = 0.02
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 2
    hidden_size: int = 64
    n_heads: int = 4
    ffn_size: int = 0  # 0 means 4 * hidden_size
    max_positions: int = 128
    vocab_size: int = 0
    dropout_rate: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if self.ffn_size == 0:
            object.__setattr__(self, "ffn_size", 4 * self.hidden_size)
        self.validate()

    def validate(self) -> None:
        if min(self.n_layers, self.hidden_size, self.n_heads, self.max_positions, self.vocab_size) < 1:
            raise BadConfig("layer count, sizes and vocabulary size must be positive")
        if self.hidden_size % self.n_heads:
            raise BadConfig(f"hidden_size {self.hidden_size} not divisible by n_heads {self.n_heads}")
        if self.ffn_size < self.hidden_size:
            raise BadConfig("ffn_size must be >= hidden_size")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise BadConfig("dropout_rate must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise BadConfig("dtype must be float32 or float64")

    @property
    def head_size(self) -> int:
        return self.hidden_size // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, F, V = config.hidden_size, config.ffn_size, config.vocab_size
    shapes = {
        "embeddings.token": (V, H),
        "embeddings.position": (config.max_positions, H),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}."
        for proj in ("query", "key", "value", "output"):
            shapes[p + f"attention.{proj}.weight"] = (H, H)
            shapes[p + f"attention.{proj}.bias"] = (H,)
        shapes[p + "attention_norm.scale"] = (H,)
        shapes[p + "attention_norm.shift"] = (H,)
        shapes[p + "ffn.in.weight"] = (H, F)
        shapes[p + "ffn.in.bias"] = (F,)
        shapes[p + "ffn.out.weight"] = (F, H)
        shapes[p + "ffn.out.bias"] = (H,)
        shapes[p + "ffn_norm.scale"] = (H,)
        shapes[p + "ffn_norm.shift"] = (H,)
    shapes["mlm.bias"] = (V,)
    return shapes


def parameter_names(config: ModelConfig) -> list[str]:
    return list(parameter_shapes(config))


def truncated_normal(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    """Normal draws redrawn until they fall within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_parameters(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    config.validate()
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.dtype)
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".scale"):
            value = np.ones(shape)
        elif name.endswith(".bias") or name.endswith(".shift"):
            value = np.zeros(shape)
        else:
            value = truncated_normal(rng, shape)
        params[name] = value.astype(dtype)
    return params


# elementwise pieces

def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x ** 3)))


def gelu_grad(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def layer_norm(z, scale, shift):
    """Returns ``(output, normalized, inverse_std)``."""
    mu = z.mean(axis=-1, keepdims=True)
    zc = z - mu
    inv = 1.0 / np.sqrt((zc * zc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = zc * inv
    return xhat * scale + shift, xhat, inv


def layer_norm_backward(dout, scale, xhat, inv):
    lead = tuple(range(dout.ndim - 1))
    dscale = (dout * xhat).sum(axis=lead)
    dshift = dout.sum(axis=lead)
    dx = dout * scale
    dz = inv * (dx - dx.mean(axis=-1, keepdims=True) - xhat * (dx * xhat).mean(axis=-1, keepdims=True))
    return dz, dscale, dshift


def _dropout_mask(rng, shape, rate, dtype):
    if rng is None or rate <= 0.0:
        return None
    return ((rng.random(shape) >= rate) / (1.0 - rate)).astype(dtype)


@dataclass
class LayerCache:
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    probs: np.ndarray
    probs_drop: np.ndarray | None
    ctx: np.ndarray
    attn_drop: np.ndarray | None
    ln1_xhat: np.ndarray
    ln1_inv: np.ndarray
    y1: np.ndarray
    f1: np.ndarray
    g: np.ndarray
    ffn_drop: np.ndarray | None
    ln2_xhat: np.ndarray
    ln2_inv: np.ndarray


@dataclass
class ForwardCache:
    ids: np.ndarray
    mask: np.ndarray
    emb_drop: np.ndarray | None
    layers: list[LayerCache] = field(default_factory=list)

    def attention(self, layer: int) -> np.ndarray:
        """Attention probabilities ``(B, A, T, T)`` of one layer."""
        return self.layers[layer].probs


def check_inputs(config: ModelConfig, ids: np.ndarray) -> None:
    if ids.shape[-1] > config.max_positions:
        raise SequenceTooLong(f"length {ids.shape[-1]} exceeds max_positions {config.max_positions}")
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise IdOutOfRange(f"piece ids must lie in [0, {config.vocab_size})")


def forward(params, config: ModelConfig, ids, mask=None, rng: np.random.Generator | None = None):
    """Run the encoder; ``rng`` enables dropout (training mode).

    Returns ``(hidden, cache)`` with ``hidden`` of shape ``(B, T, H)``.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    check_inputs(config, ids)
    B, T = ids.shape
    mask = np.ones((B, T), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(B, T)
    A, dh, H = config.n_heads, config.head_size, config.hidden_size
    rate = config.dropout_rate
    dtype = params["embeddings.token"].dtype
    scale = 1.0 / math.sqrt(dh)

    x = params["embeddings.token"][ids] + params["embeddings.position"][:T]
    emb_drop = _dropout_mask(rng, x.shape, rate, dtype)
    if emb_drop is not None:
        x = x * emb_drop
    cache = ForwardCache(ids, mask, emb_drop)
    key_ok = mask[:, None, None, :]

    for i in range(config.n_layers):
        p = f"layers.{i}."

        def proj(name, inp):
            return inp @ params[p + f"attention.{name}.weight"] + params[p + f"attention.{name}.bias"]

        q = proj("query", x).reshape(B, T, A, dh).transpose(0, 2, 1, 3)
        k = proj("key", x).reshape(B, T, A, dh).transpose(0, 2, 1, 3)
        v = proj("value", x).reshape(B, T, A, dh).transpose(0, 2, 1, 3)
        scores = np.where(key_ok, (q @ k.transpose(0, 1, 3, 2)) * scale, -np.inf)
        probs = softmax(scores)
        probs_drop = _dropout_mask(rng, probs.shape, rate, dtype)
        pd = probs * probs_drop if probs_drop is not None else probs
        ctx = (pd @ v).transpose(0, 2, 1, 3).reshape(B, T, H)
        a = proj("output", ctx)
        attn_drop = _dropout_mask(rng, a.shape, rate, dtype)
        if attn_drop is not None:
            a = a * attn_drop
        y1, ln1_xhat, ln1_inv = layer_norm(x + a, params[p + "attention_norm.scale"],
                                           params[p + "attention_norm.shift"])
        f1 = y1 @ params[p + "ffn.in.weight"] + params[p + "ffn.in.bias"]
        g = gelu(f1)
        f2 = g @ params[p + "ffn.out.weight"] + params[p + "ffn.out.bias"]
        ffn_drop = _dropout_mask(rng, f2.shape, rate, dtype)
        if ffn_drop is not None:
            f2 = f2 * ffn_drop
        y2, ln2_xhat, ln2_inv = layer_norm(y1 + f2, params[p + "ffn_norm.scale"], params[p + "ffn_norm.shift"])
        cache.layers.append(LayerCache(x, q, k, v, probs, probs_drop, ctx, attn_drop, ln1_xhat, ln1_inv,
                                       y1, f1, g, ffn_drop, ln2_xhat, ln2_inv))
        x = y2
    return x, cache


def zero_grads(params) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(value) for name, value in params.items()}


def backward(params, config: ModelConfig, cache: ForwardCache, d_hidden, grads=None):
    """Accumulate encoder parameter gradients for upstream ``d_hidden``.

    ``grads`` (if given) is added to in place and returned; the MLM bias is
    left untouched here.
    """
    if grads is None:
        grads = zero_grads(params)
    B, T = cache.ids.shape
    A, dh, H = config.n_heads, config.head_size, config.hidden_size
    scale = 1.0 / math.sqrt(dh)
    dx = np.asarray(d_hidden).reshape(B, T, H)

    def flat(a):
        return a.reshape(-1, a.shape[-1])

    for i in reversed(range(config.n_layers)):
        p = f"layers.{i}."
        c = cache.layers[i]
        # feed-forward sub-layer
        dz2, dsc, dsh = layer_norm_backward(dx, params[p + "ffn_norm.scale"], c.ln2_xhat, c.ln2_inv)
        grads[p + "ffn_norm.scale"] += dsc
        grads[p + "ffn_norm.shift"] += dsh
        df2 = dz2 * c.ffn_drop if c.ffn_drop is not None else dz2
        grads[p + "ffn.out.weight"] += flat(c.g).T @ flat(df2)
        grads[p + "ffn.out.bias"] += flat(df2).sum(axis=0)
        df1 = (df2 @ params[p + "ffn.out.weight"].T) * gelu_grad(c.f1)
        grads[p + "ffn.in.weight"] += flat(c.y1).T @ flat(df1)
        grads[p + "ffn.in.bias"] += flat(df1).sum(axis=0)
        dy1 = dz2 + df1 @ params[p + "ffn.in.weight"].T
        # attention sub-layer
        dz1, dsc, dsh = layer_norm_backward(dy1, params[p + "attention_norm.scale"], c.ln1_xhat, c.ln1_inv)
        grads[p + "attention_norm.scale"] += dsc
        grads[p + "attention_norm.shift"] += dsh
        da = dz1 * c.attn_drop if c.attn_drop is not None else dz1
        grads[p + "attention.output.weight"] += flat(c.ctx).T @ flat(da)
        grads[p + "attention.output.bias"] += flat(da).sum(axis=0)
        dctx = (da @ params[p + "attention.output.weight"].T).reshape(B, T, A, dh).transpose(0, 2, 1, 3)
        pd = c.probs * c.probs_drop if c.probs_drop is not None else c.probs
        dv = pd.transpose(0, 1, 3, 2) @ dctx
        dpd = dctx @ c.v.transpose(0, 1, 3, 2)
        dprobs = dpd * c.probs_drop if c.probs_drop is not None else dpd
        dscores = c.probs * (dprobs - (dprobs * c.probs).sum(axis=-1, keepdims=True)) * scale
        dq = dscores @ c.k
        dk = dscores.transpose(0, 1, 3, 2) @ c.q
        dx_in = dz1
        for name, dproj in (("query", dq), ("key", dk), ("value", dv)):
            dproj = dproj.transpose(0, 2, 1, 3).reshape(B, T, H)
            grads[p + f"attention.{name}.weight"] += flat(c.x).T @ flat(dproj)
            grads[p + f"attention.{name}.bias"] += flat(dproj).sum(axis=0)
            dx_in = dx_in + dproj @ params[p + f"attention.{name}.weight"].T
        dx = dx_in

    if cache.emb_drop is not None:
        dx = dx * cache.emb_drop
    np.add.at(grads["embeddings.token"], cache.ids.reshape(-1), flat(dx))
    grads["embeddings.position"][:T] += dx.sum(axis=0)
    return grads


def encode(params, config: ModelConfig, piece_ids, train_mode: bool = False, seed: int | None = None,
           return_cache: bool = False):
    """Final-layer hidden states ``(T, H)`` for one example.

    ``piece_ids`` may be a sequence of ids or anything with a ``piece_ids``
    attribute (an encoded example).
    """
    ids = np.asarray(getattr(piece_ids, "piece_ids", piece_ids), dtype=np.int64)
    rng = np.random.default_rng(seed) if train_mode else None
    hidden, cache = forward(params, config, ids[None, :], rng=rng)
    return (hidden[0], cache) if return_cache else hidden[0]


def mlm_logits(params, config: ModelConfig, hidden, masked_positions):
    """Vocabulary logits at ``masked_positions`` of a ``(T, H)`` hidden matrix.

    The output projection is tied to the token embedding table.
    """
    hidden = np.asarray(hidden)
    pos = np.asarray(masked_positions, dtype=np.int64).reshape(-1)
    if pos.size and (pos.min() < 0 or pos.max() >= hidden.shape[0]):
        raise PositionOutOfRange(f"masked positions must lie in [0, {hidden.shape[0]})")
    return hidden[pos] @ params["embeddings.token"].T + params["mlm.bias"]


def mlm_backward(params, rows, d_logits, grads):
    """Gradients of the tied MLM projection; returns d(rows)."""
    grads["embeddings.token"] += d_logits.T @ rows
    grads["mlm.bias"] += d_logits.sum(axis=0)
    return d_logits @ params["embeddings.token"]


def cast_parameters(params, dtype) -> dict[str, np.ndarray]:
    return {k: v.astype(dtype) for k, v in params.items()}
