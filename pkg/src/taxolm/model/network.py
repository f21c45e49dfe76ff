"""Toy transformer encoder with token-restoration and pair-relation heads.

Everything is float64 numpy with hand-written reverse-mode gradients, so the
whole graph is exactly checkable against central differences. Verifiability
beats speed at this scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteGradient, ShapeError
from ..masking import IGNORE_INDEX
from ..tokenizer import PAD_ID

NUM_RELATIONS = 3


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int
    layers: int = 2
    hidden_dim: int = 32
    heads: int = 2
    ffn_dim: int = 64
    dropout: float = 0.0

    def __post_init__(self):
        if self.vocab_size < 1 or self.max_len < 1:
            raise ValueError("vocab_size and max_len must be positive")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.hidden_dim % self.heads != 0:
            raise ValueError("hidden_dim must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_json(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "max_len": self.max_len,
            "layers": self.layers,
            "hidden_dim": self.hidden_dim,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "dropout": self.dropout,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass
class ForwardOutput:
    hidden_states: np.ndarray  # (B, T, D) final-layer states
    mlm_logits: np.ndarray  # (B, T, V)
    erp_logits: np.ndarray  # (B, 3) from the CLS state


INIT_STD = 0.02
LN_EPS = 1e-5


def init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Weights ~ Normal(0, 0.02^2), biases 0, normalization gains 1."""
    d, f, v = config.hidden_dim, config.ffn_dim, config.vocab_size

    def w(*shape):
        return rng.normal(0.0, INIT_STD, size=shape)

    params: dict[str, np.ndarray] = {
        "tok_emb": w(v, d),
        "pos_emb": w(config.max_len, d),
    }
    for i in range(config.layers):
        p = f"layers.{i}."
        for name in ("w_q", "w_k", "w_v", "w_o"):
            params[p + f"attn.{name}"] = w(d, d)
        # No key bias: a constant shift over keys cancels inside softmax, so
        # its gradient is identically zero and the parameter never moves.
        for name in ("b_q", "b_v", "b_o"):
            params[p + f"attn.{name}"] = np.zeros(d)
        params[p + "ln1.gain"] = np.ones(d)
        params[p + "ln1.bias"] = np.zeros(d)
        params[p + "ffn.w1"] = w(d, f)
        params[p + "ffn.b1"] = np.zeros(f)
        params[p + "ffn.w2"] = w(f, d)
        params[p + "ffn.b2"] = np.zeros(d)
        params[p + "ln2.gain"] = np.ones(d)
        params[p + "ln2.bias"] = np.zeros(d)
    params["mlm_head.w"] = w(d, v)
    params["mlm_head.b"] = np.zeros(v)
    params["erp_head.w"] = w(d, NUM_RELATIONS)
    params["erp_head.b"] = np.zeros(NUM_RELATIONS)
    return params


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


_GELU_C = 0.044715
_GELU_K = math.sqrt(2.0 / math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(_GELU_K * (x + _GELU_C * x**3)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(_GELU_K * (x + _GELU_C * x**3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * _GELU_K * (1.0 + 3.0 * _GELU_C * x**2)


def _ln_forward(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return gain * xhat + bias, (xhat, inv_std, gain)


def _ln_backward(dy, cache):
    xhat, inv_std, gain = cache
    dxhat = dy * gain
    dx = (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    ) * inv_std
    dgain = (dy * xhat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    return dx, dgain, dbias


def _split_heads(x, heads):
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _dropout_mask(shape, rate, rng):
    if rate <= 0.0:
        return None
    if rng is None:
        raise ValueError("dropout > 0 requires a generator in training mode")
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _check_batch(config: ModelConfig, input_ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(input_ids)
    if ids.ndim != 2:
        raise ShapeError(f"input_ids must be 2-d (batch, length), got shape {ids.shape}")
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("input_ids must be integers")
    if ids.shape[1] > config.max_len:
        raise ShapeError(f"sequence length {ids.shape[1]} exceeds max_len {config.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise ShapeError("token id out of vocabulary range")
    return ids.astype(np.int64, copy=False)


def _forward_cached(params, config, input_ids, rng=None, train=False):
    ids = _check_batch(config, input_ids)
    b, t = ids.shape
    h = config.heads
    scale = 1.0 / math.sqrt(config.hidden_dim // h)
    rate = config.dropout if train else 0.0

    pad = ids == PAD_ID
    key_bias = np.where(pad, -np.inf, 0.0)[:, None, None, :]

    x = params["tok_emb"][ids] + params["pos_emb"][:t][None, :, :]
    drop_emb = _dropout_mask(x.shape, rate, rng)
    if drop_emb is not None:
        x = x * drop_emb

    layer_caches = []
    for i in range(config.layers):
        p = f"layers.{i}."
        x_in = x
        q_full = x_in @ params[p + "attn.w_q"] + params[p + "attn.b_q"]
        k_full = x_in @ params[p + "attn.w_k"]
        v_full = x_in @ params[p + "attn.w_v"] + params[p + "attn.b_v"]
        q = _split_heads(q_full, h)
        k = _split_heads(k_full, h)
        v = _split_heads(v_full, h)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + key_bias
        attn = softmax(scores)
        ctx = _merge_heads(attn @ v)
        attn_out = ctx @ params[p + "attn.w_o"] + params[p + "attn.b_o"]
        drop1 = _dropout_mask(attn_out.shape, rate, rng)
        if drop1 is not None:
            attn_out = attn_out * drop1
        r1 = x_in + attn_out
        x1, ln1 = _ln_forward(r1, params[p + "ln1.gain"], params[p + "ln1.bias"])
        hpre = x1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        act = gelu(hpre)
        ffn_out = act @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        drop2 = _dropout_mask(ffn_out.shape, rate, rng)
        if drop2 is not None:
            ffn_out = ffn_out * drop2
        r2 = x1 + ffn_out
        x, ln2 = _ln_forward(r2, params[p + "ln2.gain"], params[p + "ln2.bias"])
        layer_caches.append((x_in, q, k, v, attn, ctx, drop1, ln1, x1, hpre, act, drop2, ln2))

    mlm_logits = x @ params["mlm_head.w"] + params["mlm_head.b"]
    cls = x[:, 0, :]
    erp_logits = cls @ params["erp_head.w"] + params["erp_head.b"]
    output = ForwardOutput(hidden_states=x, mlm_logits=mlm_logits, erp_logits=erp_logits)
    cache = (ids, drop_emb, layer_caches, x, scale)
    return output, cache


def forward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    input_ids: np.ndarray,
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> ForwardOutput:
    """Run the encoder and both heads over a padded id batch.

    PAD positions are excluded as attention keys, so they contribute nothing
    to any other position's state. With dropout 0 the result is fully
    deterministic.
    """
    output, _ = _forward_cached(params, config, input_ids, rng=rng, train=train)
    return output


def loss(
    output: ForwardOutput,
    mlm_labels: np.ndarray,
    erp_labels: np.ndarray,
    mlm_reduction: str = "mean",
) -> tuple[float, float, float]:
    """Joint objective: restoration loss plus relation loss.

    The restoration term averages negative log-likelihood over labeled
    positions (or sums, with mlm_reduction="sum"); the relation term
    averages over the batch. Zero labeled positions yield a 0 restoration
    term. total == mlm + erp exactly.
    """
    if mlm_reduction not in ("mean", "sum"):
        raise ValueError("mlm_reduction must be 'mean' or 'sum'")
    labels = np.asarray(mlm_labels)
    erp = np.asarray(erp_labels).reshape(-1)
    if labels.shape != output.mlm_logits.shape[:2]:
        raise ShapeError("mlm_labels shape does not match logits")
    if erp.shape[0] != output.erp_logits.shape[0]:
        raise ShapeError("erp_labels length does not match batch")

    labeled = labels != IGNORE_INDEX
    n_labeled = int(labeled.sum())
    if n_labeled:
        logp = log_softmax(output.mlm_logits)
        safe = np.where(labeled, labels, 0)
        picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
        mlm_sum = -picked[labeled].sum()
        mlm = mlm_sum / n_labeled if mlm_reduction == "mean" else mlm_sum
    else:
        mlm = 0.0

    elogp = log_softmax(output.erp_logits)
    erp_loss = float(-elogp[np.arange(erp.shape[0]), erp].mean())
    mlm = float(mlm)
    return mlm + erp_loss, mlm, erp_loss


def backward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    batch: dict[str, np.ndarray],
    mlm_reduction: str = "mean",
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> tuple[dict[str, np.ndarray], tuple[float, float, float]]:
    """Exact reverse-mode gradients of the joint loss for every parameter.

    `batch` carries input_ids (B,T), mlm_labels (B,T) with IGNORE_INDEX at
    unlabeled positions, and erp_labels (B,).
    """
    output, cache = _forward_cached(params, config, batch["input_ids"], rng=rng, train=train)
    ids, drop_emb, layer_caches, x_final, scale = cache
    losses = loss(output, batch["mlm_labels"], batch["erp_labels"], mlm_reduction)

    b, t = ids.shape
    labels = np.asarray(batch["mlm_labels"])
    erp_labels = np.asarray(batch["erp_labels"]).reshape(-1)
    grads: dict[str, np.ndarray] = {}

    # Restoration head.
    labeled = labels != IGNORE_INDEX
    n_labeled = int(labeled.sum())
    if n_labeled:
        probs = softmax(output.mlm_logits)
        safe = np.where(labeled, labels, 0)
        np.put_along_axis(probs, safe[..., None], np.take_along_axis(probs, safe[..., None], -1) - 1.0, -1)
        weight = 1.0 / n_labeled if mlm_reduction == "mean" else 1.0
        dlogits = probs * (labeled[..., None] * weight)
    else:
        dlogits = np.zeros_like(output.mlm_logits)
    grads["mlm_head.w"] = np.einsum("btd,btv->dv", x_final, dlogits)
    grads["mlm_head.b"] = dlogits.sum(axis=(0, 1))
    dx = dlogits @ params["mlm_head.w"].T

    # Relation head reads the CLS state.
    eprobs = softmax(output.erp_logits)
    eprobs[np.arange(b), erp_labels] -= 1.0
    derp = eprobs / b
    cls = x_final[:, 0, :]
    grads["erp_head.w"] = cls.T @ derp
    grads["erp_head.b"] = derp.sum(axis=0)
    dx[:, 0, :] += derp @ params["erp_head.w"].T

    for i in reversed(range(config.layers)):
        p = f"layers.{i}."
        x_in, q, k, v, attn, ctx, drop1, ln1, x1, hpre, act, drop2, ln2 = layer_caches[i]

        dr2, dg2, db2 = _ln_backward(dx, ln2)
        grads[p + "ln2.gain"] = dg2
        grads[p + "ln2.bias"] = db2
        dffn = dr2 if drop2 is None else dr2 * drop2
        grads[p + "ffn.w2"] = np.einsum("btf,btd->fd", act, dffn)
        grads[p + "ffn.b2"] = dffn.sum(axis=(0, 1))
        dact = dffn @ params[p + "ffn.w2"].T
        dhpre = dact * gelu_grad(hpre)
        grads[p + "ffn.w1"] = np.einsum("btd,btf->df", x1, dhpre)
        grads[p + "ffn.b1"] = dhpre.sum(axis=(0, 1))
        dx1 = dr2 + dhpre @ params[p + "ffn.w1"].T

        dr1, dg1, db1 = _ln_backward(dx1, ln1)
        grads[p + "ln1.gain"] = dg1
        grads[p + "ln1.bias"] = db1
        dattn_out = dr1 if drop1 is None else dr1 * drop1
        grads[p + "attn.w_o"] = np.einsum("btd,bte->de", ctx, dattn_out)
        grads[p + "attn.b_o"] = dattn_out.sum(axis=(0, 1))
        dctx = _split_heads(dattn_out @ params[p + "attn.w_o"].T, config.heads)
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq = dscores @ k * scale
        dk = dscores.transpose(0, 1, 3, 2) @ q * scale
        dq_full = _merge_heads(dq)
        dk_full = _merge_heads(dk)
        dv_full = _merge_heads(dv)
        for name, dmat in (("w_q", dq_full), ("w_k", dk_full), ("w_v", dv_full)):
            grads[p + f"attn.{name}"] = np.einsum("btd,bte->de", x_in, dmat)
        for name, dmat in (("b_q", dq_full), ("b_v", dv_full)):
            grads[p + f"attn.{name}"] = dmat.sum(axis=(0, 1))
        dx = (
            dr1
            + dq_full @ params[p + "attn.w_q"].T
            + dk_full @ params[p + "attn.w_k"].T
            + dv_full @ params[p + "attn.w_v"].T
        )

    if drop_emb is not None:
        dx = dx * drop_emb
    gtok = np.zeros_like(params["tok_emb"])
    np.add.at(gtok, ids, dx)
    grads["tok_emb"] = gtok
    gpos = np.zeros_like(params["pos_emb"])
    gpos[:t] = dx.sum(axis=0)
    grads["pos_emb"] = gpos

    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"non-finite gradient in {name!r}")
    return grads, losses
