"""Transformer building blocks over :class:`~duodec.core.tensor.Tensor`."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping

import numpy as np

from ..errors import ConfigError, DimensionError, InputError
from . import tensor as T
from .tensor import Tensor


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = x @ w
    return y if b is None else y + b


def _check_mask(mask, lq: int, lk: int) -> np.ndarray | None:
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-2:] != (lq, lk):
        raise DimensionError(f"mask shape {mask.shape} does not match {lq}x{lk} attention")
    return mask


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask=None, return_weights=False):
    """softmax(q k^T / sqrt(d_k)) v with a boolean mask (True = may attend).

    Works on any number of leading batch axes. A query row with no allowed key
    returns zeros.
    """
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query/key widths differ: {q.shape[-1]} vs {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError("keys and values must have the same length")
    mask = _check_mask(mask, q.shape[-2], k.shape[-2])
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(q.shape[-1]))
    weights = T.softmax(scores, mask)
    out = weights @ v
    return (out, weights) if return_weights else out


def empty_rows(mask, lq: int) -> np.ndarray | None:
    """(lq, 1) float indicator of query rows that may attend something, or None if all can."""
    if mask is None:
        return None
    live = np.asarray(mask, dtype=bool).any(axis=-1)
    if live.all():
        return None
    return live[..., None]


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    x = x.reshape(*lead, n, heads, d // heads)
    return x.swapaxes(-2, -3)


def _merge_heads(x: Tensor) -> Tensor:
    x = x.swapaxes(-2, -3)
    *lead, n, h, dh = x.shape
    return x.reshape(*lead, n, h * dh)


def multi_head_attention(q_in: Tensor, k_in: Tensor, v_in: Tensor, mask, params: Mapping[str, Tensor],
                         heads: int, dropout: float = 0.0, rng=None, stats: dict | None = None) -> Tensor:
    """Project, attend per head, concatenate and project back.

    ``params`` holds ``wq, bq, wk, bk, wv, bv, wo, bo``. Query rows whose mask
    row is empty produce an exact zero vector (output bias included).
    """
    d_model = params["wq"].shape[0]
    if heads < 1 or d_model % heads:
        raise ConfigError(f"model dimension {d_model} is not divisible by {heads} heads")
    q = _split_heads(linear(q_in, params["wq"], params["bq"]), heads)
    k = _split_heads(linear(k_in, params["wk"], params["bk"]), heads)
    v = _split_heads(linear(v_in, params["wv"], params["bv"]), heads)
    if mask is not None:
        mask = _check_mask(mask, q_in.shape[-2], k_in.shape[-2])
        mask = np.expand_dims(mask, -3)
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(d_model // heads))
    weights = T.softmax(scores, mask)
    if stats is not None:
        stats["weights"] = weights.data
    weights = T.dropout(weights, dropout, rng)
    out = linear(_merge_heads(weights @ v), params["wo"], params["bo"])
    live = empty_rows(mask[..., 0, :, :] if mask is not None else None, q_in.shape[-2])
    if live is not None:
        out = out * live.astype(out.dtype)
    return out


def feed_forward(x: Tensor, params: Mapping[str, Tensor], dropout: float = 0.0, rng=None) -> Tensor:
    h = T.relu(linear(x, params["w1"], params["b1"]))
    h = T.dropout(h, dropout, rng)
    return linear(h, params["w2"], params["b2"])


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return T.layer_norm(x, gain, bias, eps)


def conv_output_length(length: int, kernel: int = 3, stride: int = 2, padding: int = 1) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def subsampled_length(length: int) -> int:
    """Frames left after the two stride-2 convolutions; equals ceil(length / 4)."""
    return conv_output_length(conv_output_length(length))


def _conv1d_k3s2p1(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    *lead, n, d = x.shape
    out_len = conv_output_length(n)
    zeros = T.Tensor(np.zeros((*lead, 1, d), dtype=x.dtype))
    need = 2 * out_len + 1  # padded length consumed by the last window
    right = need - (n + 1)
    parts = [zeros, x] + ([T.Tensor(np.zeros((*lead, right, d), dtype=x.dtype))] if right > 0 else [])
    padded = T.concat(parts, axis=-2)
    taps = [padded[..., j:j + 2 * out_len:2, :] for j in range(3)]
    frames = T.concat(taps, axis=-1)
    return linear(frames, w, b)


def conv_subsample(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Two ReLU convolutions (kernel 3, stride 2, padding 1): T frames -> ceil(T/4).

    ``params`` holds ``conv1.w`` (3*d_feat x d_model), ``conv1.b``, ``conv2.w``
    (3*d_model x d_model) and ``conv2.b``; the kernel taps are stacked along the
    input axis of each weight.
    """
    if x.shape[-2] < 4:
        raise InputError(f"need at least 4 input frames, got {x.shape[-2]}")
    h = T.relu(_conv1d_k3s2p1(x, params["conv1.w"], params["conv1.b"]))
    return T.relu(_conv1d_k3s2p1(h, params["conv2.w"], params["conv2.b"]))


@lru_cache(maxsize=64)
def _positions(length: int, d_model: int, dtype_name: str) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    inv_freq = np.exp(-math.log(10000.0) * np.arange(0, d_model, 2, dtype=np.float64) / d_model)
    table = np.empty((length, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(pos * inv_freq)
    table[:, 1::2] = np.cos(pos * inv_freq)
    table = table.astype(dtype_name)
    table.flags.writeable = False
    return table


def sinusoidal_positions(length: int, d_model: int, dtype=None) -> np.ndarray:
    """Sine on even columns, cosine on odd columns, geometric wavelengths up to 10000."""
    if d_model % 2:
        raise ConfigError("d_model must be even for sinusoidal positions")
    return _positions(int(length), int(d_model), np.dtype(dtype or T.get_default_dtype()).name)


def label_smoothed_loss(logits: Tensor, targets, pad_id: int | None = None, eps: float = 0.1) -> Tensor:
    """Mean cross-entropy against a smoothed target over non-pad positions.

    The gold token gets ``1 - eps`` and every other token ``eps / (V - 1)``,
    so ``eps = 0`` is plain negative log-likelihood.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("smoothing eps must lie in [0, 1)")
    targets = np.asarray(targets)
    vocab = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"targets {targets.shape} do not match logits {logits.shape}")
    keep = np.ones(targets.shape, dtype=bool) if pad_id is None else targets != pad_id
    count = int(keep.sum())
    if count == 0:
        raise InputError("every target position is padding; the mean is undefined")
    gold = targets[keep]
    if gold.min() < 0 or gold.max() >= vocab:
        raise InputError("target id outside the vocabulary")
    other = eps / (vocab - 1) if vocab > 1 else 0.0
    q = np.full(logits.shape, other, dtype=logits.dtype)
    np.put_along_axis(q, np.where(keep, targets, 0)[..., None], 1.0 - eps, axis=-1)
    q *= keep[..., None]
    lp = T.log_softmax(logits)
    return -(lp * T.Tensor(q, dtype=logits.dtype)).sum() * (1.0 / count)
