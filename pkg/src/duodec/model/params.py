"""Parameter initialization for the dual-decoder family."""
from __future__ import annotations

import zlib

import numpy as np

from ..core.params import LayerParams
from ..core.tensor import Tensor, get_default_dtype
from .config import ModelConfig


def _spec_attention(out: dict, prefix: str, d: int) -> None:
    for n in ("q", "k", "v", "o"):
        out[f"{prefix}.w{n}"] = ("xavier", (d, d))
        out[f"{prefix}.b{n}"] = ("zeros", (d,))


def _spec_norm(out: dict, prefix: str, d: int) -> None:
    out[f"{prefix}.gain"] = ("ones", (d,))
    out[f"{prefix}.bias"] = ("zeros", (d,))


def _spec_ffn(out: dict, prefix: str, d: int, d_ffn: int) -> None:
    out[f"{prefix}.w1"] = ("xavier", (d, d_ffn))
    out[f"{prefix}.b1"] = ("zeros", (d_ffn,))
    out[f"{prefix}.w2"] = ("xavier", (d_ffn, d))
    out[f"{prefix}.b2"] = ("zeros", (d,))


def _spec_dual(out: dict, prefix: str, where: str, config: ModelConfig) -> None:
    d = config.d_model
    _spec_attention(out, f"{prefix}.dual_{where}_attn", d)
    if config.normalize_dual_input:
        _spec_norm(out, f"{prefix}.dual_{where}_norm", d)
    if config.merge == "sum_learnable":
        out[f"{prefix}.dual_{where}_merge.lam"] = ("zeros", ())
    elif config.merge == "concat":
        out[f"{prefix}.dual_{where}_merge.w"] = ("xavier", (d, 2 * d))
        out[f"{prefix}.dual_{where}_merge.b"] = ("zeros", (d,))


def _spec_decoder(out: dict, stream: str, config: ModelConfig) -> None:
    d, prefix = config.d_model, config.prefix(stream)
    out[f"{prefix}.embed"] = ("embed", (config.vocab_size, d))
    for layer in range(config.dec_layers):
        p = f"{prefix}.layers.{layer}"
        _spec_norm(out, f"{p}.self_norm", d)
        _spec_attention(out, f"{p}.self_attn", d)
        if not (stream == "st" and config.variant == "two_stage"):
            _spec_norm(out, f"{p}.src_norm", d)
            _spec_attention(out, f"{p}.src_attn", d)
        if stream == "st" and config.chained:
            _spec_norm(out, f"{p}.asr_norm", d)
            _spec_attention(out, f"{p}.asr_attn", d)
        if config.has_dual(stream):
            if config.dual_at_self:
                _spec_dual(out, p, "self", config)
            if config.dual_at_source:
                _spec_dual(out, p, "src", config)
        _spec_norm(out, f"{p}.ffn_norm", d)
        _spec_ffn(out, f"{p}.ffn", d, config.d_ffn)
    _spec_norm(out, f"{prefix}.final_norm", d)
    out[f"{prefix}.out.w"] = ("xavier", (d, config.vocab_size))
    out[f"{prefix}.out.b"] = ("zeros", (config.vocab_size,))


def param_shapes(config: ModelConfig) -> dict[str, tuple[str, tuple[int, ...]]]:
    """Name -> (initializer, shape) for every parameter ``config`` uses."""
    d = config.d_model
    out: dict[str, tuple[str, tuple[int, ...]]] = {
        "enc.conv1.w": ("xavier", (3 * config.d_feat, d)),
        "enc.conv1.b": ("zeros", (d,)),
        "enc.conv2.w": ("xavier", (3 * d, d)),
        "enc.conv2.b": ("zeros", (d,)),
    }
    for layer in range(config.enc_layers):
        p = f"enc.layers.{layer}"
        _spec_norm(out, f"{p}.self_norm", d)
        _spec_attention(out, f"{p}.self_attn", d)
        _spec_norm(out, f"{p}.ffn_norm", d)
        _spec_ffn(out, f"{p}.ffn", d, config.d_ffn)
    _spec_norm(out, "enc.final_norm", d)
    for stream in ("asr",) if config.share_decoder_weights else ("asr", "st"):
        _spec_decoder(out, stream, config)
    return out


def _draw(kind: str, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if kind == "zeros":
        return np.zeros(shape)
    if kind == "ones":
        return np.ones(shape)
    if kind == "embed":
        return rng.normal(0.0, shape[1] ** -0.5, size=shape)
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config: ModelConfig, seed: int = 0, dtype=None) -> LayerParams:
    """Fresh parameters for ``config``.

    Every tensor is drawn from a generator keyed by (seed, parameter name), so
    two configurations that share a parameter name get identical values.
    """
    dtype = dtype or get_default_dtype()
    params = LayerParams()
    for name, (kind, shape) in param_shapes(config).items():
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        params[name] = Tensor(np.asarray(_draw(kind, shape, rng), dtype=dtype), requires_grad=True)
    return params
