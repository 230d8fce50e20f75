"""Encoder and coupled decoders: teacher-forced and incremental computation.

Streams are called ``asr`` (transcript, tokens ``y``) and ``st``
(translation, tokens ``z``). Decoder inputs follow the shifted convention:
input position ``i`` holds the token emitted at step ``i - 1`` (or the start /
language token at ``i = 0``) and its logits predict the next token.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..core import functional as F
from ..core import tensor as T
from ..core.params import LayerParams
from ..core.tensor import Tensor
from ..errors import DimensionError, InputError, StateError
from .config import ModelConfig

STREAMS = ("asr", "st")


def _other(stream: str) -> str:
    return "st" if stream == "asr" else "asr"


# -- masks -----------------------------------------------------------------------
def causal_mask(length: int) -> np.ndarray:
    return dual_mask(length, length, 0)


def dual_mask(q_len: int, k_len: int, offset: int) -> np.ndarray:
    """Boolean (q_len, k_len) mask allowing query ``i`` to see key ``j`` iff ``j <= i + offset``."""
    i = np.arange(q_len)[:, None]
    j = np.arange(k_len)[None, :]
    return j <= i + offset


# -- containers -----------------------------------------------------------------
@dataclass
class EncoderMemory:
    hidden: Tensor
    source_length: int


@dataclass
class StreamCache:
    """Per-layer rows of one decoder stream.

    ``layers[0]`` is the embedded input, ``layers[l]`` the output of decoder
    layer ``l`` and ``final`` the normalized top layer (the hidden state fed to
    the output projection).
    """

    tokens: list[int]
    layers: list[np.ndarray]
    final: np.ndarray

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass
class DecoderStates:
    """Incremental state of both decoders within one decoding session.

    ``asr.final`` / ``st.final`` hold the hidden states h^y and h^z (the two
    decoders share the model width here, so both live in R^d_model).
    """

    asr: StreamCache
    st: StreamCache
    asr_done: bool = False
    st_done: bool = False

    def stream(self, name: str) -> StreamCache:
        return self.asr if name == "asr" else self.st

    def done(self, name: str) -> bool:
        return self.asr_done if name == "asr" else self.st_done

    def finish(self, name: str) -> "DecoderStates":
        return replace(self, **{f"{name}_done": True})


# -- building blocks ------------------------------------------------------------
def _norm(params: Mapping[str, Tensor], prefix: str, x: Tensor, config: ModelConfig) -> Tensor:
    return F.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], config.ln_eps)


def _embed(params: LayerParams, config: ModelConfig, stream: str, tokens: np.ndarray, start: int = 0) -> Tensor:
    tokens = np.asarray(tokens)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= config.vocab_size):
        raise InputError(f"token id outside vocabulary of size {config.vocab_size}")
    table = params[f"{config.prefix(stream)}.embed"]
    x = T.getitem(table, tokens) * math.sqrt(config.d_model)
    pos = F.sinusoidal_positions(start + tokens.shape[-1], config.d_model, table.dtype)[start:]
    return x + Tensor(pos, dtype=table.dtype)


def _merge(params: LayerParams, prefix: str, main: Tensor, dual: Tensor, config: ModelConfig) -> Tensor:
    if config.merge == "sum_fixed":
        return merge(main, dual, "sum", lam=config.merge_lambda)
    if config.merge == "sum_learnable":
        return merge(main, dual, "sum", lam=params[f"{prefix}.lam"])
    return merge(main, dual, "concat", weight=params[f"{prefix}.w"], bias=params[f"{prefix}.b"])


def merge(h_main: Tensor, h_dual: Tensor | None, mode: str, lam=None, weight=None, bias=None) -> Tensor:
    """Combine a main-attention output with a dual-attention output.

    ``mode`` is ``none`` (return ``h_main``), ``sum`` (``h_main + lam * h_dual``)
    or ``concat`` (``[h_main; h_dual] @ weight.T + bias`` with ``weight`` of
    shape d x 2d).
    """
    if mode == "none" or h_dual is None:
        return h_main
    if h_main.shape != h_dual.shape:
        raise DimensionError(f"merge operands differ: {h_main.shape} vs {h_dual.shape}")
    if mode == "sum":
        return h_main + h_dual * lam
    if mode == "concat":
        return T.concat([h_main, h_dual], axis=-1) @ T.as_tensor(weight).T + bias
    raise ValueError(f"unknown merge mode {mode!r}")


@dataclass
class _Ctx:
    """Everything one decoder layer call needs besides its own input rows."""

    self_keys: Tensor            # rows the self-attention looks at
    self_mask: np.ndarray | None
    memory: Tensor | None
    other: Tensor | None = None  # dual-attention keys/values (raw, before optional norm)
    dual_mask: np.ndarray | None = None
    asr_states: Tensor | None = None  # chained translation decoder only
    asr_mask: np.ndarray | None = None
    rng: np.random.Generator | None = None
    stats: dict | None = None
    tag: str = ""


def _dual_attend(params, p: str, where: str, h: Tensor, ctx: _Ctx, config: ModelConfig) -> Tensor:
    kv = ctx.other
    if config.normalize_dual_input:
        kv = _norm(params, f"{p}.dual_{where}_norm", kv, config)
    stats = {} if ctx.stats is not None else None
    out = F.multi_head_attention(h, kv, kv, ctx.dual_mask, params.sub(f"{p}.dual_{where}_attn"),
                                 config.heads, config.dropout, ctx.rng, stats)
    if stats is not None:
        ctx.stats[f"{ctx.tag}.dual_{where}"] = _entropy(stats["weights"], ctx.dual_mask)
    return out


def _entropy(weights: np.ndarray, mask) -> float:
    w = np.clip(weights, 1e-300, None)
    ent = -(weights * np.log(w)).sum(axis=-1)
    return float(ent.mean())


def decoder_layer(params: LayerParams, stream: str, layer: int, x: Tensor, ctx: _Ctx, config: ModelConfig) -> Tensor:
    """One pre-LayerNorm decoder block; ``x`` are the query rows, ``ctx.self_keys`` the rows they may attend."""
    p = f"{config.prefix(stream)}.layers.{layer}"
    dual = config.has_dual(stream) and ctx.other is not None
    rate, rng = config.dropout, ctx.rng

    h = _norm(params, f"{p}.self_norm", x, config)
    hk = h if ctx.self_keys is x else _norm(params, f"{p}.self_norm", ctx.self_keys, config)
    out = F.multi_head_attention(h, hk, hk, ctx.self_mask, params.sub(f"{p}.self_attn"), config.heads, rate, rng)
    if dual and config.dual_at_self:
        out = _merge(params, f"{p}.dual_self_merge", out, _dual_attend(params, p, "self", h, ctx, config), config)
    x = x + T.dropout(out, rate, rng)

    if f"{p}.src_norm.gain" in params:
        h = _norm(params, f"{p}.src_norm", x, config)
        out = F.multi_head_attention(h, ctx.memory, ctx.memory, None, params.sub(f"{p}.src_attn"),
                                     config.heads, rate, rng)
        if dual and config.dual_at_source:
            out = _merge(params, f"{p}.dual_src_merge", out, _dual_attend(params, p, "src", h, ctx, config), config)
        x = x + T.dropout(out, rate, rng)

    if ctx.asr_states is not None:
        h = _norm(params, f"{p}.asr_norm", x, config)
        out = F.multi_head_attention(h, ctx.asr_states, ctx.asr_states, ctx.asr_mask, params.sub(f"{p}.asr_attn"),
                                     config.heads, rate, rng)
        x = x + T.dropout(out, rate, rng)

    h = _norm(params, f"{p}.ffn_norm", x, config)
    return x + T.dropout(F.feed_forward(h, params.sub(f"{p}.ffn"), rate, rng), rate, rng)


def _head(params: LayerParams, stream: str, x: Tensor, config: ModelConfig) -> tuple[Tensor, Tensor]:
    prefix = config.prefix(stream)
    hidden = _norm(params, f"{prefix}.final_norm", x, config)
    return hidden, F.linear(hidden, params[f"{prefix}.out.w"], params[f"{prefix}.out.b"])


# -- encoder ---------------------------------------------------------------------
def encode(x, params: LayerParams, config: ModelConfig, rng=None) -> EncoderMemory:
    """Subsample ``x`` (..., T, d_feat) by 4, add positions, run the encoder stack."""
    x = T.as_tensor(x) if not isinstance(x, Tensor) else x
    if x.shape[-1] != config.d_feat:
        raise InputError(f"expected {config.d_feat} feature dims, got {x.shape[-1]}")
    h = F.conv_subsample(x, params.sub("enc"))
    h = h + Tensor(F.sinusoidal_positions(h.shape[-2], config.d_model, h.dtype), dtype=h.dtype)
    h = T.dropout(h, config.dropout, rng)
    for layer in range(config.enc_layers):
        p = f"enc.layers.{layer}"
        a = _norm(params, f"{p}.self_norm", h, config)
        h = h + T.dropout(F.multi_head_attention(a, a, a, None, params.sub(f"{p}.self_attn"), config.heads,
                                                 config.dropout, rng), config.dropout, rng)
        a = _norm(params, f"{p}.ffn_norm", h, config)
        h = h + T.dropout(F.feed_forward(a, params.sub(f"{p}.ffn"), config.dropout, rng), config.dropout, rng)
    h = _norm(params, "enc.final_norm", h, config)
    return EncoderMemory(h, h.shape[-2])


# -- teacher forcing --------------------------------------------------------------
def _run_stream(params, stream: str, x0: Tensor, memory: Tensor, config: ModelConfig, rng=None,
                asr_states: Tensor | None = None, asr_mask=None) -> Tensor:
    x = x0
    mask = causal_mask(x0.shape[-2])
    for layer in range(config.dec_layers):
        ctx = _Ctx(self_keys=x, self_mask=mask, memory=memory, asr_states=asr_states, asr_mask=asr_mask, rng=rng)
        x = decoder_layer(params, stream, layer, x, ctx, config)
    return x


def forward_teacher_forced(memory: EncoderMemory, y_in, z_in, params: LayerParams, config: ModelConfig,
                           rng=None, collect: bool = False):
    """Logits for every input position of both streams, plus diagnostics.

    ``y_in`` / ``z_in`` are integer arrays of shape (..., S) and (..., Tz)
    whose leading axes match ``memory``. Returns ``(logits_y, logits_z,
    diagnostics)`` where diagnostics carries the current merge weights and,
    with ``collect``, the mean entropy of each dual-attention layer.
    """
    y_in, z_in = np.asarray(y_in), np.asarray(z_in)
    mem = memory.hidden
    a = _embed(params, config, "asr", y_in)
    s = _embed(params, config, "st", z_in)
    stats: dict | None = {} if collect else None

    if config.chained:
        a = _run_stream(params, "asr", a, mem, config, rng)
        hy, logits_y = _head(params, "asr", a, config)
        logits_z = forward_chained(memory, y_in, z_in, params, config, rng=rng, _asr_states=hy)
        return logits_y, logits_z, diagnostics(params, config, stats)

    a0, s0 = a, s
    masks = {
        "asr": (causal_mask(y_in.shape[-1]), dual_mask(y_in.shape[-1], z_in.shape[-1], config.dual_offset("asr"))),
        "st": (causal_mask(z_in.shape[-1]), dual_mask(z_in.shape[-1], y_in.shape[-1], config.dual_offset("st"))),
    }
    for layer in range(config.dec_layers):
        other_for_asr = s if config.variant == "parallel" else s0
        other_for_st = a if config.variant == "parallel" else a0
        ctx_a = _Ctx(a, masks["asr"][0], mem, other_for_asr if config.has_dual("asr") else None, masks["asr"][1],
                     rng=rng, stats=stats, tag=f"asr.layers.{layer}")
        ctx_s = _Ctx(s, masks["st"][0], mem, other_for_st if config.has_dual("st") else None, masks["st"][1],
                     rng=rng, stats=stats, tag=f"st.layers.{layer}")
        a, s = decoder_layer(params, "asr", layer, a, ctx_a, config), decoder_layer(params, "st", layer, s, ctx_s, config)
    _, logits_y = _head(params, "asr", a, config)
    _, logits_z = _head(params, "st", s, config)
    return logits_y, logits_z, diagnostics(params, config, stats)


def forward_chained(memory: EncoderMemory, y_full, z_in, params: LayerParams, config: ModelConfig, rng=None,
                    asr_mask=None, _asr_states: Tensor | None = None) -> Tensor:
    """Translation logits of a chained model given the complete transcript input ``y_full``.

    The translation decoder attends the final hidden states of the
    transcription decoder run over ``y_full``; the triangle variant also
    attends the encoder, the two-stage variant does not. ``asr_mask``
    (Tz x S, True = visible) overrides the default full visibility.
    """
    if not config.chained:
        raise ValueError("forward_chained needs a triangle or two_stage config")
    y_full, z_in = np.asarray(y_full), np.asarray(z_in)
    hy = _asr_states
    if hy is None:
        a = _run_stream(params, "asr", _embed(params, config, "asr", y_full), memory.hidden, config, rng)
        hy, _ = _head(params, "asr", a, config)
    mem = memory.hidden if config.variant == "triangle" else None
    s = _run_stream(params, "st", _embed(params, config, "st", z_in), mem, config, rng,
                    asr_states=hy, asr_mask=asr_mask)
    return _head(params, "st", s, config)[1]


def diagnostics(params: LayerParams, config: ModelConfig, stats: dict | None = None) -> dict:
    lams = {}
    for name in params:
        if name.endswith("_merge.lam"):
            lams[name[: -len(".lam")]] = float(params[name].data)
    if config.merge == "sum_fixed" and config.coupled:
        for stream in STREAMS:
            if config.has_dual(stream):
                for layer in range(config.dec_layers):
                    for where, on in (("self", config.dual_at_self), ("src", config.dual_at_source)):
                        if on:
                            lams[f"{config.prefix(stream)}.layers.{layer}.dual_{where}_merge"] = config.merge_lambda
    return {"lambda": lams, "dual_attention_entropy": dict(stats or {})}


# -- incremental decoding --------------------------------------------------------------
def init_states(config: ModelConfig, dtype=None) -> DecoderStates:
    d = config.d_model
    dtype = dtype or T.get_default_dtype()

    def empty():
        return StreamCache([], [np.zeros((0, d), dtype) for _ in range(config.dec_layers + 1)],
                           np.zeros((0, d), dtype))

    return DecoderStates(empty(), empty())


def schedule(n_y: int, n_z: int, y_done: bool, z_done: bool, wait_k: int, chained: bool = False) -> tuple[bool, bool]:
    """Which streams consume an input position this step.

    ``n_y`` / ``n_z`` count positions already consumed. Both streams advance
    in the same step when allowed: the translation stream at position ``t``
    needs transcript positions up to ``t + wait_k`` (or a finished transcript)
    and the transcript at ``s`` needs translation positions up to
    ``s - wait_k`` (or a finished translation). Chained variants hold the
    translation until the transcript is finished.
    """
    ay0, az0 = not y_done, not z_done
    if chained:
        return ay0, az0 and y_done

    def st_ok(ay):
        return az0 and (y_done or n_y + ay >= n_z + wait_k + 1)

    az = st_ok(ay0)
    ay = ay0 and (z_done or n_y - wait_k < 0 or n_z + az >= n_y - wait_k + 1)
    return ay, st_ok(ay)


def may_advance(states: DecoderStates, config: ModelConfig) -> tuple[bool, bool]:
    return schedule(states.asr.length, states.st.length, states.asr_done, states.st_done,
                    config.wait_k, config.chained)


def decode_step(states: DecoderStates, memory: EncoderMemory, y_tok, z_tok, params: LayerParams,
                config: ModelConfig):
    """Append one input position to each stream given a token (``None`` holds the stream).

    Returns ``(logits_y, logits_z, new_states)`` where a held stream's logits
    are ``None``. Both streams are advanced layer by layer together, which the
    parallel variant requires. ``states`` is not modified.
    """
    want = (y_tok is not None, z_tok is not None)
    if not any(want):
        raise StateError("decode_step called with both streams held")
    allowed = may_advance(states, config)
    for stream, w, ok in zip(STREAMS, want, allowed):
        if w and not ok:
            raise StateError(f"{stream} stream may not advance at this point of the schedule")
    mem = memory.hidden
    if mem.ndim != 2:
        raise StateError("incremental decoding works on a single utterance (memory of shape T' x d)")
    toks = {"asr": y_tok, "st": z_tok}
    active = [s for s, w in zip(STREAMS, want) if w]
    caches = {s: states.stream(s) for s in STREAMS}
    new_layers = {s: list(caches[s].layers) for s in STREAMS}
    rows: dict[str, Tensor] = {}

    with T.no_grad():
        for s in active:
            pos = caches[s].length
            row = _embed(params, config, s, np.array([int(toks[s])]), start=pos)
            rows[s] = row
            new_layers[s][0] = np.concatenate([caches[s].layers[0], row.data])

        hy_states = None
        if "st" in active and config.chained:
            if not states.asr_done:
                raise StateError("chained translation stream started before the transcript finished")
            hy_states = Tensor(caches["asr"].final)

        for layer in range(config.dec_layers):
            nxt = {}
            for s in active:
                pos = caches[s].length
                keys = Tensor(new_layers[s][layer])
                o = _other(s)
                other = None
                dmask = None
                if config.has_dual(s):
                    src = new_layers[o][layer if config.variant == "parallel" else 0]
                    other = Tensor(src)
                    dmask = dual_mask(pos + 1, src.shape[0], config.dual_offset(s))[pos:]
                    if other.shape[0] == 0:
                        other = Tensor(np.zeros((1, config.d_model), dtype=src.dtype))
                        dmask = np.zeros((1, 1), dtype=bool)
                use_mem = mem if not (s == "st" and config.variant == "two_stage") else None
                ctx = _Ctx(keys, causal_mask(pos + 1)[pos:], use_mem, other, dmask,
                           asr_states=hy_states if s == "st" else None)
                nxt[s] = decoder_layer(params, s, layer, rows[s], ctx, config)
            for s in active:
                rows[s] = nxt[s]
                new_layers[s][layer + 1] = np.concatenate([caches[s].layers[layer + 1], nxt[s].data])

        logits = {}
        finals = {}
        for s in active:
            hidden, lg = _head(params, s, rows[s], config)
            finals[s] = np.concatenate([caches[s].final, hidden.data])
            logits[s] = lg.data[0]

    new = {}
    for s in STREAMS:
        if s in active:
            new[s] = StreamCache(caches[s].tokens + [int(toks[s])], new_layers[s], finals[s])
        else:
            new[s] = caches[s]
    out = DecoderStates(new["asr"], new["st"], states.asr_done, states.st_done)
    return logits.get("asr"), logits.get("st"), out


# -- scoring ----------------------------------------------------------------------------
def _log_softmax_np(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def stream_log_probs(memory: EncoderMemory, y, z, params: LayerParams, config: ModelConfig):
    """Per-position log-probabilities of the realized next tokens of both streams.

    ``y`` = [start, tokens..., end] and ``z`` = [language, tokens..., end].
    """
    y, z = np.asarray(y), np.asarray(z)
    if y.shape[-1] < 2 or z.shape[-1] < 2:
        raise InputError("each sequence needs a start token and at least one target")
    with T.no_grad():
        ly, lz, _ = forward_teacher_forced(memory, y[..., :-1], z[..., :-1], params, config)
    lpy = np.take_along_axis(_log_softmax_np(ly.data), y[..., 1:, None], axis=-1)[..., 0]
    lpz = np.take_along_axis(_log_softmax_np(lz.data), z[..., 1:, None], axis=-1)[..., 0]
    return lpy, lpz


def joint_log_prob(memory: EncoderMemory, y, z, params: LayerParams, config: ModelConfig) -> float:
    """log p(y, z | x) under the model's factorization (wait-k and chaining included via the masks)."""
    lpy, lpz = stream_log_probs(memory, y, z, params, config)
    return float(lpy.sum() + lpz.sum())
