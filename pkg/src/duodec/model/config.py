"""Model configuration for the dual-decoder family."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from ..errors import ConfigError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2

VARIANTS = ("parallel", "cross", "independent", "triangle", "two_stage")
SIDES = ("both", "st_only", "asr_only")
MERGES = ("sum_learnable", "sum_fixed", "concat")
COUPLED = ("parallel", "cross")
CHAINED = ("triangle", "two_stage")


@dataclass(frozen=True)
class ModelConfig:
    """One member of the decoder-coupling family.

    ``side`` names the decoder that owns dual-attention layers: ``st_only``
    lets the translation decoder attend the transcription decoder and not the
    reverse. ``wait_k > 0`` puts the transcript ``wait_k`` tokens ahead of the
    translation, ``wait_k < 0`` the opposite. ``dual_at_self`` and
    ``dual_at_source`` default to (False, True) for the coupled variants and
    are forced off elsewhere.
    """

    variant: str = "parallel"
    side: str = "both"
    dual_at_self: bool | None = None
    dual_at_source: bool | None = None
    merge: str = "sum_learnable"
    merge_lambda: float = 0.3
    wait_k: int = 0
    normalize_dual_input: bool = True
    enc_layers: int = 2
    dec_layers: int = 2
    d_model: int = 32
    heads: int = 4
    d_ffn: int = 64
    vocab_size: int = 16
    d_feat: int = 16
    dropout: float = 0.0
    share_decoder_weights: bool = False
    max_len: int = 512
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.side not in SIDES:
            raise ConfigError(f"unknown side {self.side!r}")
        if self.merge not in MERGES:
            raise ConfigError(f"unknown merge {self.merge!r}")
        coupled = self.variant in COUPLED
        at_self = False if self.dual_at_self is None else bool(self.dual_at_self)
        at_src = coupled if self.dual_at_source is None else bool(self.dual_at_source)
        if not coupled and (at_self or at_src):
            raise ConfigError(f"variant {self.variant} has no dual-attention layers")
        object.__setattr__(self, "dual_at_self", at_self)
        object.__setattr__(self, "dual_at_source", at_src)
        if self.d_model % 2:
            raise ConfigError("d_model must be even")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        for name in ("enc_layers", "dec_layers", "d_ffn", "vocab_size", "d_feat", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.vocab_size <= EOS_ID:
            raise ConfigError("vocab_size must leave room for pad/bos/eos")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if not math.isfinite(self.merge_lambda):
            raise ConfigError("merge_lambda must be finite")
        if abs(self.wait_k) > self.max_len:
            raise ConfigError("wait_k exceeds the maximum sequence length")
        if self.share_decoder_weights and self.variant != "independent":
            raise ConfigError("decoder weight sharing is only defined for the independent variant")

    # -- derived ------------------------------------------------------------------
    @property
    def coupled(self) -> bool:
        return self.variant in COUPLED

    @property
    def chained(self) -> bool:
        return self.variant in CHAINED

    def has_dual(self, stream: str) -> bool:
        """Whether ``stream`` ('asr' or 'st') owns dual-attention layers."""
        if not self.coupled or not (self.dual_at_self or self.dual_at_source):
            return False
        if stream == "asr":
            return self.side in ("both", "asr_only")
        return self.side in ("both", "st_only")

    def dual_offset(self, stream: str) -> int:
        """Mask offset for ``stream`` attending the other stream: j <= i + offset."""
        return -self.wait_k if stream == "asr" else self.wait_k

    def prefix(self, stream: str) -> str:
        return "dec" if self.share_decoder_weights else stream

    # -- serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {unknown}")
        return cls(**data)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


def liu_special_case(**overrides) -> ModelConfig:
    """Cross decoder with at-self dual-attention only, raw dual inputs and sum merging at lambda 0.3."""
    base = dict(variant="cross", side="both", dual_at_self=True, dual_at_source=False,
                merge="sum_fixed", merge_lambda=0.3, normalize_dual_input=False)
    base.update(overrides)
    return ModelConfig(**base)
