"""Synthetic joint transcription/translation tasks.

A source utterance is a random sequence of content tokens. Its "speech" is a
fixed random projection of each token's one-hot vector, repeated
``upsample`` times with Gaussian noise added, so the encoder's 4x subsampling
lands back on roughly one frame per token. Each target language is a fixed
transform of the token sequence.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..model.config import BOS_ID, EOS_ID

TRANSFORMS = ("identity", "reverse", "caesar", "swap_pairs")
FIRST_LANGUAGE_ID = EOS_ID + 1


@dataclass(frozen=True)
class Language:
    token: int
    transform: str = "identity"
    shift: int = 1
    name: str = ""

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"unknown transform {self.transform!r}")

    @property
    def label(self) -> str:
        return self.name or f"{self.transform}{self.shift if self.transform == 'caesar' else ''}"


def apply_transform(tokens, transform: str, lo: int, hi: int, shift: int = 1) -> list[int]:
    """Map content tokens in ``[lo, hi)`` through one of the synthetic transforms."""
    tokens = [int(t) for t in tokens]
    if transform == "identity":
        return tokens
    if transform == "reverse":
        return tokens[::-1]
    if transform == "caesar":
        n = hi - lo
        return [lo + (t - lo + shift) % n for t in tokens]
    if transform == "swap_pairs":
        out = list(tokens)
        for i in range(0, len(out) - 1, 2):
            out[i], out[i + 1] = out[i + 1], out[i]
        return out
    raise ConfigError(f"unknown transform {transform!r}")


@dataclass(frozen=True)
class SyntheticTaskSpec:
    vocab_size: int = 16
    languages: tuple[Language, ...] = (Language(3, "reverse"), Language(4, "caesar", 1))
    min_len: int = 3
    max_len: int = 8
    upsample: int = 4
    feature_dim: int = 16
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        langs = tuple(l if isinstance(l, Language) else Language(**l) for l in self.languages)
        object.__setattr__(self, "languages", langs)
        if not langs:
            raise ConfigError("at least one target language is required")
        tokens = sorted(l.token for l in langs)
        if tokens != list(range(FIRST_LANGUAGE_ID, FIRST_LANGUAGE_ID + len(langs))):
            raise ConfigError(f"language tokens must be {FIRST_LANGUAGE_ID}..{FIRST_LANGUAGE_ID + len(langs) - 1}")
        if self.content_start >= self.vocab_size - 1:
            raise ConfigError("vocab_size leaves fewer than two content tokens")
        if self.upsample < 4:
            raise ConfigError("upsample must be at least 4 so the subsampled source covers the transcript")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError("need 1 <= min_len <= max_len")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")

    @property
    def content_start(self) -> int:
        return FIRST_LANGUAGE_ID + len(self.languages)

    @property
    def content_range(self) -> tuple[int, int]:
        return self.content_start, self.vocab_size

    def language(self, token: int) -> Language:
        for lang in self.languages:
            if lang.token == token:
                return lang
        raise KeyError(token)

    def translate(self, tokens, language: Language) -> list[int]:
        lo, hi = self.content_range
        return apply_transform(tokens, language.transform, lo, hi, language.shift)

    def projection(self) -> np.ndarray:
        """Fixed (vocab_size x feature_dim) token-to-feature matrix."""
        rng = np.random.default_rng([self.seed, 104729])
        return rng.normal(0.0, 1.0, size=(self.vocab_size, self.feature_dim))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticTaskSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown task spec keys: {unknown}")
        data = dict(data)
        if "languages" in data:
            data["languages"] = tuple(Language(**l) if isinstance(l, dict) else l for l in data["languages"])
        return cls(**data)


@dataclass
class Batch:
    """Same-length examples. ``translations[lang]`` rows start with the language token."""

    features: np.ndarray                   # (B, upsample * L, feature_dim)
    transcripts: np.ndarray                # (B, L) content tokens
    translations: dict[int, np.ndarray]    # lang token -> (B, L + 1)
    languages: np.ndarray = field(default=None)  # (B,) language assigned to each row for training

    def __len__(self) -> int:
        return self.transcripts.shape[0]

    def asr_io(self) -> tuple[np.ndarray, np.ndarray]:
        b, _ = self.transcripts.shape
        y_in = np.concatenate([np.full((b, 1), BOS_ID), self.transcripts], axis=1)
        y_out = np.concatenate([self.transcripts, np.full((b, 1), EOS_ID)], axis=1)
        return y_in, y_out

    def st_io(self, languages=None) -> tuple[np.ndarray, np.ndarray]:
        langs = self.languages if languages is None else np.broadcast_to(languages, (len(self),))
        z = np.stack([self.translations[int(l)][i] for i, l in enumerate(langs)])
        z_out = np.concatenate([z[:, 1:], np.full((len(self), 1), EOS_ID)], axis=1)
        return z, z_out


def features_for(spec: SyntheticTaskSpec, tokens: np.ndarray, rng: np.random.Generator | None,
                 projection: np.ndarray | None = None) -> np.ndarray:
    proj = spec.projection() if projection is None else projection
    feats = np.repeat(proj[np.asarray(tokens)], spec.upsample, axis=-2)
    if spec.noise_std > 0 and rng is not None:
        feats = feats + rng.normal(0.0, spec.noise_std, size=feats.shape)
    return feats


def generate_batch(spec: SyntheticTaskSpec, batch_size: int, rng: np.random.Generator, length: int | None = None,
                   projection: np.ndarray | None = None) -> Batch:
    """Draw ``batch_size`` examples of one common length (drawn uniformly when not given).

    Languages are assigned round-robin from a random starting offset so every
    language appears equally often.
    """
    if length is None:
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
    lo, hi = spec.content_range
    tokens = rng.integers(lo, hi, size=(batch_size, length))
    feats = features_for(spec, tokens, rng, projection)
    translations = {}
    for lang in spec.languages:
        rows = [[lang.token] + spec.translate(row, lang) for row in tokens]
        translations[lang.token] = np.asarray(rows, dtype=np.int64)
    offset = int(rng.integers(len(spec.languages)))
    order = [spec.languages[(i + offset) % len(spec.languages)].token for i in range(batch_size)]
    return Batch(feats, tokens.astype(np.int64), translations, np.asarray(order, dtype=np.int64))


def validation_set(spec: SyntheticTaskSpec, per_length: int, seed: int = 12345) -> list[Batch]:
    """One fixed batch per length in ``[min_len, max_len]``."""
    rng = np.random.default_rng([spec.seed, seed])
    proj = spec.projection()
    return [generate_batch(spec, per_length, rng, length=n, projection=proj)
            for n in range(spec.min_len, spec.max_len + 1)]
