"""Greedy and joint beam search over paired (transcript, translation) hypotheses."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from ..core.params import LayerParams
from ..errors import ConfigError, InputError
from ..model import dual_decoder as D
from ..model.config import BOS_ID, EOS_ID, ModelConfig
from ..model.dual_decoder import schedule


class StepScorer(Protocol):
    """Supplies next-token log-probabilities to the search.

    ``step`` consumes one input token per advancing stream (``None`` = held)
    and returns log-probabilities for the advancing streams.
    """

    wait_k: int
    chained: bool
    eos_id: int

    def initial(self) -> Any: ...

    def step(self, state, y_tok, z_tok, y_done: bool, z_done: bool) -> tuple[np.ndarray | None, np.ndarray | None, Any]: ...


def _log_softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    return z - np.log(np.exp(z).sum())


class ModelScorer:
    """Adapts :func:`decode_step` of a trained model to the :class:`StepScorer` protocol."""

    def __init__(self, memory: D.EncoderMemory, params: LayerParams, config: ModelConfig):
        self.memory, self.params, self.config = memory, params, config
        self.wait_k = config.wait_k
        self.chained = config.chained
        self.eos_id = EOS_ID
        self.calls = 0

    def initial(self):
        return D.init_states(self.config, self.memory.hidden.dtype)

    def step(self, state: D.DecoderStates, y_tok, z_tok, y_done, z_done):
        self.calls += 1
        if y_done and not state.asr_done:
            state = state.finish("asr")
        if z_done and not state.st_done:
            state = state.finish("st")
        ly, lz, state = D.decode_step(state, self.memory, y_tok, z_tok, self.params, self.config)
        return (None if ly is None else _log_softmax(ly)), (None if lz is None else _log_softmax(lz)), state


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 10
    length_penalty: float = 0.5
    max_len_y: int = 32
    max_len_z: int = 32
    per_stream_topk: int | None = None
    max_candidates: int = 100_000
    prune_by_score: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        if self.max_len_y < 1 or self.max_len_z < 1:
            raise ConfigError("max lengths must be >= 1")
        if self.per_stream_topk is not None and self.per_stream_topk < 1:
            raise ConfigError("per_stream_topk must be >= 1")
        if self.beam_size * self.topk ** 2 > self.max_candidates:
            raise ConfigError(f"beam_size * per_stream_topk^2 exceeds {self.max_candidates} candidates per step")

    @property
    def topk(self) -> int:
        return self.per_stream_topk or self.beam_size


@dataclass
class JointHypothesis:
    """Paired prefixes; ``y_tokens`` / ``z_tokens`` include the end token once emitted."""

    y_tokens: list[int]
    z_tokens: list[int]
    log_prob: float
    y_finished: bool
    z_finished: bool
    states: Any = field(default=None, repr=False)

    @property
    def finished(self) -> bool:
        return self.y_finished and self.z_finished

    def content(self, eos_id: int = EOS_ID) -> tuple[list[int], list[int]]:
        return _strip(self.y_tokens, eos_id), _strip(self.z_tokens, eos_id)

    def length(self, eos_id: int = EOS_ID) -> int:
        y, z = self.content(eos_id)
        return len(y) + len(z)


def _strip(tokens: Sequence[int], eos_id: int) -> list[int]:
    return list(tokens[:-1]) if tokens and tokens[-1] == eos_id else list(tokens)


@dataclass
class SearchResult:
    y: list[int]
    z: list[int]
    score: float
    log_prob: float
    hypothesis: JointHypothesis = field(repr=False, default=None)


def final_score(log_prob: float, len_y: int, len_z: int, penalty: float) -> float:
    """Ranking score: ``log_prob + penalty * (len_y + len_z)`` with end tokens excluded from lengths."""
    return log_prob + penalty * (len_y + len_z)


def _advance_flags(tokens: list[int], tok: int, eos_id: int, max_len: int) -> bool:
    if tok == eos_id:
        return True
    return len(tokens) >= max_len


def _next_inputs(h: JointHypothesis, start_y: int, start_z: int, ay: bool, az: bool):
    y_in = (h.y_tokens[-1] if h.y_tokens else start_y) if ay else None
    z_in = (h.z_tokens[-1] if h.z_tokens else start_z) if az else None
    return y_in, z_in


def greedy_decode(scorer: StepScorer, language_token: int, max_len_y: int = 32, max_len_z: int = 32,
                  start_token: int = BOS_ID) -> SearchResult:
    """Factorized argmax: each step takes the most probable token of every advancing stream."""
    h = JointHypothesis([], [], 0.0, False, False, scorer.initial())
    while not h.finished:
        ay, az = schedule(len(h.y_tokens), len(h.z_tokens), h.y_finished, h.z_finished, scorer.wait_k, scorer.chained)
        y_in, z_in = _next_inputs(h, start_token, language_token, ay, az)
        lpy, lpz, state = scorer.step(h.states, y_in, z_in, h.y_finished, h.z_finished)
        y, z, lp = list(h.y_tokens), list(h.z_tokens), h.log_prob
        yf, zf = h.y_finished, h.z_finished
        if ay:
            tok = int(np.argmax(lpy))
            y.append(tok)
            lp += float(lpy[tok])
            yf = _advance_flags(y, tok, scorer.eos_id, max_len_y)
        if az:
            tok = int(np.argmax(lpz))
            z.append(tok)
            lp += float(lpz[tok])
            zf = _advance_flags(z, tok, scorer.eos_id, max_len_z)
        h = JointHypothesis(y, z, lp, yf, zf, state)
    y, z = h.content(scorer.eos_id)
    return SearchResult(y, z, h.log_prob, h.log_prob, h)


def _topk(lp: np.ndarray, k: int) -> list[tuple[int, float]]:
    k = min(k, lp.shape[-1])
    order = np.argsort(-lp, kind="stable")[:k]
    return [(int(i), float(lp[i])) for i in order]


def joint_beam_search(scorer: StepScorer, language_token: int, beam: BeamConfig, start_token: int = BOS_ID,
                      trace: Callable[[dict], None] | None = None) -> list[SearchResult]:
    """Single joint beam over (transcript, translation) prefix pairs.

    Each live hypothesis proposes the ``per_stream_topk`` best tokens of every
    advancing stream; a held or finished stream proposes one no-op with score
    0. The cross product of proposals from all hypotheses is pruned to
    ``beam_size`` by accumulated log-probability (or, with
    ``prune_by_score``, by log-probability plus the length bonus). Hypotheses whose two
    streams have ended move to the finished pool, ranked by
    :func:`final_score`. Search stops when ``beam_size`` finished hypotheses
    exist and no live hypothesis can still beat the worst of them.
    """
    B, p, eos = beam.beam_size, beam.length_penalty, scorer.eos_id
    live = [JointHypothesis([], [], 0.0, False, False, scorer.initial())]
    done: list[tuple[float, int, JointHypothesis]] = []
    serial = 0
    step = 0
    while live:
        pool: list[tuple[float, int, JointHypothesis]] = []
        for h in live:
            ay, az = schedule(len(h.y_tokens), len(h.z_tokens), h.y_finished, h.z_finished,
                              scorer.wait_k, scorer.chained)
            y_in, z_in = _next_inputs(h, start_token, language_token, ay, az)
            lpy, lpz, state = scorer.step(h.states, y_in, z_in, h.y_finished, h.z_finished)
            y_props = _topk(lpy, beam.topk) if ay else [(None, 0.0)]
            z_props = _topk(lpz, beam.topk) if az else [(None, 0.0)]
            for ty, sy in y_props:
                for tz, sz in z_props:
                    y, z = h.y_tokens, h.z_tokens
                    yf, zf = h.y_finished, h.z_finished
                    if ty is not None:
                        y = y + [ty]
                        yf = _advance_flags(y, ty, eos, beam.max_len_y)
                    if tz is not None:
                        z = z + [tz]
                        zf = _advance_flags(z, tz, eos, beam.max_len_z)
                    pool.append((h.log_prob + sy + sz, serial, JointHypothesis(y, z, h.log_prob + sy + sz, yf, zf, state)))
                    serial += 1
        if beam.prune_by_score:
            pool.sort(key=lambda t: (-(t[0] + p * t[2].length(eos)), t[1]))
        else:
            pool.sort(key=lambda t: (-t[0], t[1]))
        pool = pool[:B]
        live = []
        for lp, sid, h in pool:
            if h.finished:
                y, z = h.content(eos)
                done.append((final_score(lp, len(y), len(z), p), sid, h))
            else:
                live.append(h)
        step += 1
        if trace is not None:
            trace({"step": step, "hypotheses": [{"y": h.y_tokens, "z": h.z_tokens, "log_prob": h.log_prob,
                                                  "finished": h.finished} for _, _, h in pool]})
        if len(done) >= B and live:
            done.sort(key=lambda t: (-t[0], t[1]))
            threshold = done[B - 1][0]
            if all(_bound(h, beam, eos) <= threshold for h in live):
                break
    done.sort(key=lambda t: (-t[0], t[1]))
    results = []
    for score, _, h in done:
        y, z = h.content(eos)
        results.append(SearchResult(y, z, score, h.log_prob, h))
    return results


def _bound(h: JointHypothesis, beam: BeamConfig, eos: int) -> float:
    """Best final score ``h`` could still reach (log-probabilities only decrease)."""
    y, z = h.content(eos)
    now = len(y) + len(z)
    if beam.length_penalty <= 0:
        return h.log_prob + beam.length_penalty * now
    more = (0 if h.y_finished else beam.max_len_y - len(y)) + (0 if h.z_finished else beam.max_len_z - len(z))
    return h.log_prob + beam.length_penalty * (now + more)


def decode_multilingual(memory: D.EncoderMemory, params: LayerParams, config: ModelConfig, beam: BeamConfig,
                        languages: Sequence[int], known_languages: Sequence[int] | None = None,
                        trace: Callable[[dict], None] | None = None) -> dict[int, SearchResult]:
    """One independent joint beam search per language token over the same encoder memory."""
    out = {}
    for lang in languages:
        lang = int(lang)
        if known_languages is not None and lang not in set(int(l) for l in known_languages):
            raise InputError(f"unknown language token {lang}")
        if not 0 <= lang < config.vocab_size:
            raise InputError(f"language token {lang} outside the vocabulary")
        results = joint_beam_search(ModelScorer(memory, params, config), lang, beam, trace=trace)
        out[lang] = results[0]
    return out


class TraceWriter:
    """Callable that appends each beam step as one JSON line."""

    def __init__(self, fh, **context):
        self.fh, self.context = fh, context

    def __call__(self, record: dict) -> None:
        self.fh.write(json.dumps({**self.context, **record}) + "\n")
