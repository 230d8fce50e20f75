"""Hand-set conditional distributions for exercising the search without a network."""
from __future__ import annotations

import zlib

import numpy as np

from ..model.dual_decoder import schedule


class TableScorer:
    """Step scorer whose next-token distributions are a fixed function of both prefixes.

    The distribution of a stream's next token depends on ``(stream, y prefix,
    z prefix)`` through a seeded hash, so every prefix pair gets its own
    random categorical distribution. ``temperature`` scales the random
    logits (small values give peaked tables). The state is the pair of
    consumed-token tuples.
    """

    def __init__(self, vocab: int, seed: int = 0, wait_k: int = 0, eos_id: int = 2, temperature: float = 1.0,
                 chained: bool = False):
        self.vocab, self.seed, self.wait_k, self.eos_id = vocab, seed, wait_k, eos_id
        self.temperature, self.chained = temperature, chained
        self.calls = 0

    def log_probs(self, stream: str, y_prefix: tuple, z_prefix: tuple) -> np.ndarray:
        key = f"{stream}|{','.join(map(str, y_prefix))}|{','.join(map(str, z_prefix))}".encode()
        rng = np.random.default_rng([self.seed, zlib.crc32(key)])
        logits = rng.normal(0.0, 1.0, size=self.vocab) / self.temperature
        logits -= logits.max()
        return logits - np.log(np.exp(logits).sum())

    def initial(self):
        return ((), ())

    def step(self, state, y_tok, z_tok, y_done, z_done):
        """The emitted tokens of both streams (prior to this step) condition each distribution."""
        self.calls += 1
        ys, zs = state
        ys = ys + ((y_tok,) if y_tok is not None else ())
        zs = zs + ((z_tok,) if z_tok is not None else ())
        # position 0 carries the start / language token, which is constant across hypotheses
        y_ctx, z_ctx = ys[1:], zs[1:]
        ly = self.log_probs("y", y_ctx, z_ctx) if y_tok is not None else None
        lz = self.log_probs("z", y_ctx, z_ctx) if z_tok is not None else None
        return ly, lz, (ys, zs)

    def sequence_log_prob(self, y: list[int], z: list[int], max_len_y: int, max_len_z: int,
                          start_token: int = 1, language_token: int = 3) -> float:
        """Score of a complete pair (content tokens, end tokens implied), replayed through :meth:`step`."""
        y_full = list(y) + ([self.eos_id] if len(y) < max_len_y else [])
        z_full = list(z) + ([self.eos_id] if len(z) < max_len_z else [])
        state = self.initial()
        ny = nz = 0
        total = 0.0
        while ny < len(y_full) or nz < len(z_full):
            y_done, z_done = ny == len(y_full), nz == len(z_full)
            ay, az = schedule(ny, nz, y_done, z_done, self.wait_k, self.chained)
            y_in = (y_full[ny - 1] if ny else start_token) if ay else None
            z_in = (z_full[nz - 1] if nz else language_token) if az else None
            ly, lz, state = self.step(state, y_in, z_in, y_done, z_done)
            if ay:
                total += float(ly[y_full[ny]])
            if az:
                total += float(lz[z_full[nz]])
            ny, nz = ny + ay, nz + az
        return total
