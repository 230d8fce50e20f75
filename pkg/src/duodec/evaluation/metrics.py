"""Word error rate and corpus BLEU over token sequences."""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit substitution, insertion and deletion costs."""
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[-1]


def wer(ref: Sequence, hyp: Sequence) -> float:
    if len(ref) == 0:
        raise ValueError("WER is undefined for an empty reference")
    return edit_distance(ref, hyp) / len(ref)


def corpus_wer(refs: Sequence[Sequence], hyps: Sequence[Sequence]) -> float:
    """Total edits over total reference length (a fraction, not a percentage)."""
    if len(refs) != len(hyps):
        raise ValueError("reference and hypothesis lists differ in length")
    total = sum(len(r) for r in refs)
    if total == 0:
        raise ValueError("WER is undefined for empty references")
    return sum(edit_distance(r, h) for r, h in zip(refs, hyps)) / total


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(refs: Sequence[Sequence], hyps: Sequence[Sequence], max_order: int = 4) -> float:
    """Corpus BLEU in [0, 100] with one reference per hypothesis and no smoothing.

    Clipped n-gram matches and hypothesis n-gram totals are summed over the
    corpus for n = 1..max_order; any zero precision makes the score 0. The
    brevity penalty is exp(1 - r/c) when the hypothesis length c is not
    longer than the reference length r.
    """
    if len(refs) != len(hyps):
        raise ValueError("reference and hypothesis lists differ in length")
    if not refs:
        raise ValueError("BLEU needs a non-empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    ref_len = hyp_len = 0
    for ref, hyp in zip(refs, hyps):
        ref_len += len(ref)
        hyp_len += len(hyp)
        for n in range(1, max_order + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0 or min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_order
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_prec)


def sequence_accuracy(refs: Sequence[Sequence], hyps: Sequence[Sequence]) -> float:
    if not refs:
        return 0.0
    return sum(list(r) == list(h) for r, h in zip(refs, hyps)) / len(refs)
