"""Adam with the inverse-square-root warm-up schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.params import LayerParams
from ..errors import NumericError


def noam_lr(step: int, base_lr: float, warmup: int) -> float:
    """``base_lr * min(step ** -0.5, step * warmup ** -1.5)``.

    Rises linearly to ``base_lr / sqrt(warmup)`` at ``step == warmup`` and
    decays as ``1 / sqrt(step)`` afterwards.
    """
    if step < 1:
        raise ValueError("the schedule is defined for step >= 1")
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    return base_lr * min(step ** -0.5, step * warmup ** -1.5)


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: LayerParams, state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.98,
              eps: float = 1e-9, grads: dict[str, np.ndarray] | None = None) -> AdamState:
    """Bias-corrected Adam update applied in place to ``params``.

    Gradients come from ``grads`` when given, else from each tensor's
    ``.grad`` (missing gradients count as zero). Nothing is modified when
    any gradient is non-finite.
    """
    names = list(params)
    if grads is None:
        grads = {n: params[n].grad for n in names}
    for n in names:
        g = grads.get(n)
        if g is not None and not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {n}; update skipped")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for n in names:
        p = params[n]
        g = grads.get(n)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(n)
        v = state.v.get(n)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[n], state.v[n] = m, v
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype, copy=False)
    return state
