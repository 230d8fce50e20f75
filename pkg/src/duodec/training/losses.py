from __future__ import annotations

import numpy as np

from ..core.functional import label_smoothed_loss
from ..core.tensor import Tensor
from ..model.config import PAD_ID


def joint_loss(logits_y: Tensor, logits_z: Tensor, targets_y, targets_z, alpha: float = 0.3, eps: float = 0.1,
               languages=None, pad_id: int | None = PAD_ID) -> Tensor:
    """``alpha * L_asr + (1 - alpha) * L_st`` with label-smoothed cross-entropies.

    With ``languages`` (one language token per batch row) the translation
    loss is the mean of the per-language losses over the languages present.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    return weighted_loss(logits_y, logits_z, targets_y, targets_z, alpha, eps, languages, pad_id)


def weighted_loss(logits_y, logits_z, targets_y, targets_z, alpha, eps, languages=None, pad_id=PAD_ID) -> Tensor:
    """Same as :func:`joint_loss` but also accepts the endpoints ``alpha`` = 0 or 1."""
    l_asr = label_smoothed_loss(logits_y, targets_y, pad_id, eps)
    l_st = translation_loss(logits_z, targets_z, eps, languages, pad_id)
    return l_asr * alpha + l_st * (1.0 - alpha)


def translation_loss(logits_z: Tensor, targets_z, eps: float, languages=None, pad_id=PAD_ID) -> Tensor:
    targets_z = np.asarray(targets_z)
    if languages is None:
        return label_smoothed_loss(logits_z, targets_z, pad_id, eps)
    languages = np.asarray(languages)
    present = sorted(set(int(l) for l in languages))
    total = None
    for lang in present:
        rows = np.flatnonzero(languages == lang)
        part = label_smoothed_loss(logits_z[rows], targets_z[rows], pad_id, eps)
        total = part if total is None else total + part
    return total * (1.0 / len(present))


def token_accuracy(logits, targets, pad_id: int | None = PAD_ID) -> tuple[int, int]:
    """(correct, counted) argmax predictions over non-pad positions."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    targets = np.asarray(targets)
    keep = np.ones(targets.shape, bool) if pad_id is None else targets != pad_id
    pred = data.argmax(axis=-1)
    return int(((pred == targets) & keep).sum()), int(keep.sum())
