from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor


class LayerParams(dict):
    """Mapping from dotted parameter path to a trainable :class:`Tensor`.

    Iteration is always in lexicographic key order.
    """

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(super().keys()))

    def keys(self):
        return list(iter(self))

    def items(self):
        return [(k, self[k]) for k in self]

    def values(self):
        return [self[k] for k in self]

    def sub(self, prefix: str) -> "LayerParams":
        """View of the entries under ``prefix.`` with the prefix stripped (tensors are shared)."""
        head = prefix + "."
        return LayerParams({k[len(head):]: v for k, v in dict.items(self) if k.startswith(head)})

    def count(self) -> int:
        return int(sum(v.data.size for v in dict.values(self)))

    def zero_grad(self) -> None:
        for v in dict.values(self):
            v.grad = None

    def to_numpy(self) -> dict[str, np.ndarray]:
        return {k: self[k].data.copy() for k in self}

    def copy(self) -> "LayerParams":
        return LayerParams({k: Tensor(v.data.copy(), requires_grad=v.requires_grad) for k, v in dict.items(self)})
