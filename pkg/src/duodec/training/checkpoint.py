"""Binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic  b"DUODECK\\0"
    u32       format version
    u32       header length n
    n bytes   header: canonical JSON (sorted keys, no whitespace), UTF-8
    u32       number of arrays
    per array:
      u32 name length, name (UTF-8), u32 ndim, ndim x u64 dims,
      prod(dims) float64 values in little-endian order

Array names are ``param/<path>``, ``adam_m/<path>`` and ``adam_v/<path>``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core.params import LayerParams
from ..core.tensor import Tensor
from ..errors import InputError
from ..model.config import ModelConfig
from .optim import AdamState

MAGIC = b"DUODECK\x00"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict[str, np.ndarray]
    adam: AdamState = field(default_factory=AdamState)
    step: int = 0
    rng_state: dict | None = None
    extra: dict = field(default_factory=dict)
    dtype: str = "float64"
    format_version: int = FORMAT_VERSION

    def to_params(self, dtype=None) -> LayerParams:
        dtype = dtype or self.dtype
        return LayerParams({k: Tensor(np.array(v, dtype=dtype), requires_grad=True) for k, v in self.params.items()})

    @classmethod
    def capture(cls, config: ModelConfig, params: LayerParams, adam: AdamState | None = None, step: int = 0,
                rng: np.random.Generator | None = None, extra: dict | None = None) -> "Checkpoint":
        adam = adam or AdamState()
        snap = AdamState(adam.step, {k: v.copy() for k, v in adam.m.items()}, {k: v.copy() for k, v in adam.v.items()})
        dtype = next(iter(params.values())).data.dtype.name if len(params) else "float64"
        return cls(config, params.to_numpy(), snap, step,
                   rng.bit_generator.state if rng is not None else None, dict(extra or {}), dtype)

    def restore_rng(self) -> np.random.Generator:
        rng = np.random.default_rng()
        if self.rng_state is not None:
            rng.bit_generator.state = self.rng_state
        return rng


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<I", arr.ndim))
    for n in arr.shape:
        fh.write(struct.pack("<Q", n))
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    header = {
        "model_config": ckpt.model_config.to_dict(),
        "step": ckpt.step,
        "adam_step": ckpt.adam.step,
        "rng_state": ckpt.rng_state,
        "dtype": ckpt.dtype,
        "extra": ckpt.extra,
    }
    text = canonical_json(header).encode("utf-8")
    arrays = [(f"param/{k}", v) for k, v in sorted(ckpt.params.items())]
    arrays += [(f"adam_m/{k}", v) for k, v in sorted(ckpt.adam.m.items())]
    arrays += [(f"adam_v/{k}", v) for k, v in sorted(ckpt.adam.v.items())]
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(text)))
        fh.write(text)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays:
            _write_array(fh, name, np.asarray(arr))
    tmp.replace(path)
    return path


def _read(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise InputError("checkpoint file is truncated")
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if _read(fh, len(MAGIC)) != MAGIC:
            raise InputError(f"{path} is not a checkpoint (bad magic bytes)")
        version, n = struct.unpack("<II", _read(fh, 8))
        if version != FORMAT_VERSION:
            raise InputError(f"unsupported checkpoint format version {version}")
        header = json.loads(_read(fh, n).decode("utf-8"))
        (count,) = struct.unpack("<I", _read(fh, 4))
        groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
        for _ in range(count):
            (ln,) = struct.unpack("<I", _read(fh, 4))
            name = _read(fh, ln).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(fh, 4))
            shape = struct.unpack(f"<{ndim}Q", _read(fh, 8 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(_read(fh, 8 * size), dtype="<f8").reshape(shape).astype(np.float64)
            kind, _, key = name.partition("/")
            groups[kind][key] = arr
    dtype = header.get("dtype", "float64")
    m = {k: v.astype(dtype) for k, v in groups["adam_m"].items()}
    v = {k: a.astype(dtype) for k, a in groups["adam_v"].items()}
    return Checkpoint(
        ModelConfig.from_dict(header["model_config"]),
        {k: a.astype(dtype) for k, a in groups["param"].items()},
        AdamState(header.get("adam_step", 0), m, v),
        header.get("step", 0),
        header.get("rng_state"),
        header.get("extra", {}),
        dtype,
        version,
    )
