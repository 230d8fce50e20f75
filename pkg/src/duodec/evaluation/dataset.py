"""NDJSON dataset records and synthetic dataset materialization.

One record per line::

    {"id": "ex0", "source": [7, 9, 5], "features": [[...], ...],
     "transcript": [7, 9, 5], "translations": {"3": [5, 9, 7], "4": [8, 10, 6]}}

``features`` is optional: when absent, decoding rebuilds the acoustic frames
from ``source`` with the task's fixed projection (noise-free). Translations
exclude the language token; JSON object keys are the language token ids.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..errors import InputError
from ..training.data import SyntheticTaskSpec, features_for


@dataclass
class DatasetRecord:
    id: str
    transcript: list[int]
    translations: dict[int, list[int]] = field(default_factory=dict)
    source: list[int] | None = None
    features: np.ndarray | None = None

    def to_json(self) -> dict:
        out = {"id": self.id, "transcript": list(map(int, self.transcript)),
               "translations": {str(k): list(map(int, v)) for k, v in sorted(self.translations.items())}}
        if self.source is not None:
            out["source"] = list(map(int, self.source))
        if self.features is not None:
            out["features"] = np.asarray(self.features).tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict, line: int | None = None) -> "DatasetRecord":
        where = f" (line {line})" if line is not None else ""
        if not isinstance(obj, dict) or "id" not in obj:
            raise InputError(f"dataset record needs an id{where}")
        try:
            translations = {int(k): [int(t) for t in v] for k, v in obj.get("translations", {}).items()}
            feats = obj.get("features")
            return cls(
                id=str(obj["id"]),
                transcript=[int(t) for t in obj.get("transcript", [])],
                translations=translations,
                source=None if obj.get("source") is None else [int(t) for t in obj["source"]],
                features=None if feats is None else np.asarray(feats, dtype=np.float64),
            )
        except (TypeError, ValueError) as exc:
            raise InputError(f"malformed dataset record{where}: {exc}") from exc

    def frames(self, spec: SyntheticTaskSpec | None) -> np.ndarray:
        if self.features is not None:
            if self.features.ndim != 2:
                raise InputError(f"record {self.id}: features must be a 2-D matrix")
            return self.features
        if self.source is None or spec is None:
            raise InputError(f"record {self.id}: neither features nor a source with a task spec")
        return features_for(spec, np.asarray(self.source), None)


def read_ndjson(path) -> Iterator[tuple[int, dict]]:
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{n}: invalid JSON ({exc.msg})") from exc


def read_dataset(path) -> list[DatasetRecord]:
    return [DatasetRecord.from_json(obj, n) for n, obj in read_ndjson(path)]


def write_ndjson(path, rows: Iterable[dict]) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def synthesize(spec: SyntheticTaskSpec, count: int, seed: int = 0, with_features: bool = True) -> list[DatasetRecord]:
    """``count`` records with lengths drawn uniformly from the task spec's range."""
    if count < 0:
        raise InputError("count must be non-negative")
    rng = np.random.default_rng(seed)
    proj = spec.projection()
    lo, hi = spec.content_range
    out = []
    for i in range(count):
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        tokens = rng.integers(lo, hi, size=n)
        feats = features_for(spec, tokens, rng, proj) if with_features else None
        out.append(DatasetRecord(
            id=f"ex{i}",
            transcript=tokens.tolist(),
            translations={l.token: spec.translate(tokens, l) for l in spec.languages},
            source=tokens.tolist(),
            features=feats,
        ))
    return out
