import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from duodec.core.tensor import Tensor, default_dtype  # noqa: E402
from duodec.model import dual_decoder as D  # noqa: E402
from duodec.model.config import ModelConfig  # noqa: E402
from duodec.model.params import init_params  # noqa: E402


def small_config(**kw) -> ModelConfig:
    base = dict(enc_layers=2, dec_layers=2, d_model=16, heads=2, d_ffn=32, vocab_size=12, d_feat=8)
    base.update(kw)
    return ModelConfig(**base)


def coupled_params(config: ModelConfig, seed: int = 0, lam: float = 0.5):
    """float64 parameters with learnable merge weights moved off zero so dual paths matter."""
    with default_dtype(np.float64):
        params = init_params(config, seed, np.float64)
    for name in params:
        if name.endswith(".lam"):
            params[name].data[...] = lam
    return params


def random_memory(config: ModelConfig, params, rng, frames: int = 12, batch=None):
    shape = (frames, config.d_feat) if batch is None else (batch, frames, config.d_feat)
    return D.encode(Tensor(rng.normal(size=shape), dtype=np.float64), params, config)


def random_tokens(rng, config: ModelConfig, length: int, first: int | None = None, batch=None):
    shape = (length,) if batch is None else (batch, length)
    toks = rng.integers(3, config.vocab_size, size=shape)
    if first is not None:
        toks[..., 0] = first
    return toks


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_runs():
    """Train the independent baseline and the parallel model once per session.

    Maps variant -> (TrainResult, wall-clock seconds). Shared by the learning
    criterion and by the trained-model decoding checks.
    """
    import time

    from duodec.toy import desk_model, desk_task, desk_training
    from duodec.training.train import train

    runs = {}
    for variant in ("independent", "parallel"):
        start = time.perf_counter()
        result = train(desk_model(variant), desk_training(), desk_task())
        runs[variant] = (result, time.perf_counter() - start)
    return runs
