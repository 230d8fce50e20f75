"""Seeded toy problems shared by the gradient-check command and the tests."""
from __future__ import annotations

import numpy as np

from .core.gradcheck import GradCheckReport, grad_check
from .core.tensor import Tensor, default_dtype
from .model import dual_decoder as D
from .model.config import BOS_ID, ModelConfig
from .model.params import init_params
from .training.losses import joint_loss

DEFAULT_GRADCHECK_MODEL = dict(variant="parallel", dual_at_self=True, dual_at_source=True, enc_layers=2,
                               dec_layers=2, d_model=32, heads=4, d_ffn=64, vocab_size=16, d_feat=16)


def toy_objective(config: ModelConfig, seed: int = 0, batch: int = 2, src_len: int = 8, y_len: int = 4,
                  z_len: int = 3, alpha: float = 0.3, eps: float = 0.1, lam: float = 0.5):
    """Build (params, f) where ``f()`` is the joint loss on a fixed random batch in float64.

    Learnable merge weights start at ``lam`` rather than zero so that every
    dual-attention parameter receives a nonzero gradient.
    """
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        params = init_params(config, seed, np.float64)
        for name in params:
            if name.endswith(".lam"):
                params[name].data[...] = lam
    x = rng.normal(size=(batch, src_len, config.d_feat))
    content = np.arange(3, config.vocab_size)
    y = rng.choice(content, size=(batch, y_len))
    z = rng.choice(content, size=(batch, z_len))
    y_in = np.concatenate([np.full((batch, 1), BOS_ID), y[:, :-1]], axis=1)
    z_in = np.concatenate([np.full((batch, 1), 3), z[:, :-1]], axis=1)

    def f() -> Tensor:
        with default_dtype(np.float64):
            mem = D.encode(Tensor(x), params, config)
            ly, lz, _ = D.forward_teacher_forced(mem, y_in, z_in, params, config)
            return joint_loss(ly, lz, y, z, alpha, eps)

    return params, f


def toy_gradcheck(model: dict | None = None, seed: int = 0, h: float = 1e-5, tol: float = 1e-4,
                  max_per_param: int | None = 6) -> GradCheckReport:
    config = ModelConfig.from_dict({**DEFAULT_GRADCHECK_MODEL, **(model or {})})
    params, f = toy_objective(config, seed)
    return grad_check(f, params, h=h, tol=tol, max_per_param=max_per_param, seed=seed)


def desk_task():
    """Two target languages (reverse and caesar-1) over 13 content tokens."""
    from .training.data import Language, SyntheticTaskSpec
    return SyntheticTaskSpec(vocab_size=16, languages=(Language(3, "reverse"), Language(4, "caesar", 1)),
                             min_len=3, max_len=8, upsample=4, feature_dim=16, noise_std=0.1, seed=0)


def desk_model(variant: str = "parallel", **overrides) -> ModelConfig:
    """d_model 64, two encoder and two layers per decoder; coupled variants attend at the source sub-layer."""
    base = dict(variant=variant, d_model=64, heads=4, d_ffn=256, enc_layers=2, dec_layers=2, vocab_size=16,
                d_feat=16)
    if variant in ("parallel", "cross"):
        base.update(dual_at_self=False, dual_at_source=True, merge="sum_learnable")
    base.update(overrides)
    return ModelConfig(**base)


def desk_training(**overrides):
    from .training.train import TrainingConfig
    base = dict(base_lr=0.03, warmup_steps=200, batch_size=32, max_steps=2000, eval_every=250, log_every=50,
                seed=0)
    base.update(overrides)
    return TrainingConfig(**base)
