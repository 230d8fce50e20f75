"""Teacher-forced joint training loop."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..core.params import LayerParams
from ..core.tensor import Tensor, default_dtype, no_grad
from ..errors import ConfigError, NumericError
from ..model import dual_decoder as D
from ..model.config import ModelConfig
from ..model.params import init_params
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import Batch, SyntheticTaskSpec, generate_batch, validation_set
from .losses import token_accuracy, weighted_loss
from .optim import AdamState, adam_step, noam_lr

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 0.3
    label_smoothing_eps: float = 0.1
    base_lr: float = 1e-3
    warmup_steps: int = 25000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-9
    batch_size: int = 32
    max_steps: int = 1000
    seed: int = 0
    init_from: str | None = None
    share_decoder_weights: bool = False
    eval_every: int = 100
    log_every: int = 10
    val_per_length: int = 16
    dtype: str = "float64"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.warmup_steps < 1:
            raise ConfigError("warmup_steps must be >= 1")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("batch_size must be positive and max_steps non-negative")
        if not 0.0 <= self.label_smoothing_eps < 1.0:
            raise ConfigError("label_smoothing_eps must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown training config keys: {unknown}")
        return cls(**data)


class TrainingAborted(NumericError):
    def __init__(self, message: str, checkpoint: Checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    params: LayerParams
    config: ModelConfig
    metrics: list[dict] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)


def warm_start(params: LayerParams, donor: dict[str, np.ndarray]) -> list[str]:
    """Copy matching tensors from ``donor`` into ``params``; returns the names copied.

    A shared-decoder donor (``dec.*``) initializes both ``asr.*`` and ``st.*``.
    Parameters without a donor (e.g. dual-attention layers) keep their values.
    """
    copied = []
    for name in params:
        candidates = [name]
        head, _, rest = name.partition(".")
        if head in ("asr", "st"):
            candidates.append(f"dec.{rest}")
        for cand in candidates:
            src = donor.get(cand)
            if src is not None and src.shape == params[name].shape:
                params[name].data[...] = src
                copied.append(name)
                break
    return copied


def batch_loss(params: LayerParams, config: ModelConfig, batch: Batch, alpha: float, eps: float, dtype,
               rng=None, languages=None):
    """Joint loss on one batch; returns (loss tensor, logits_y, logits_z, diagnostics)."""
    y_in, y_out = batch.asr_io()
    z_in, z_out = batch.st_io(languages)
    mem = D.encode(Tensor(batch.features, dtype=dtype), params, config, rng)
    ly, lz, diag = D.forward_teacher_forced(mem, y_in, z_in, params, config, rng)
    langs = batch.languages if languages is None else np.broadcast_to(languages, (len(batch),))
    loss = weighted_loss(ly, lz, y_out, z_out, alpha, eps, languages=langs)
    return loss, ly, lz, diag


def evaluate(params: LayerParams, config: ModelConfig, batches: list[Batch], spec: SyntheticTaskSpec,
             alpha: float = 0.3, eps: float = 0.1) -> dict:
    """Teacher-forced loss and token accuracies; every language is scored on every example."""
    dtype = next(iter(params.values())).data.dtype
    correct_y = count_y = 0
    correct_z = count_z = 0
    loss_sum = 0.0
    n = 0
    with no_grad():
        for batch in batches:
            y_in, y_out = batch.asr_io()
            mem = D.encode(Tensor(batch.features, dtype=dtype), params, config)
            for lang in spec.languages:
                z_in, z_out = batch.st_io(lang.token)
                ly, lz, _ = D.forward_teacher_forced(mem, y_in, z_in, params, config)
                loss = weighted_loss(ly, lz, y_out, z_out, alpha, eps)
                loss_sum += float(loss.data)
                n += 1
                c, k = token_accuracy(ly, y_out)
                correct_y, count_y = correct_y + c, count_y + k
                c, k = token_accuracy(lz, z_out)
                correct_z, count_z = correct_z + c, count_z + k
    return {"loss": loss_sum / max(n, 1), "asr_acc": correct_y / max(count_y, 1), "st_acc": correct_z / max(count_z, 1)}


def train(model_config: ModelConfig, training_config: TrainingConfig, task: SyntheticTaskSpec,
          params: LayerParams | None = None, resume: Checkpoint | None = None, log_path=None,
          checkpoint_path=None, checkpoint_every: int | None = None, max_steps: int | None = None,
          callback: Callable[[int, float], None] | None = None) -> TrainResult:
    """Optimize the joint loss on freshly drawn synthetic batches.

    ``resume`` continues a previous run exactly (parameters, Adam moments,
    step counter and random state). ``training_config.init_from`` instead
    warm-starts a new run from a donor checkpoint's parameters.
    ``max_steps`` overrides ``training_config.max_steps`` as the step to
    stop at.
    """
    tc = training_config
    cfg = model_config
    if tc.share_decoder_weights and not cfg.share_decoder_weights:
        cfg = cfg.replace(share_decoder_weights=True)
    if cfg.vocab_size < task.vocab_size or cfg.d_feat != task.feature_dim:
        raise ConfigError("model vocab/feature sizes do not fit the task")
    dtype = np.dtype(tc.dtype)
    stop = tc.max_steps if max_steps is None else max_steps

    with default_dtype(dtype):
        if resume is not None:
            cfg = resume.model_config
            params = resume.to_params(dtype)
            adam = AdamState(resume.adam.step, {k: v.astype(dtype) for k, v in resume.adam.m.items()},
                             {k: v.astype(dtype) for k, v in resume.adam.v.items()})
            step = resume.step
            rng = resume.restore_rng()
        else:
            if params is None:
                params = init_params(cfg, tc.seed, dtype)
            if tc.init_from:
                donor = load_checkpoint(tc.init_from)
                copied = warm_start(params, donor.params)
                log.info("warm start copied %d/%d tensors from %s", len(copied), len(params), tc.init_from)
            adam = AdamState()
            step = 0
            rng = np.random.default_rng(tc.seed)
        expected = set(init_params_names(cfg))
        if set(params) != expected:
            raise ConfigError("parameter set does not match the model configuration")

        proj = task.projection()
        val = validation_set(task, tc.val_per_length)
        metrics: list[dict] = []
        losses: list[float] = []
        log_fh = open(log_path, "a") if log_path else None
        last_good = Checkpoint.capture(cfg, params, adam, step, rng)
        try:
            while step < stop:
                step += 1
                batch = generate_batch(task, tc.batch_size, rng, projection=proj)
                params.zero_grad()
                loss, _, _, diag = batch_loss(params, cfg, batch, tc.alpha, tc.label_smoothing_eps, dtype,
                                              rng if cfg.dropout > 0 else None)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingAborted(f"loss became {value} at step {step}", last_good)
                loss.backward()
                lr = noam_lr(step, tc.base_lr, tc.warmup_steps)
                try:
                    adam_step(params, adam, lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)
                except NumericError as exc:
                    raise TrainingAborted(str(exc), last_good) from exc
                losses.append(value)
                if callback:
                    callback(step, value)
                do_eval = tc.eval_every and (step % tc.eval_every == 0 or step == stop)
                if do_eval or (tc.log_every and step % tc.log_every == 0):
                    record = {"step": step, "lr": lr, "loss": value, "asr_acc": None, "st_acc": None,
                              "lambda_by_layer": diag["lambda"]}
                    if do_eval:
                        ev = evaluate(params, cfg, val, task, tc.alpha, tc.label_smoothing_eps)
                        record.update(asr_acc=ev["asr_acc"], st_acc=ev["st_acc"], val_loss=ev["loss"])
                        log.info("step %d loss %.4f asr %.4f st %.4f", step, value, ev["asr_acc"], ev["st_acc"])
                    metrics.append(record)
                    if log_fh:
                        log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                        log_fh.flush()
                if checkpoint_every and step % checkpoint_every == 0:
                    last_good = Checkpoint.capture(cfg, params, adam, step, rng, {"training_config": tc.to_dict()})
                    if checkpoint_path:
                        save_checkpoint(checkpoint_path, last_good)
        finally:
            if log_fh:
                log_fh.close()
        final = Checkpoint.capture(cfg, params, adam, step, rng,
                                   {"training_config": tc.to_dict(), "task": task.to_dict()})
        if checkpoint_path:
            save_checkpoint(checkpoint_path, final)
    return TrainResult(final, params, cfg, metrics, losses)


def init_params_names(cfg: ModelConfig) -> list[str]:
    from ..model.params import param_shapes
    return list(param_shapes(cfg))


def decoder_param_count(params: LayerParams) -> int:
    return int(sum(params[n].data.size for n in params if not n.startswith("enc.")))
