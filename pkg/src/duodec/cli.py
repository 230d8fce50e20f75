"""Command-line entry point: ``duodec {train,decode,eval,gradcheck,gen-data}``.

Exit codes are 0 on success, 2 for bad flags or invalid configuration and 1
for any other failure. Every failure writes exactly one JSON line to stderr::

    {"error": "InputError", "exit_code": 1, "message": "..."}

Config files are JSON objects; unknown keys are rejected. ``DUODEC_SEED``
overrides the seed of ``train``, ``gen-data`` and ``gradcheck``.

train config::

    {"model": {ModelConfig fields}, "training": {TrainingConfig fields},
     "task": {SyntheticTaskSpec fields},
     "output": {"checkpoint": "model.ckpt", "metrics_log": "metrics.ndjson",
                "checkpoint_every": 500}}

gradcheck config::

    {"model": {...}, "seed": 0, "h": 1e-5, "tol": 1e-4, "max_per_param": 6}
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core.tensor import Tensor, default_dtype
from .decoding.search import BeamConfig, TraceWriter, decode_multilingual
from .errors import ConfigError, DuodecError, InputError
from .evaluation.dataset import read_dataset, read_ndjson, synthesize, write_ndjson
from .evaluation.report import evaluate_outputs
from .model import dual_decoder as D
from .model.config import ModelConfig
from .training.checkpoint import load_checkpoint
from .training.data import SyntheticTaskSpec
from .training.train import TrainingConfig, train

log = logging.getLogger("duodec")

TRAIN_KEYS = {"model", "training", "task", "output"}
OUTPUT_KEYS = {"checkpoint", "metrics_log", "checkpoint_every"}
GRADCHECK_KEYS = {"model", "seed", "h", "tol", "max_per_param"}


class UsageError(DuodecError):
    """Bad command-line usage (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path, allowed: set[str], what: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: {what} must be a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown {what} keys {unknown}")
    return data


def _env_seed() -> int | None:
    raw = os.environ.get("DUODEC_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"DUODEC_SEED must be an integer, got {raw!r}") from exc


def _emit(obj, out) -> None:
    out.write(json.dumps(obj, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------
def cmd_train(args, out) -> int:
    cfg = _load_json(args.config, TRAIN_KEYS, "train config")
    output = cfg.get("output", {})
    unknown = sorted(set(output) - OUTPUT_KEYS)
    if unknown:
        raise ConfigError(f"unknown output keys {unknown}")
    task = SyntheticTaskSpec.from_dict(cfg.get("task", {}))
    training = dict(cfg.get("training", {}))
    seed = _env_seed()
    if seed is not None:
        training["seed"] = seed
    tc = TrainingConfig.from_dict(training)
    model = ModelConfig.from_dict({"vocab_size": task.vocab_size, "d_feat": task.feature_dim, **cfg.get("model", {})})
    base = Path(args.config).parent
    ckpt_path = base / output.get("checkpoint", "model.ckpt")
    log_path = base / output.get("metrics_log", "metrics.ndjson")
    result = train(model, tc, task, log_path=log_path, checkpoint_path=ckpt_path,
                   checkpoint_every=output.get("checkpoint_every"))
    last = next((m for m in reversed(result.metrics) if m.get("asr_acc") is not None), {})
    _emit({"checkpoint": str(ckpt_path), "metrics_log": str(log_path), "step": result.checkpoint.step,
           "asr_acc": last.get("asr_acc"), "st_acc": last.get("st_acc")}, out)
    return 0


def _parse_languages(text: str | None, known: list[int]) -> list[int]:
    if not text:
        return known
    try:
        langs = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--languages expects comma-separated token ids, got {text!r}") from exc
    if not langs:
        raise UsageError("--languages is empty")
    return langs


def cmd_decode(args, out) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    task = SyntheticTaskSpec.from_dict(ckpt.extra["task"]) if "task" in ckpt.extra else None
    known = [l.token for l in task.languages] if task else []
    langs = _parse_languages(args.languages, known)
    if not langs:
        raise InputError("checkpoint has no language registry; pass --languages")
    config = ckpt.model_config if args.wait_k is None else ckpt.model_config.replace(wait_k=args.wait_k)
    beam = BeamConfig(beam_size=args.beam, length_penalty=args.penalty, max_len_y=args.max_len,
                      max_len_z=args.max_len)
    records = read_dataset(args.input)
    dtype = np.dtype(ckpt.dtype)
    params = ckpt.to_params(dtype)
    trace_fh = open(args.trace, "w") if args.trace else None
    sink = open(args.output, "w") if args.output else out
    try:
        with default_dtype(dtype):
            for rec in records:
                mem = D.encode(Tensor(rec.frames(task), dtype=dtype), params, config)
                trace = TraceWriter(trace_fh, id=rec.id) if trace_fh else None
                res = decode_multilingual(mem, params, config, beam, langs, known_languages=known or None,
                                          trace=trace)
                first = res[langs[0]]
                z = {str(l): r.z for l, r in res.items()}
                scores = {str(l): r.score for l, r in res.items()}
                _emit({"id": rec.id, "y": first.y, "z": z, "score": scores,
                       "transcript": first.y, "translations": z, "scores": scores,
                       "transcripts": {str(l): r.y for l, r in res.items()}}, sink)
    finally:
        if trace_fh:
            trace_fh.close()
        if args.output:
            sink.close()
    return 0


def cmd_eval(args, out) -> int:
    refs = [obj for _, obj in read_ndjson(args.ref)]
    hyps = [obj for _, obj in read_ndjson(args.hyp)]
    _emit(evaluate_outputs(refs, hyps).to_dict(), out)
    return 0


def cmd_gradcheck(args, out) -> int:
    from .toy import toy_gradcheck

    cfg = _load_json(args.config, GRADCHECK_KEYS, "gradcheck config") if args.config else {}
    seed = _env_seed()
    if seed is None:
        seed = int(cfg.get("seed", 0))
    report = toy_gradcheck(cfg.get("model"), seed=seed, h=float(cfg.get("h", 1e-5)), tol=float(cfg.get("tol", 1e-4)),
                           max_per_param=cfg.get("max_per_param", 6))
    _emit(report.as_dict(), out)
    return 0 if report.passed else 1


def cmd_gen_data(args, out) -> int:
    spec = SyntheticTaskSpec.from_dict(_load_json(args.spec, {f for f in SyntheticTaskSpec.__dataclass_fields__},
                                                  "task spec"))
    seed = _env_seed()
    seed = args.seed if seed is None else seed
    records = synthesize(spec, args.count, seed=seed, with_features=not args.no_features)
    write_ndjson(args.out, (r.to_json() for r in records))
    _emit({"out": str(args.out), "records": len(records)}, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="duodec", description="Dual-decoder joint transcription and translation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("decode", help="joint beam search over an NDJSON dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--penalty", type=float, default=0.5)
    p.add_argument("--wait-k", type=int, default=None, help="defaults to the checkpoint's wait_k")
    p.add_argument("--languages", default=None, help="comma-separated language token ids")
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--output", default=None, help="NDJSON output path (default: stdout)")
    p.add_argument("--trace", default=None, help="write per-step beam pools as NDJSON")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of a seeded toy model")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("gen-data", help="write a synthetic NDJSON dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-features", action="store_true", help="store source tokens only")
    p.set_defaults(fn=cmd_gen_data)
    return parser


def _fail(exc: BaseException, code: int, err) -> int:
    err.write(json.dumps({"error": type(exc).__name__, "exit_code": code,
                          "message": " ".join(str(exc).split())}, sort_keys=True) + "\n")
    err.flush()
    return code


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(exc, 2, err)
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=err, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args, out)
    except (UsageError, ConfigError) as exc:
        return _fail(exc, 2, err)
    except (DuodecError, ValueError, OSError, KeyError, FloatingPointError, RuntimeError) as exc:
        return _fail(exc, 1, err)


if __name__ == "__main__":
    sys.exit(main())
