"""Scoring a set of decoded outputs against references."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import InputError
from .metrics import bleu, corpus_wer, sequence_accuracy


@dataclass
class EvalReport:
    wer: float                                   # percent
    bleu: dict[str, float] = field(default_factory=dict)
    sequence_accuracy: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def normalize_output(obj: dict) -> tuple[str, list[int], dict[str, list[int]]]:
    """Accept either a dataset record or a decode output line.

    Returns ``(id, transcript, {language: translation})``.
    """
    if "id" not in obj:
        raise InputError("record without an id")
    if "y" in obj:
        y, z = obj["y"], obj.get("z", {})
    else:
        y, z = obj.get("transcript"), obj.get("translations", {})
    if y is None or not isinstance(z, dict):
        raise InputError(f"record {obj['id']}: missing transcript or translations")
    return str(obj["id"]), [int(t) for t in y], {str(k): [int(t) for t in v] for k, v in z.items()}


def evaluate_outputs(refs: list[dict], hyps: list[dict]) -> EvalReport:
    """Corpus WER over transcripts and per-language BLEU over translations, matched by id."""
    ref_map = {}
    for obj in refs:
        rid, y, z = normalize_output(obj)
        if rid in ref_map:
            raise InputError(f"duplicate reference id {rid}")
        ref_map[rid] = (y, z)
    hyp_map = {}
    for obj in hyps:
        hid, y, z = normalize_output(obj)
        hyp_map[hid] = (y, z)
    missing = sorted(set(ref_map) - set(hyp_map))
    if missing:
        raise InputError(f"hypotheses missing for ids {missing[:5]}")
    if not ref_map:
        raise InputError("empty reference set")
    ids = sorted(ref_map)
    ry = [ref_map[i][0] for i in ids]
    hy = [hyp_map[i][0] for i in ids]
    langs = sorted({l for i in ids for l in hyp_map[i][1]}, key=lambda s: (len(s), s))
    report = EvalReport(wer=100.0 * corpus_wer(ry, hy), counts={"utterances": len(ids)})
    report.sequence_accuracy["asr"] = sequence_accuracy(ry, hy)
    for lang in langs:
        pairs = [(ref_map[i][1][lang], hyp_map[i][1][lang]) for i in ids if lang in hyp_map[i][1]]
        if any(lang not in ref_map[i][1] for i in ids if lang in hyp_map[i][1]):
            raise InputError(f"language {lang} has no reference for some hypotheses")
        rz, hz = [p[0] for p in pairs], [p[1] for p in pairs]
        report.bleu[lang] = bleu(rz, hz)
        report.sequence_accuracy[lang] = sequence_accuracy(rz, hz)
        report.counts[f"st_{lang}"] = len(pairs)
    return report
