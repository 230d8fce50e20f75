import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goldens import BLEU_CASES, WER_CASES, reference_edit_distance, w
from duodec.evaluation import (DatasetRecord, bleu, corpus_wer, edit_distance, evaluate_outputs, sequence_accuracy,
                               wer)


@pytest.mark.parametrize("ref, hyp, expected", WER_CASES)
def test_wer_goldens(ref, hyp, expected):
    assert abs(wer(ref, hyp) - expected) <= 1e-12
    assert abs(reference_edit_distance(ref, hyp) / len(ref) - expected) <= 1e-12


@pytest.mark.parametrize("refs, hyps, order, expected", BLEU_CASES)
def test_bleu_goldens(refs, hyps, order, expected):
    assert abs(bleu(refs, hyps, max_order=order) - expected) <= 1e-12


def test_repeated_word_case_is_zero_at_order_four():
    assert bleu([w("the cat")], [w("the the the")]) == 0.0


tokens = st.lists(st.integers(0, 4), max_size=8)


@settings(max_examples=200, deadline=None)
@given(tokens, tokens)
def test_edit_distance_matches_recursive_oracle(a, b):
    assert edit_distance(a, b) == reference_edit_distance(a, b)


@settings(max_examples=100, deadline=None)
@given(tokens, tokens, tokens)
def test_edit_distance_is_a_metric(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert (edit_distance(a, b) == 0) == (a == b)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(0, 5), min_size=1, max_size=8), min_size=1, max_size=4), st.data())
def test_bleu_is_bounded(refs, data):
    hyps = [data.draw(tokens) for _ in refs]
    assert 0.0 <= bleu(refs, hyps) <= 100.0 + 1e-9
    # corpus-level counts: a single sentence with a 4-gram makes every precision defined
    expected = 100.0 if max(len(r) for r in refs) >= 4 else 0.0
    assert bleu(refs, refs) == pytest.approx(expected, abs=1e-12)


def test_metric_errors():
    with pytest.raises(ValueError):
        wer([], [1])
    with pytest.raises(ValueError):
        bleu([[1]], [[1], [2]])
    with pytest.raises(ValueError):
        corpus_wer([[1]], [])


def test_corpus_wer_pools_edits():
    assert corpus_wer([w("a b"), w("c d e f")], [w("a x"), w("c d e f g")]) == 2 / 6


def test_sequence_accuracy():
    assert sequence_accuracy([[1, 2], [3]], [[1, 2], [4]]) == 0.5


def test_evaluate_outputs_matches_by_id():
    refs = [DatasetRecord("u1", [5, 6, 7], {3: [7, 6, 5]}).to_json(),
            DatasetRecord("u2", [8, 9], {3: [9, 8]}).to_json()]
    hyps = [{"id": "u2", "y": [8, 9], "z": {"3": [9, 8]}}, {"id": "u1", "y": [5, 6], "z": {"3": [7, 6, 5]}}]
    report = evaluate_outputs(refs, hyps).to_dict()
    json.dumps(report)
    assert report["wer"] == pytest.approx(100 * 1 / 5)
    assert report["sequence_accuracy"] == {"asr": 0.5, "3": 1.0}
    assert report["bleu"]["3"] == 0.0          # no 4-grams in three- and two-token sentences
    assert report["counts"] == {"utterances": 2, "st_3": 2}
