import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coupled_params, random_memory, random_tokens, small_config
from duodec.core.tensor import Tensor
from duodec.errors import ConfigError, DimensionError, InputError, StateError
from duodec.model import dual_decoder as D
from duodec.model.config import BOS_ID, EOS_ID, ModelConfig, liu_special_case
from duodec.model.params import init_params, param_shapes
from oracles import causality_violations, replay, sequence_log_prob, standalone_stream_logits, terminal_sequences


# -- configuration ------------------------------------------------------------------
def test_coupled_defaults_put_dual_attention_at_source():
    cfg = ModelConfig(variant="parallel")
    assert (cfg.dual_at_self, cfg.dual_at_source) == (False, True)


@pytest.mark.parametrize("variant", ["independent", "triangle", "two_stage"])
def test_uncoupled_variants_reject_dual_flags(variant):
    assert not ModelConfig(variant=variant).dual_at_source
    with pytest.raises(ConfigError):
        ModelConfig(variant=variant, dual_at_self=True)


def test_side_controls_dual_ownership():
    cfg = ModelConfig(variant="parallel", side="st_only")
    assert cfg.has_dual("st") and not cfg.has_dual("asr")
    names = param_shapes(cfg)
    assert any(n.startswith("st.") and "dual_src" in n for n in names)
    assert not any(n.startswith("asr.") and "dual" in n for n in names)


@pytest.mark.parametrize("bad", [dict(variant="tree"), dict(merge="max"), dict(d_model=30, heads=4),
                                 dict(wait_k=600), dict(merge_lambda=float("nan")),
                                 dict(variant="parallel", share_decoder_weights=True), dict(dropout=1.0)])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        ModelConfig(**bad)


def test_config_json_round_trip_and_unknown_keys():
    cfg = ModelConfig(variant="cross", wait_k=-2, merge="concat")
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({**cfg.to_dict(), "colour": 1})


def test_special_case_configuration():
    cfg = liu_special_case()
    assert cfg.variant == "cross" and cfg.dual_at_self and not cfg.dual_at_source
    assert cfg.merge == "sum_fixed" and cfg.merge_lambda == 0.3 and not cfg.normalize_dual_input
    names = param_shapes(cfg)
    assert any(".dual_self_attn." in n for n in names)
    assert not any(".dual_src_" in n or "dual_self_norm" in n or n.endswith(".lam") for n in names)


def test_parameter_enumeration_sorted_and_deterministic():
    cfg = small_config(variant="parallel")
    a, b = init_params(cfg, 3), init_params(cfg, 3)
    assert list(a) == sorted(a)
    assert all(np.array_equal(a[n].data, b[n].data) for n in a)


def test_merge_lambda_starts_at_zero():
    params = init_params(small_config(variant="parallel", dual_at_self=True))
    lams = [n for n in params if n.endswith(".lam")]
    assert len(lams) == 2 * 2 * 2
    assert all(float(params[n].data) == 0.0 for n in lams)


# -- masks and merge ---------------------------------------------------------------
def test_dual_mask_examples():
    m = D.dual_mask(5, 5, 0)
    assert set(np.flatnonzero(m[2])) == {0, 1, 2}
    assert set(np.flatnonzero(D.dual_mask(5, 8, 3)[0])) == {0, 1, 2, 3}
    assert not D.dual_mask(5, 5, -3)[1].any()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(-5, 5))
def test_dual_mask_definition(q, k, offset):
    m = D.dual_mask(q, k, offset)
    i, j = np.indices((q, k))
    assert np.array_equal(m, j <= i + offset)


def test_merge_examples():
    main, dual = Tensor([[1.0, 1.0]]), Tensor([[2.0, -2.0]])
    assert np.array_equal(D.merge(main, dual, "sum", lam=0.0).data, main.data)
    np.testing.assert_allclose(D.merge(main, dual, "sum", lam=0.3).data, [[1.6, 0.4]], rtol=1e-15)
    w = np.hstack([np.eye(2), np.zeros((2, 2))])
    out = D.merge(main, dual, "concat", weight=Tensor(w), bias=Tensor(np.zeros(2)))
    assert np.array_equal(out.data, main.data)


def test_merge_shape_mismatch():
    with pytest.raises(DimensionError):
        D.merge(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))), "sum", lam=0.3)


# -- encoder ----------------------------------------------------------------------------
def test_encoder_length_and_determinism(rng):
    cfg = small_config(d_model=32, heads=4)
    params = init_params(cfg)
    x = Tensor(rng.normal(size=(100, cfg.d_feat)))
    a, b = D.encode(x, params, cfg), D.encode(x, params, cfg)
    assert a.hidden.shape == (25, 32)
    assert np.array_equal(a.hidden.data, b.hidden.data)


def test_encoder_zero_input_is_finite():
    cfg = small_config()
    mem = D.encode(Tensor(np.zeros((16, cfg.d_feat))), init_params(cfg), cfg)
    assert np.isfinite(mem.hidden.data).all()


def test_encoder_rejects_wrong_feature_width(rng):
    cfg = small_config()
    with pytest.raises(InputError):
        D.encode(Tensor(rng.normal(size=(8, cfg.d_feat + 1))), init_params(cfg), cfg)


# -- teacher-forced forward ---------------------------------------------------------------
def test_independent_streams_do_not_interact(rng):
    cfg = small_config(variant="independent")
    params = init_params(cfg, 1)
    mem = random_memory(cfg, params, rng)
    y, z = random_tokens(rng, cfg, 5, BOS_ID), random_tokens(rng, cfg, 4, 3)
    ly, lz, _ = D.forward_teacher_forced(mem, y, z, params, cfg)
    ly2, _, _ = D.forward_teacher_forced(mem, y, random_tokens(rng, cfg, 7, 3), params, cfg)
    _, lz2, _ = D.forward_teacher_forced(mem, random_tokens(rng, cfg, 2, BOS_ID), z, params, cfg)
    assert np.array_equal(ly.data, ly2.data) and np.array_equal(lz.data, lz2.data)


@pytest.mark.parametrize("variant", ["parallel", "cross"])
@pytest.mark.parametrize("merge", ["sum_learnable", "sum_fixed"])
def test_zero_lambda_reduces_to_independent(rng, variant, merge):
    cfg = small_config(variant=variant, dual_at_self=True, merge=merge, merge_lambda=0.0)
    ind = small_config(variant="independent")
    params = init_params(cfg, 5)
    ind_params = init_params(ind, 5)
    mem = random_memory(ind, ind_params, rng)
    y, z = random_tokens(rng, cfg, 6, BOS_ID), random_tokens(rng, cfg, 5, 3)
    a = D.forward_teacher_forced(mem, y, z, params, cfg)
    b = D.forward_teacher_forced(mem, y, z, ind_params, ind)
    assert np.array_equal(a[0].data, b[0].data) and np.array_equal(a[1].data, b[1].data)


@pytest.mark.parametrize("variant", ["parallel", "cross"])
@pytest.mark.parametrize("wait_k", [0, 2, -2])
def test_causality_probe(rng, variant, wait_k):
    cfg = small_config(variant=variant, dual_at_self=True, wait_k=wait_k)
    params = coupled_params(cfg, 2)
    informative = 0
    for _ in range(5):
        mem = random_memory(cfg, params, rng)
        y, z = random_tokens(rng, cfg, 6, BOS_ID), random_tokens(rng, cfg, 5, 3)
        bad, info = causality_violations(cfg, params, mem, y, z, rng, trials=2)
        assert bad == []
        informative += info
    assert informative > 0


def test_st_only_asr_ignores_translation(rng):
    cfg = small_config(variant="parallel", side="st_only", dual_at_self=True)
    params = coupled_params(cfg, 4)
    mem = random_memory(cfg, params, rng)
    y = random_tokens(rng, cfg, 5, BOS_ID)
    ly, lz, _ = D.forward_teacher_forced(mem, y, random_tokens(rng, cfg, 5, 3), params, cfg)
    ly2, lz2, _ = D.forward_teacher_forced(mem, y, random_tokens(rng, cfg, 5, 3), params, cfg)
    assert np.array_equal(ly.data, ly2.data)
    _, lz3, _ = D.forward_teacher_forced(mem, random_tokens(rng, cfg, 5, BOS_ID), np.zeros(5, int) + 4, params, cfg)
    _, lz4, _ = D.forward_teacher_forced(mem, random_tokens(rng, cfg, 5, BOS_ID), np.zeros(5, int) + 4, params, cfg)
    assert not np.array_equal(lz3.data, lz4.data)


def test_concat_merge_forward_and_diagnostics(rng):
    cfg = small_config(variant="parallel", merge="concat", dual_at_self=True)
    params = init_params(cfg, 0)
    mem = random_memory(cfg, params, rng)
    ly, lz, diag = D.forward_teacher_forced(mem, random_tokens(rng, cfg, 4, 1), random_tokens(rng, cfg, 3, 3),
                                            params, cfg, collect=True)
    assert ly.shape == (4, cfg.vocab_size) and lz.shape == (3, cfg.vocab_size)
    assert len(diag["dual_attention_entropy"]) == 2 * 2 * 2
    assert all(v >= 0 for v in diag["dual_attention_entropy"].values())


def test_batched_forward_matches_rows(rng):
    cfg = small_config(variant="parallel", dual_at_self=True)
    params = coupled_params(cfg, 1)
    x = rng.normal(size=(3, 12, cfg.d_feat))
    y, z = random_tokens(rng, cfg, 4, BOS_ID, batch=3), random_tokens(rng, cfg, 5, 3, batch=3)
    ly, lz, _ = D.forward_teacher_forced(D.encode(Tensor(x), params, cfg), y, z, params, cfg)
    for b in range(3):
        one = D.forward_teacher_forced(D.encode(Tensor(x[b]), params, cfg), y[b], z[b], params, cfg)
        np.testing.assert_allclose(ly.data[b], one[0].data, atol=1e-12)
        np.testing.assert_allclose(lz.data[b], one[1].data, atol=1e-12)


# -- chained variants --------------------------------------------------------------------
def test_two_stage_ignores_encoder_given_asr_states(rng):
    cfg = small_config(variant="two_stage")
    params = init_params(cfg, 0)
    y, z = random_tokens(rng, cfg, 5, BOS_ID), random_tokens(rng, cfg, 4, 3)
    m1, m2 = random_memory(cfg, params, rng), random_memory(cfg, params, rng)
    a = D._run_stream(params, "asr", D._embed(params, cfg, "asr", y), m1.hidden, cfg)
    hy, _ = D._head(params, "asr", a, cfg)
    z1 = D.forward_chained(m1, y, z, params, cfg, _asr_states=hy)
    z2 = D.forward_chained(m2, y, z, params, cfg, _asr_states=hy)
    assert np.array_equal(z1.data, z2.data)


def test_triangle_with_empty_asr_window_is_encoder_only_decoder(rng):
    cfg = small_config(variant="triangle")
    params = init_params(cfg, 0)
    ind = small_config(variant="independent")
    mem = random_memory(cfg, params, rng)
    y, z = random_tokens(rng, cfg, 5, BOS_ID), random_tokens(rng, cfg, 4, 3)
    lz = D.forward_chained(mem, y, z, params, cfg, asr_mask=np.zeros((4, 5), bool))
    _, ref, _ = D.forward_teacher_forced(mem, y, z, init_params(ind, 0), ind)
    assert np.array_equal(lz.data, ref.data)


def test_triangle_and_two_stage_differ(rng):
    tri, two = small_config(variant="triangle"), small_config(variant="two_stage")
    p_tri, p_two = init_params(tri, 0), init_params(two, 0)
    mem = random_memory(tri, p_tri, rng)
    y, z = random_tokens(rng, tri, 5, BOS_ID), random_tokens(rng, tri, 4, 3)
    assert not np.array_equal(D.forward_chained(mem, y, z, p_tri, tri).data,
                              D.forward_chained(mem, y, z, p_two, two).data)


def test_chained_translation_is_causal_in_translation_only(rng):
    cfg = small_config(variant="triangle")
    params = init_params(cfg, 0)
    mem = random_memory(cfg, params, rng)
    y, z = random_tokens(rng, cfg, 5, BOS_ID), random_tokens(rng, cfg, 4, 3)
    base = D.forward_chained(mem, y, z, params, cfg).data
    z2 = z.copy()
    z2[3] = 3 + (z2[3] - 2) % (cfg.vocab_size - 3)
    moved = D.forward_chained(mem, y, z2, params, cfg).data
    assert np.array_equal(base[:3], moved[:3])


# -- incremental decoding ----------------------------------------------------------------------
@pytest.mark.parametrize("variant", ["parallel", "cross", "independent", "triangle", "two_stage"])
@pytest.mark.parametrize("wait_k", [0, 3, -2])
def test_incremental_matches_teacher_forcing(rng, variant, wait_k):
    kw = dict(dual_at_self=True) if variant in ("parallel", "cross") else {}
    cfg = small_config(variant=variant, wait_k=wait_k if variant in ("parallel", "cross") else 0, **kw)
    params = coupled_params(cfg, 7)
    mem = random_memory(cfg, params, rng)
    y, z = random_tokens(rng, cfg, 6, BOS_ID), random_tokens(rng, cfg, 4, 3)
    ly, lz, _ = D.forward_teacher_forced(mem, y, z, params, cfg)
    iy, iz = replay(mem, y, z, params, cfg)
    np.testing.assert_allclose(iy, ly.data, atol=1e-10, rtol=0)
    np.testing.assert_allclose(iz, lz.data, atol=1e-10, rtol=0)


def test_cross_asr_ignores_translation_hidden_states(rng):
    cfg = small_config(variant="cross", dual_at_self=True)
    params = coupled_params(cfg, 3)
    mem = random_memory(cfg, params, rng)
    states = D.init_states(cfg, np.float64)
    for y_tok, z_tok in [(BOS_ID, 3), (5, 6), (7, 8)]:
        _, _, states = D.decode_step(states, mem, y_tok, z_tok, params, cfg)
    scrubbed = D.DecoderStates(states.asr, D.StreamCache(states.st.tokens,
                                                         [states.st.layers[0]] + [np.zeros_like(a) for a in
                                                                                  states.st.layers[1:]],
                                                         np.zeros_like(states.st.final)))
    a, _, _ = D.decode_step(states, mem, 9, 4, params, cfg)
    b, _, _ = D.decode_step(scrubbed, mem, 9, 4, params, cfg)
    assert np.array_equal(a, b)


def test_wait_k_first_step_is_transcript_only(rng):
    cfg = small_config(variant="parallel", wait_k=3)
    params = coupled_params(cfg)
    mem = random_memory(cfg, params, rng)
    states = D.init_states(cfg, np.float64)
    assert D.may_advance(states, cfg) == (True, False)
    ly, lz, states = D.decode_step(states, mem, BOS_ID, None, params, cfg)
    assert ly is not None and lz is None
    with pytest.raises(StateError):
        D.decode_step(states, mem, 5, 3, params, cfg)


def test_decode_step_rejects_batched_memory(rng):
    cfg = small_config()
    params = init_params(cfg)
    mem = random_memory(cfg, params, rng, batch=2)
    with pytest.raises(StateError):
        D.decode_step(D.init_states(cfg, np.float64), mem, BOS_ID, 3, params, cfg)


def test_cache_length_gap_bounded_by_wait_k(rng):
    cfg = small_config(variant="parallel", wait_k=2)
    params = coupled_params(cfg)
    mem = random_memory(cfg, params, rng)
    states = D.init_states(cfg, np.float64)
    for _ in range(6):
        ay, az = D.may_advance(states, cfg)
        _, _, states = D.decode_step(states, mem, 5 if ay else None, 4 if az else None, params, cfg)
        assert abs(states.asr.length - states.st.length) <= 2


def test_schedule_wait_k_gap():
    ny = nz = 0
    gaps = []
    for _ in range(8):
        ay, az = D.schedule(ny, nz, False, False, 3)
        ny, nz = ny + ay, nz + az
        gaps.append(ny - nz)
    assert gaps == [1, 2, 3, 3, 3, 3, 3, 3]


def test_chained_schedule_waits_for_transcript():
    assert D.schedule(4, 0, False, False, 0, chained=True) == (True, False)
    assert D.schedule(4, 0, True, False, 0, chained=True) == (False, True)


# -- joint log-probability -------------------------------------------------------------------
def test_joint_log_prob_matches_incremental_sum(rng):
    cfg = small_config(variant="parallel", dual_at_self=True, wait_k=1)
    params = coupled_params(cfg, 2)
    mem = random_memory(cfg, params, rng)
    y = np.concatenate([[BOS_ID], random_tokens(rng, cfg, 4), [EOS_ID]])
    z = np.concatenate([[3], random_tokens(rng, cfg, 3), [EOS_ID]])
    iy, iz = replay(mem, y[:-1], z[:-1], params, cfg)
    expected = sequence_log_prob(iy, y[1:]) + sequence_log_prob(iz, z[1:])
    assert abs(D.joint_log_prob(mem, y, z, params, cfg) - expected) < 1e-10


def test_independent_factorization(rng):
    cfg = small_config(variant="independent")
    params = init_params(cfg, 9)
    mem = random_memory(cfg, params, rng)
    y = np.concatenate([[BOS_ID], random_tokens(rng, cfg, 5), [EOS_ID]])
    z = np.concatenate([[4], random_tokens(rng, cfg, 3), [EOS_ID]])
    ref = (sequence_log_prob(standalone_stream_logits(mem.hidden, y[:-1], params, cfg, "asr"), y[1:])
           + sequence_log_prob(standalone_stream_logits(mem.hidden, z[:-1], params, cfg, "st"), z[1:]))
    assert abs(D.joint_log_prob(mem, y, z, params, cfg) - ref) < 1e-10


@pytest.mark.parametrize("variant", ["parallel", "cross", "independent"])
def test_joint_distribution_normalizes(rng, variant):
    """Sum of exp(joint log-prob) over every terminal pair (max two tokens per stream) is one."""
    kw = dict(dual_at_self=True) if variant != "independent" else {}
    cfg = small_config(variant=variant, vocab_size=3, **kw)
    params = coupled_params(cfg, 11)
    mem = random_memory(cfg, params, rng)
    seqs = terminal_sequences([0, 1], 2, EOS_ID)
    total = 0.0
    for ys in seqs:
        for zs in seqs:
            total += np.exp(D.joint_log_prob(mem, [BOS_ID] + ys, [BOS_ID] + zs, params, cfg))
    assert len(seqs) == 7
    assert abs(total - 1.0) < 1e-12


def test_conditionals_sum_to_one(rng):
    cfg = small_config(variant="parallel", dual_at_self=True)
    params = coupled_params(cfg)
    mem = random_memory(cfg, params, rng)
    ly, lz, _ = D.forward_teacher_forced(mem, random_tokens(rng, cfg, 5, 1), random_tokens(rng, cfg, 5, 3),
                                         params, cfg)
    for logits in (ly.data, lz.data):
        p = np.exp(logits - logits.max(-1, keepdims=True))
        p /= p.sum(-1, keepdims=True)
        np.testing.assert_allclose(p.sum(-1), 1.0, atol=1e-12)


def test_out_of_vocabulary_tokens_rejected(rng):
    cfg = small_config()
    params = init_params(cfg)
    mem = random_memory(cfg, params, rng)
    with pytest.raises(InputError):
        D.forward_teacher_forced(mem, [1, cfg.vocab_size], [3, 4], params, cfg)
