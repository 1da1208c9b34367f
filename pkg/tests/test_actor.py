import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from seqlink import nn
from seqlink.actor import (
    Action,
    ActorNetwork,
    HistoryRecord,
    IncrementalEncoder,
    NoCandidatesError,
    project_action,
    project_half,
)
from seqlink.embedding import EmbeddingMatrix
from oracles import brute_force_cosine_argmax, fd_gradient_params, rel_error


def rng(seed=0):
    return np.random.default_rng(seed)


def make_actor(d=3, feedback_dim=4, seed=1):
    return ActorNetwork(d, feedback_dim, rng=rng(seed))


def random_record(actor, r, reward=None, step=0):
    g = np.zeros(actor.feedback_dim)
    g[step % actor.feedback_dim] = reward if reward is not None else r.choice([-1.0, 1.0])
    return HistoryRecord(r.normal(size=actor.d), r.normal(size=actor.d), g)


# ---------------------------------------------------------------------------
# feedback encoding
# ---------------------------------------------------------------------------

def test_feedback_zero_input_zero_bias_gives_zero():
    actor = ActorNetwork(3, 4)  # zero-initialized layers
    assert_array_equal(actor.encode_feedback(np.zeros(4)), np.zeros(3))


def test_feedback_output_dimension_matches_embedding_dim():
    actor = ActorNetwork(128, 60, rng=rng(2))
    assert actor.encode_feedback(np.zeros(60)).shape == (128,)


def test_feedback_encodes_reward_sign():
    actor = make_actor(seed=3)
    g_pos = np.zeros(4)
    g_pos[2] = 1.0
    g_neg = -g_pos
    assert not np.allclose(actor.encode_feedback(g_pos), actor.encode_feedback(g_neg))


def test_feedback_length_checked():
    actor = make_actor()
    with pytest.raises(nn.ShapeError):
        actor.encode_feedback(np.zeros(5))


# ---------------------------------------------------------------------------
# history encoding
# ---------------------------------------------------------------------------

def test_empty_history_encodes_to_zero():
    actor = make_actor()
    assert_array_equal(actor.encode_history([]), np.zeros(6))


def test_single_record_is_its_hidden_state():
    actor = make_actor(seed=5)
    rec = random_record(actor, rng(6))
    h, _ = actor.lstm.step(actor.record_input(rec), np.zeros(6), np.zeros(6))
    assert_allclose(actor.encode_history([rec]), h, atol=1e-14)


def test_history_input_width_is_three_d():
    actor = ActorNetwork(128, 60, rng=rng(7))
    rec = HistoryRecord(np.zeros(128), np.zeros(128), np.zeros(60))
    assert actor.record_input(rec).shape == (3 * 128,)  # 384


def test_history_encoding_in_convex_hull_of_hidden_states():
    actor = make_actor(seed=8)
    r = rng(9)
    records = [random_record(actor, r, step=i) for i in range(5)]
    h = np.zeros(6)
    c = np.zeros(6)
    hs = []
    for rec in records:
        h, c = actor.lstm.step(actor.record_input(rec), h, c)
        hs.append(h)
    hs = np.stack(hs)
    pooled = actor.encode_history(records)
    assert np.all(pooled >= hs.min(axis=0) - 1e-12)
    assert np.all(pooled <= hs.max(axis=0) + 1e-12)


# ---------------------------------------------------------------------------
# state embedding
# ---------------------------------------------------------------------------

def test_state_with_empty_history_is_s_net_bit_exact():
    actor = make_actor()
    s_net = rng(10).normal(size=6)
    assert_array_equal(actor.encode_state(s_net, []), s_net)


def test_state_additive_inverse_cancels():
    actor = make_actor(seed=11)
    records = [random_record(actor, rng(12), step=i) for i in range(3)]
    s_pair = actor.encode_history(records)
    assert_allclose(actor.encode_state(-s_pair, records), np.zeros(6), atol=1e-15)


def test_state_equals_independent_sum():
    actor = make_actor(seed=13)
    records = [random_record(actor, rng(14), step=i) for i in range(4)]
    s_net = rng(15).normal(size=6)
    expected = actor.encode_history(records) + s_net
    assert_allclose(actor.encode_state(s_net, records), expected, atol=1e-15)


def test_state_dimension_checked():
    actor = make_actor()
    with pytest.raises(nn.ShapeError):
        actor.encode_state(np.zeros(5), [])


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def test_decode_deterministic_without_noise():
    actor = make_actor(seed=16)
    s = rng(17).normal(size=6)
    assert_array_equal(actor.decode(s), actor.decode(s))


def test_decode_zero_parameters_gives_zero():
    actor = ActorNetwork(3, 4)
    assert_array_equal(actor.decode(rng(18).normal(size=6)), np.zeros(6))


def test_decode_output_splits_into_halves():
    actor = ActorNetwork(128, 60, rng=rng(19))
    proto = actor.decode(rng(20).normal(size=256))
    assert proto.shape == (256,)
    assert proto[:128].shape == (128,) and proto[128:].shape == (128,)


def test_decode_noise_is_seeded():
    actor = make_actor(seed=21)
    s = rng(22).normal(size=6)
    p1 = actor.decode(s, noise_scale=0.5, rng=rng(23))
    p2 = actor.decode(s, noise_scale=0.5, rng=rng(23))
    assert_array_equal(p1, p2)
    assert not np.allclose(p1, actor.decode(s))


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def embeddings_from_rows(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return EmbeddingMatrix([f"n{i}" for i in range(rows.shape[0])], rows)


def test_projection_self_similarity():
    r = rng(24)
    rows = r.normal(size=(6, 3))
    m = embeddings_from_rows(rows)
    proto = np.concatenate([rows[4] * 2.0, rows[1] * 0.5])  # scale must not matter
    act = project_action(proto, m, m, np.zeros(6, bool), np.zeros(6, bool))
    assert (act.v_original, act.v_target) == (4, 1)
    assert_array_equal(act.u_original, rows[4])
    assert_array_equal(act.pair_embedding, np.concatenate([rows[4], rows[1]]))


def test_projection_hand_computed_cosines():
    m_t = embeddings_from_rows([[1.0, 0.0], [0.6, 0.8]])
    proto_half = np.array([0.9, 0.1])
    # cosines: 0.9939 vs 0.6847 -> row 0
    assert project_half(proto_half, m_t.norm_rows, np.zeros(2, bool)) == 0
    assert project_half(proto_half, m_t.norm_rows, np.array([True, False])) == 1


def test_projection_tie_breaks_to_lowest_index():
    rows = np.array([[2.0, 0.0], [1.0, 0.0], [0.0, 1.0]])  # rows 0,1 parallel
    m = embeddings_from_rows(rows)
    proto_half = np.array([3.0, 0.0])
    assert project_half(proto_half, m.norm_rows, np.zeros(3, bool)) == 0
    assert project_half(proto_half, m.norm_rows, np.array([True, False, False])) == 1


def test_projection_all_masked_raises():
    m = embeddings_from_rows(np.eye(2))
    with pytest.raises(NoCandidatesError):
        project_half(np.ones(2), m.norm_rows, np.ones(2, bool))


def test_projection_scale_invariance():
    r = rng(25)
    rows = r.normal(size=(20, 4))
    m = embeddings_from_rows(rows)
    proto_half = r.normal(size=4)
    masked = r.random(20) < 0.3
    masked[0] = False
    base = project_half(proto_half, m.norm_rows, masked)
    for c in (1e-3, 0.5, 7.0, 1e4):
        assert project_half(c * proto_half, m.norm_rows, masked) == base


def test_projection_matches_brute_force_oracle():
    r = rng(26)
    for _ in range(50):
        n = int(r.integers(2, 60))
        d = int(r.integers(2, 8))
        rows = r.normal(size=(n, d))
        m = embeddings_from_rows(rows)
        masked = r.random(n) < 0.4
        masked[int(r.integers(n))] = False
        proto_half = r.normal(size=d)
        got = project_half(proto_half, m.norm_rows, masked)
        allowed = [i for i in range(n) if not masked[i]]
        assert got == brute_force_cosine_argmax(proto_half, rows, allowed)


# ---------------------------------------------------------------------------
# batched path vs single-sequence path
# ---------------------------------------------------------------------------

def test_forward_batch_matches_single_path():
    actor = make_actor(seed=27)
    r = rng(28)
    s_net = r.normal(size=6)
    histories = [
        [],
        [random_record(actor, r, step=i) for i in range(1)],
        [random_record(actor, r, step=i) for i in range(4)],
        [random_record(actor, r, step=i) for i in range(2)],
    ]
    protos, _ = actor.forward_batch(histories, s_net)
    for b, hist in enumerate(histories):
        expected = actor.decode(actor.encode_state(s_net, hist))
        assert_allclose(protos[b], expected, atol=1e-13)


def test_forward_batch_window_truncates():
    actor = make_actor(seed=29)
    r = rng(30)
    s_net = r.normal(size=6)
    hist = [random_record(actor, r, reward=-1.0, step=i) for i in range(6)]
    protos, _ = actor.forward_batch([hist], s_net, window=2)
    expected = actor.decode(actor.encode_state(s_net, hist[-2:]))
    assert_allclose(protos[0], expected, atol=1e-13)


def test_forward_batch_window_keeps_recent_positives():
    from seqlink.actor import truncate_history
    actor = make_actor(seed=37)
    r = rng(38)
    hist = [random_record(actor, r, reward=-1.0, step=i) for i in range(8)]
    hist[1] = random_record(actor, r, reward=1.0, step=1)
    hist[2] = random_record(actor, r, reward=1.0, step=2)
    kept = truncate_history(hist, 4)
    # half the window holds the latest confirmed matches, rest is recency
    assert kept == [hist[1], hist[2], hist[6], hist[7]]
    assert truncate_history(hist, 8) == hist
    s_net = r.normal(size=6)
    protos, _ = actor.forward_batch([hist], s_net, window=4)
    expected = actor.decode(actor.encode_state(s_net, kept))
    assert_allclose(protos[0], expected, atol=1e-13)


def test_backward_batch_matches_finite_differences():
    actor = make_actor(d=2, feedback_dim=3, seed=31)
    r = rng(32)
    s_net = r.normal(size=4)
    histories = [
        [random_record(actor, r, step=i) for i in range(3)],
        [random_record(actor, r, step=i) for i in range(1)],
        [],
    ]
    v = r.normal(size=(3, 4))

    def loss():
        protos, _ = actor.forward_batch(histories, s_net)
        return float(np.sum(protos * v))

    protos, cache = actor.forward_batch(histories, s_net)
    grads = actor.backward_batch(cache, v)
    fd = fd_gradient_params(loss, actor.params())
    for name in fd:
        assert rel_error(grads[name], fd[name]) < 1e-4, name


def test_incremental_encoder_matches_batch_recompute():
    actor = make_actor(seed=33)
    r = rng(34)
    s_net = r.normal(size=6)
    enc = IncrementalEncoder(actor, s_net)
    records = []
    assert_array_equal(enc.state(), s_net)
    for i in range(5):
        rec = random_record(actor, r, step=i)
        records.append(rec)
        enc.append(rec)
        assert_allclose(enc.state(), actor.encode_state(s_net, records), atol=1e-13)


def test_every_param_block_is_live_storage():
    # sgd_update writes through params(); every block must alias the layer's
    # own storage or its updates would be silently dropped
    actor = make_actor(seed=36)
    p = actor.params()
    grads = {k: np.ones_like(v) for k, v in p.items()}
    nn.sgd_update(p, grads, nn.SGDConfig(learning_rate=0.25, clip_norm=None))
    fresh = actor.params()
    for name, arr in fresh.items():
        assert_array_equal(arr, p[name], err_msg=name)
    assert float(actor.attention.b[0]) != 0.0


def test_params_round_trip_through_copy():
    actor = make_actor(seed=35)
    clone = actor.copy()
    for name, arr in actor.params().items():
        assert_array_equal(clone.params()[name], arr)
    clone.params()["decoder.W"][0, 0] += 1.0
    assert actor.params()["decoder.W"][0, 0] != clone.params()["decoder.W"][0, 0]
