import numpy as np
import pytest

from keyreader import tensor as T
from keyreader.config import RunConfig
from keyreader.layers import CharVocab, ParamStore
from keyreader.pipeline import build_system
from keyreader.reader import InteractionHop, Reader, SpanDistribution, TokenFeatures, best_span, reader_loss
from keyreader.textproc.vocab import Vocabulary

import oracles
from conftest import TINY


def _feats(system, passage, question):
    return system.features(passage, question)


def test_question_side_has_no_match_bits(tiny_system, tiny_examples):
    ex = tiny_examples[0]
    pf, qf = _feats(tiny_system, ex.passage_tokens, ex.question_tokens)
    assert not qf.bits.any()
    assert pf.bits.any()


def test_default_input_width_is_443():
    cfg = RunConfig()
    vocab = Vocabulary(["a", "b"])
    store = ParamStore(0)
    store.add("emb", np.zeros((len(vocab), 300)), trainable=False)
    r = Reader(store, cfg, vocab, CharVocab("ab"), np.zeros((12, 20)), np.zeros((7, 20)), "emb")
    assert r.input_dim == 443


@pytest.mark.parametrize("n", [1, 2, 5, 11])
def test_encoding_rows_follow_lengths(tiny_system, n):
    passage = (["alice", "bought", "a", "red", "car", "."] * 2)[:n]
    pf, qf = _feats(tiny_system, passage, ["who", "bought", "?"])
    enc = tiny_system.reader.encode(pf, qf)
    assert enc.C.shape == (n, 2 * TINY.hidden) and enc.G.shape == (3, 2 * TINY.hidden)


# --- interaction hop --------------------------------------------------------


def _hop(rng, D=4, hidden=2):
    return InteractionHop(ParamStore(int(rng.integers(1000))), "hop", D, hidden)


def test_hop_with_single_question_token(rng):
    hop = _hop(rng)
    C, G = T.constant(rng.standard_normal((5, 4))), T.constant(rng.standard_normal((1, 4)))
    st = hop(C, G, trace=True)
    np.testing.assert_allclose(st.D.data, 1.0)
    np.testing.assert_allclose(st.M2.data, np.repeat(G.data, 5, axis=0), atol=1e-15)


def test_hop_against_brute_force(rng):
    for _ in range(20):
        n, l = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        hop = _hop(rng)
        Cd, Gd = rng.standard_normal((n, 4)), rng.standard_normal((l, 4))
        st = hop(T.constant(Cd), T.constant(Gd), trace=True)
        v = hop.v1.data
        A = np.array([[v @ np.concatenate([Cd[i], Gd[j], Cd[i] * Gd[j]]) for j in range(l)] for i in range(n)])
        np.testing.assert_allclose(st.A.data, A, atol=1e-13)
        d = oracles.softmax(A.max(axis=1))
        np.testing.assert_allclose(st.d.data, d, atol=1e-14)
        assert st.d.data.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(st.D.data.sum(axis=1), 1.0, atol=1e-12)
        m1 = sum(d[i] * Cd[i] for i in range(n))
        np.testing.assert_allclose(st.m1.data, m1, atol=1e-14)
        assert np.all(st.M1.data == st.M1.data[0])
        M2 = np.array([oracles.softmax(A[i]) @ Gd for i in range(n)])
        np.testing.assert_allclose(st.M2.data, M2, atol=1e-14)
        M = np.concatenate([st.M1.data * Cd, M2 * Cd, M2 - Cd, Cd], axis=1) @ hop.fuse.data
        np.testing.assert_allclose(st.M.data, M, atol=1e-13)
        assert st.out.shape == (n, 4)


def test_memory_hops(tiny_examples):
    cfg = TINY.replace(hidden=100)
    system = build_system(cfg, tiny_examples[:1])
    ex = tiny_examples[0]
    enc = system.reader.encode(*system.features(ex.passage_tokens, ex.question_tokens))
    two = system.reader.memory(enc)
    assert two.shape == (len(ex.passage), 200)
    one = system.reader.memory(enc, hops=1)
    np.testing.assert_allclose(one.data, system.reader.hops[0](enc.C, enc.G).data)
    system.reader.hops[1].fuse.data += 1.0
    np.testing.assert_array_equal(system.reader.memory(enc, hops=1).data, one.data)
    with pytest.raises(T.ContractViolation):
        system.reader.memory(enc, hops=0)


# --- span heads -------------------------------------------------------------


def test_span_heads_normalised_and_dense(tiny_system, tiny_examples):
    ex = tiny_examples[2]
    pf, qf = _feats(tiny_system, ex.passage_tokens, ex.question_tokens)
    r = tiny_system.reader
    enc = r.encode(pf, qf)
    O = r.memory(enc)
    sp = r.predict_spans(enc.C, O)
    assert sp.start_probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert sp.end_probs.sum() == pytest.approx(1.0, abs=1e-12)
    C, Od, Oe = enc.C.data, O.data, sp.O_end.data
    ps = oracles.softmax(np.concatenate([C, Od, C - Od], axis=1) @ r.v_start.data)
    pe = oracles.softmax(np.concatenate([C, Oe, C - Oe], axis=1) @ r.v_end.data)
    np.testing.assert_allclose(sp.start_probs, ps, atol=1e-14)
    np.testing.assert_allclose(sp.end_probs, pe, atol=1e-14)


def test_single_token_passage(tiny_system):
    pf, qf = _feats(tiny_system, ["paris"], ["where", "?"])
    sp = tiny_system.reader(pf, qf)
    assert sp.start_probs.tolist() == [1.0] and sp.end_probs.tolist() == [1.0]


# --- best span --------------------------------------------------------------


def test_best_span_peaks():
    ps, pe = np.full(8, 0.01), np.full(8, 0.01)
    ps[3], pe[5] = 0.9, 0.9
    assert best_span(ps, pe)[:2] == (3, 5)


def test_best_span_brute_force(rng):
    for _ in range(500):
        n = int(rng.integers(1, 31))
        ps, pe = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        L = int(rng.integers(1, 16))
        i, j, logp = best_span(ps, pe, L)
        assert (i, j) == oracles.brute_best_span(ps, pe, L)
        assert logp == pytest.approx(np.log(ps[i] * pe[j]))


def test_best_span_respects_order_constraint():
    ps = np.array([0.05, 0.05, 0.1, 0.1, 0.7])
    pe = np.array([0.1, 0.6, 0.1, 0.1, 0.1])
    i, j, _ = best_span(ps, pe)
    assert (int(np.argmax(ps)), int(np.argmax(pe))) == (4, 1)
    assert (i, j) == oracles.brute_best_span(ps, pe, 15) == (4, 4)


# --- loss -------------------------------------------------------------------


def _dist(ps, pe):
    return SpanDistribution(T.parameter(ps), T.parameter(pe), None, None)


def test_reader_loss_point_mass():
    ps, pe = np.zeros(4), np.zeros(4)
    ps[1], pe[2] = 1.0, 1.0
    assert reader_loss(_dist(ps, pe), (1, 2)).item() == 0.0


def test_reader_loss_uniform():
    n = 7
    loss = reader_loss(_dist(np.full(n, 1 / n), np.full(n, 1 / n)), (0, 3)).item()
    assert loss == pytest.approx(2 * np.log(n))


def test_reader_loss_rejects_bad_gold():
    with pytest.raises(IndexError):
        reader_loss(_dist(np.full(3, 1 / 3), np.full(3, 1 / 3)), (2, 3))


def test_reader_loss_decreases(tiny_examples):
    cfg = TINY.replace(word_dim=32, char_dim=8, char_filters=16, hidden=32, tag_dim=8)
    system = build_system(cfg, tiny_examples)
    ex = tiny_examples[0]
    a = ex.answers[0]
    opt = T.AdaDelta(system.store.trainable("reader/"))
    losses = []
    for _ in range(50):
        opt.zero_grad()
        loss = reader_loss(system.read(ex, ex.question_tokens), (a.start, a.end))
        losses.append(loss.item())
        T.backward(loss)
        opt.step()
    assert losses[-1] < 0.1 * losses[0]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_reader_gradients_on_four_token_passage(tiny_system):
    passage, question = ["alice", "bought", "a", "car"], ["who", "bought"]
    params = tiny_system.store.trainable("reader/")

    def f():
        return reader_loss(tiny_system.reader(*_feats(tiny_system, passage, question)), (0, 0))
    errs = T.gradcheck(f, params, step=1e-4, max_entries=4)
    assert max(errs.values()) < 1e-4


def test_token_features_shape():
    tf = TokenFeatures.build(["a", "b"], [0, 1], [0, 0], against=["b"])
    assert tf.bits.shape == (2, 3) and tf.bits[1].tolist() == [1.0, 1.0, 1.0]
