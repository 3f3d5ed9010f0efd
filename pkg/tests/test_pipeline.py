import itertools

import numpy as np
import pytest

from keyreader import tensor as T
from keyreader.pipeline import answer_mixture, end_to_end_loss, span_candidates
from keyreader.reader import SpanDistribution, best_span, reader_loss

import oracles


def _summary_oracle(ev, tokens):
    X = ev.words(ev.word_vocab.encode(tokens)).data
    f = oracles.lstm_run(X, ev.lstm.fwd.W.data, ev.lstm.fwd.b.data, False)
    b = oracles.lstm_run(X, ev.lstm.bwd.W.data, ev.lstm.bwd.b.data, True)
    return np.concatenate([f[-1], b[0]])


# --- question weights -------------------------------------------------------


def test_single_candidate_weight_one(tiny_system, tiny_examples):
    ex = tiny_examples[0]
    w = tiny_system.evaluator(ex.query_tokens, [ex.question_tokens])
    assert w.values.tolist() == [1.0]


def test_identical_candidates_share_weight(tiny_system, tiny_examples):
    ex = tiny_examples[1]
    w = tiny_system.evaluator(ex.query_tokens, [ex.question_tokens, list(ex.question_tokens)])
    np.testing.assert_allclose(w.values, [0.5, 0.5], atol=1e-15)


def test_weights_match_hand_recomputed_scores(tiny_system, tiny_examples):
    ev = tiny_system.evaluator
    ex = tiny_examples[2]
    cands = [ex.question_tokens, ex.query_tokens, ["what", "did", "alice", "buy", "?"]]
    w = ev(ex.query_tokens, cands)
    hf = _summary_oracle(ev, ex.query_tokens)
    I = []
    for c in cands:
        hg = _summary_oracle(ev, c)
        I.append(np.concatenate([hf, hg, hf * hg, hf - hg]) @ ev.v.data)
    np.testing.assert_allclose(w.scores.data, I, atol=1e-13)
    np.testing.assert_allclose(w.values, oracles.softmax(np.array(I)), atol=1e-14)


def test_no_candidates_rejected(tiny_system):
    with pytest.raises(ValueError):
        tiny_system.evaluator(["a"], [])


# --- span candidates --------------------------------------------------------


def test_top_one_span_has_probability_one(rng):
    ps, pe = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    (span, p), = span_candidates(ps, pe, top_k=1)
    assert p == 1.0 and span == best_span(ps, pe)[:2]


def test_span_candidates_against_brute_force(rng):
    for _ in range(200):
        ps, pe = rng.dirichlet(np.ones(12)), rng.dirichlet(np.ones(12))
        k = int(rng.integers(1, 8))
        got = span_candidates(ps, pe, top_k=k, max_span_len=15)
        ref = oracles.brute_top_spans(ps, pe, k, 15)
        assert sum(p for _, p in got) == pytest.approx(1.0, abs=1e-12)
        assert [s for s, _ in got] == [s for s, _ in ref]
        np.testing.assert_allclose([p for _, p in got], [p for _, p in ref], atol=1e-15)


# --- mixture ----------------------------------------------------------------


def test_mixture_of_equal_values():
    ranked = answer_mixture([{(0, 1): 0.5, (2, 2): 0.5}, {(0, 1): 0.5, (3, 3): 0.5}], [0.6, 0.4])
    assert ranked[0].span == (0, 1) and ranked[0].prob == pytest.approx(0.5)


def test_mixture_tie_goes_to_earlier_start():
    A, B = (4, 5), (1, 2)
    ranked = answer_mixture([{A: 0.8, B: 0.2}, {A: 0.2, B: 0.8}], [0.5, 0.5])
    assert [r.prob for r in ranked] == pytest.approx([0.5, 0.5])
    assert ranked[0].span == B


def test_degenerate_weight_reproduces_question_ranking(rng):
    per_q = [dict(span_candidates(rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8)))) for _ in range(3)]
    ranked = answer_mixture(per_q, [0.0, 1.0, 0.0])
    mine = sorted(per_q[1], key=lambda s: -per_q[1][s])
    assert [r.span for r in ranked[: len(mine)]] == mine


def test_mixture_is_permutation_invariant(rng):
    for _ in range(20):
        per_q = [dict(span_candidates(rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10)))) for _ in range(4)]
        w = rng.dirichlet(np.ones(4))
        base = [(r.span, round(r.prob, 12)) for r in answer_mixture(per_q, w)]
        for perm in itertools.islice(itertools.permutations(range(4)), 1, 24, 5):
            got = answer_mixture([per_q[i] for i in perm], w[list(perm)])
            assert [(r.span, round(r.prob, 12)) for r in got] == base


def test_mixture_mass_at_most_one(rng):
    per_q = [dict(span_candidates(rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10)))) for _ in range(3)]
    total = sum(r.prob for r in answer_mixture(per_q, rng.dirichlet(np.ones(3))))
    assert total <= 1.0 + 1e-12


def test_empty_mixture_rejected():
    with pytest.raises(ValueError, match="no candidates"):
        answer_mixture([], [])
    with pytest.raises(ValueError, match="no candidates"):
        answer_mixture([{}], [1.0])


# --- end-to-end loss --------------------------------------------------------


def _point(n, i):
    p = np.zeros(n)
    p[i] = 1.0
    return T.constant(p)


def test_e2e_loss_zero_when_every_reader_is_certain():
    dists = [SpanDistribution(_point(5, 1), _point(5, 3), None, None) for _ in range(3)]
    loss = end_to_end_loss(T.constant([0.2, 0.3, 0.5]), dists, (1, 3))
    assert loss.item() == pytest.approx(0.0, abs=1e-15)


def test_e2e_loss_single_candidate_is_reader_nll(tiny_system, tiny_examples):
    ex = tiny_examples[0]
    a = ex.answers[0]
    d = tiny_system.read(ex, ex.question_tokens)
    w = tiny_system.evaluator(ex.query_tokens, [ex.question_tokens])
    got = end_to_end_loss(w.weights, [d], (a.start, a.end)).item()
    assert got == pytest.approx(reader_loss(d, (a.start, a.end)).item(), rel=1e-12)


def test_e2e_loss_rejects_out_of_range_gold():
    d = SpanDistribution(_point(3, 0), _point(3, 0), None, None)
    with pytest.raises(IndexError):
        end_to_end_loss(T.constant([1.0]), [d], (1, 3))


def test_e2e_gradients():
    from keyreader.gradcheck import run_suite
    (res,) = run_suite(only=["model/end_to_end_loss"])
    assert res.max_error < 1e-4


def test_single_candidate_matches_reader_only(tiny_system, tiny_examples):
    for ex in tiny_examples:
        full = tiny_system.answer(ex, [ex.question_tokens])[0].text
        assert full == tiny_system.reader_only_answer(ex, ex.question_tokens)
