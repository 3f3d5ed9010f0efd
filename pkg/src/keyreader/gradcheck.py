"""Finite-difference checks for every op, layer and training loss on tiny instances."""
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import RunConfig
from .layers import BiLSTM, CharCNN, Match, ParamStore, WordEmbedder, attend, lstm_sequence

TOLERANCE = 1e-4

TOY = RunConfig(word_dim=5, char_dim=3, char_filters=4, filter_width=3, hidden=3, tag_dim=3, dropout=0.0,
                hops=2, beam_k=2, candidates=2, max_len=6, tag_epochs=1, min_tag_sentence=1)


@dataclass
class CheckResult:
    name: str
    max_error: float
    n_params: int
    seconds: float

    @property
    def ok(self):
        return self.max_error < TOLERANCE


def _probe(out, salt=0):
    """Scalar ``sum(out * R)``; ``R`` is seeded by shape so repeated calls see the same weights."""
    R = np.random.default_rng([*out.shape, salt]).standard_normal(out.shape)
    return T.sum(out * T.constant(R))


def _leaf(rng, *shape, positive=False):
    x = rng.standard_normal(shape)
    return T.parameter(np.abs(x) + 0.5 if positive else x)


def _op_checks(rng):
    a, b = _leaf(rng, 3, 4), _leaf(rng, 3, 4)
    w, v = _leaf(rng, 4, 2), _leaf(rng, 4)
    p = _leaf(rng, 3, 4, positive=True)
    table = _leaf(rng, 5, 3)
    ids = [0, 3, 3, 1]
    yield "ops/arith", lambda: _probe((a + b) * a - b * 0.5 - a), {"a": a, "b": b}
    yield "ops/matmul", lambda: _probe(a @ w) + _probe(a @ v) + _probe(v @ w), {"a": a, "w": w, "v": v}
    yield "ops/nonlinear", lambda: _probe(T.tanh(a) + T.sigmoid(b) + T.exp(a * 0.3)), {"a": a, "b": b}
    yield "ops/log", lambda: _probe(T.log(p)), {"p": p}
    yield "ops/softmax", lambda: _probe(T.softmax(a, axis=1)) + _probe(T.softmax(a, axis=0)), {"a": a}
    yield "ops/max", lambda: _probe(T.max(a, axis=1)) + _probe(T.max(b, axis=0)), {"a": a, "b": b}
    yield "ops/structure", lambda: (_probe(T.concat([a, b], axis=0)) + _probe(T.tile(v, 3))
                                     + _probe(T.tile(a @ v, 2, axis=1)) + _probe(a[1:, [0, 2]])
                                     + _probe(a.T) + _probe(T.reshape(b, (4, 3)))
                                     + T.sum(a, axis=1)[[0]] + T.mean(b)), {"a": a, "b": b, "v": v}
    yield "ops/embedding", lambda: _probe(T.embedding(table, ids)), {"table": table}


def _layer_checks(rng):
    store = ParamStore(1)
    X = T.constant(rng.standard_normal((4, 3)))
    W = store.weight("lstm/W", 3 + 2, 8)
    b = store.add("lstm/b", rng.standard_normal(8) * 0.1)
    yield "layers/lstm_sequence", lambda: (_probe(lstm_sequence(X, W, b))
                                           + _probe(lstm_sequence(X, W, b, reverse=True))), {"W": W, "b": b}
    bi = BiLSTM(store, "bi", 3, 2)
    yield "layers/bilstm", lambda: _probe(bi(X)) + _probe(bi.summary(X)), store.trainable("bi/")
    cnn = CharCNN(store, "cnn", 6, char_dim=3, filters=4, width=3)
    words = [[2, 3, 4], [5], [2, 2, 3, 4, 5, 3]]
    yield "layers/char_cnn", lambda: _probe(cnn(words)), store.trainable("cnn/")
    m = Match(store, "match", 3)
    Y = T.constant(rng.standard_normal((5, 3)))
    yield "layers/match", lambda: (_probe(m.matrix(X, Y)) + _probe(m.against(X[[0]][0], Y))
                                   + m(X[[1]][0], Y[[2]][0])), store.trainable("match/")
    mp = Match(store, "proj", 3, x_dim=2)
    Z = T.constant(rng.standard_normal((2,)))
    yield "layers/match_projected", lambda: _probe(attend(mp.against(Z, Y), Y)), store.trainable("proj/")
    store.add("emb", rng.standard_normal((6, 3)), trainable=False)
    we = WordEmbedder(store, "we", "emb")
    yield "layers/word_embedder", lambda: _probe(we([0, 1, 2, 4, 2])), store.trainable("we/")


def _toy_system():
    from . import synthetic
    from .pipeline import build_system
    examples = synthetic.purchase_corpus(3, seed=5)
    return build_system(TOY, examples), examples


def _model_checks(rng):
    from .pipeline import end_to_end_loss
    from .reader import reader_loss
    system, examples = _toy_system()
    ex = examples[0]
    a = ex.answers[0]
    gold = (a.start, a.end)
    cands = [ex.question_tokens, list(ex.query_tokens)]
    dom_p = system.store.trainable("dom/")
    yield "model/dom_loss", lambda: system.dom.loss(ex.query_tokens, ex.passage_tokens, ex.question_tokens)[0], dom_p
    reader_p = system.store.trainable("reader/")
    yield "model/interaction_hop", lambda: _probe(system.reader.memory(system.reader.encode(
        *system.features(ex.passage_tokens, ex.question_tokens)))), reader_p
    yield "model/reader_loss", lambda: reader_loss(system.read(ex, ex.question_tokens), gold), reader_p
    eval_p = system.store.trainable("eval/")
    yield "model/question_weights", lambda: _probe(system.evaluator(ex.query_tokens, cands).weights), eval_p
    both = {**reader_p, **eval_p}

    def e2e():
        dists, weights = system.forward(ex, cands)
        return end_to_end_loss(weights.weights, dists, gold)
    yield "model/end_to_end_loss", e2e, both


def run_suite(seed=0, max_entries=6, only=None):
    """Run every check; returns a list of :class:`CheckResult`."""
    rng = np.random.default_rng(seed)
    results = []
    for group in (_op_checks, _layer_checks, _model_checks):
        for name, loss_fn, params in group(rng):
            if only and not any(name.startswith(o) for o in only):
                continue
            t0 = time.perf_counter()
            errors = T.gradcheck(loss_fn, params, step=1e-4, max_entries=max_entries,
                                 rng=np.random.default_rng([seed, len(results)]))
            worst = max(errors.values()) if errors else 0.0
            results.append(CheckResult(name, float(worst), len(params), time.perf_counter() - t0))
    return results

