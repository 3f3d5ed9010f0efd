"""Span reader: feature-rich encoding, stacked two-orientation attention hops, start/end heads."""
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import BiLSTM, CharCNN, WordEmbedder
from .textproc.tagging import match_bits


@dataclass
class ReaderEncoding:
    C: T.Tensor
    G: T.Tensor


@dataclass
class HopState:
    A: T.Tensor
    e: T.Tensor
    d: T.Tensor
    m1: T.Tensor
    M1: T.Tensor
    D: T.Tensor
    M2: T.Tensor
    M: T.Tensor
    out: T.Tensor


@dataclass
class SpanDistribution:
    p_start: T.Tensor
    p_end: T.Tensor
    O: T.Tensor
    O_end: T.Tensor

    @property
    def start_probs(self):
        return self.p_start.data

    @property
    def end_probs(self):
        return self.p_end.data


@dataclass
class TokenFeatures:
    """Per-token tag ids and exact-match bits for one side of a (passage, question) pair."""
    tokens: list
    pos: list
    ner: list
    bits: np.ndarray  # len x 3

    @classmethod
    def build(cls, tokens, pos, ner, against=None):
        if against is None:
            bits = np.zeros((len(tokens), 3))
        else:
            bits = np.array(match_bits(tokens, against), dtype=np.float64).reshape(len(tokens), 3)
        return cls(list(tokens), list(pos), list(ner), bits)


class InteractionHop:
    def __init__(self, store, prefix, dim, hidden, dropout=0.0):
        self.v1 = store.vector(f"{prefix}/align_v", 3 * dim)
        self.fuse = store.weight(f"{prefix}/fuse", 4 * dim, dim)
        self.lstm = BiLSTM(store, f"{prefix}/lstm", dim, hidden, dropout)
        self.dim = dim

    def __call__(self, C, G, training=False, rng=None, trace=False):
        n, l = C.shape[0], G.shape[0]
        D = self.dim
        va, vb, vc = self.v1[:D], self.v1[D:2 * D], self.v1[2 * D:]
        # A_ij = va.C_i + vb.G_j + vc.(C_i*G_j)
        A = T.tile(C @ va, l, axis=1) + T.tile(G @ vb, n, axis=0) + (C * T.tile(vc, n)) @ G.T
        e = T.max(A, axis=1)
        d = T.softmax(e)
        m1 = d @ C
        M1 = T.tile(m1, n)
        Dm = T.softmax(A, axis=1)
        M2 = Dm @ G
        M = T.concat([M1 * C, M2 * C, M2 - C, C], axis=1) @ self.fuse
        out = self.lstm(M, training, rng)
        if trace:
            return HopState(A, e, d, m1, M1, Dm, M2, M, out)
        return out


class Reader:
    def __init__(self, store, cfg, word_vocab, char_vocab, pos_table, ner_table,
                 table_name="shared/word_emb", prefix="reader"):
        H = cfg.hidden
        D = 2 * H
        self.cfg = cfg
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.words = WordEmbedder(store, prefix, table_name)
        self.chars = CharCNN(store, f"{prefix}/char_cnn", len(char_vocab), cfg.char_dim, cfg.char_filters,
                             cfg.filter_width)
        self.pos_emb = store.add(f"{prefix}/pos_emb", pos_table)
        self.ner_emb = store.add(f"{prefix}/ner_emb", ner_table)
        self.input_dim = self.words.dim + cfg.char_filters + pos_table.shape[1] + ner_table.shape[1] + 3
        self.enc_passage = BiLSTM(store, f"{prefix}/enc_passage", self.input_dim, H, cfg.dropout)
        self.enc_question = BiLSTM(store, f"{prefix}/enc_question", self.input_dim, H, cfg.dropout)
        self.hops = [InteractionHop(store, f"{prefix}/hop{k + 1}", D, H, cfg.dropout) for k in range(cfg.hops)]
        self.end_lstm = BiLSTM(store, f"{prefix}/end_lstm", D, H, cfg.dropout)
        self.v_start = store.vector(f"{prefix}/v_start", 3 * D)
        self.v_end = store.vector(f"{prefix}/v_end", 3 * D)

    def embed(self, feats, char_cache=None):
        w = self.words(self.word_vocab.encode(feats.tokens))
        c = self._chars(feats.tokens, char_cache)
        pos = T.embedding(self.pos_emb, feats.pos)
        ner = T.embedding(self.ner_emb, feats.ner)
        return T.concat([w, c, pos, ner, T.constant(feats.bits)], axis=1)

    def _chars(self, tokens, cache):
        if cache is None:
            return self.chars([self.char_vocab.encode(t) for t in tokens])
        key = tuple(tokens)
        if key not in cache:
            cache[key] = self.chars([self.char_vocab.encode(t) for t in tokens])
        return cache[key]

    def encode(self, passage_feats, question_feats, training=False, rng=None, char_cache=None):
        C = self.enc_passage(self.embed(passage_feats, char_cache), training, rng)
        G = self.enc_question(self.embed(question_feats, char_cache), training, rng)
        return ReaderEncoding(C, G)

    def memory(self, enc, hops=None, training=False, rng=None):
        hops = self.cfg.hops if hops is None else hops
        if hops < 1:
            raise T.ContractViolation("memory: hops must be >= 1")
        out = enc.C
        for hop in self.hops[:hops]:
            out = hop(out, enc.G, training, rng)
        return out

    def predict_spans(self, C, O, training=False, rng=None):
        O_end = self.end_lstm(O, training, rng)
        p_start = T.softmax(T.concat([C, O, C - O], axis=1) @ self.v_start)
        p_end = T.softmax(T.concat([C, O_end, C - O_end], axis=1) @ self.v_end)
        return SpanDistribution(p_start, p_end, O, O_end)

    def __call__(self, passage_feats, question_feats, training=False, rng=None, char_cache=None):
        enc = self.encode(passage_feats, question_feats, training, rng, char_cache)
        O = self.memory(enc, training=training, rng=rng)
        return self.predict_spans(enc.C, O, training, rng)


def best_span(p_start, p_end, max_span_len=15):
    """argmax of p_start[i] * p_end[j] over i <= j < i + max_span_len; ties to smaller i, then j."""
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")
    ps, pe = np.asarray(p_start), np.asarray(p_end)
    n = len(ps)
    best = (-1.0, 0, 0)
    for i in range(n):
        window = pe[i:min(n, i + max_span_len)]
        j = int(np.argmax(window))
        val = ps[i] * window[j]
        if val > best[0]:
            best = (val, i, i + j)
    _, i, j = best
    with np.errstate(divide="ignore"):
        logp = float(np.log(ps[i]) + np.log(pe[j]))
    return i, j, logp


def reader_loss(spans, gold):
    """-log p_start[s] - log p_end[e] for the gold (start, end)."""
    s, e = gold
    n = spans.p_start.shape[0]
    if not (0 <= s <= e < n):
        raise IndexError(f"gold span {gold} outside passage of length {n}")
    return -(T.log(spans.p_start[[s]]) + T.log(spans.p_end[[e]]))
