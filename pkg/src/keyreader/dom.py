"""Demand optimisation: rewrite a keyword query into full questions, attending over the passage.

Encoder: BiLSTM states of query and passage, passage attention per query token,
fusion and a second BiLSTM. Decoder: attentive LSTM whose next-token
distribution is one softmax over generation-vocabulary scores and per-position
copy scores of the source query.
"""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from . import tensor as T
from .layers import BiLSTM, LSTMParams, Match, TokenEmbedder, WordEmbedder, lstm_cell
from .textproc.vocab import EOS_ID, UNK_ID

logger = logging.getLogger(__name__)


@dataclass
class DomEncoding:
    F: T.Tensor
    P: T.Tensor
    s: T.Tensor
    a: T.Tensor
    g: T.Tensor
    h: T.Tensor
    source: "SourceMap"


@dataclass
class DecoderStep:
    s: T.Tensor
    cell: T.Tensor
    context: T.Tensor
    alpha: T.Tensor
    dist: T.Tensor


@dataclass
class CandidateQuestion:
    tokens: List[str]
    log_score: float
    norm_score: float
    finished: bool = True


class SourceMap:
    """Extended vocabulary for one query: generation vocabulary followed by the query's OOV tokens."""

    def __init__(self, query_tokens, gen_vocab, word_vocab):
        self.gen_vocab = gen_vocab
        self.source = [t.lower() for t in query_tokens]
        self.oov = []
        for t in self.source:
            if t not in gen_vocab.stoi and t not in self.oov:
                self.oov.append(t)
        V = len(gen_vocab)
        self.size = V + len(self.oov)
        self.copy_map = np.zeros((len(self.source), self.size))
        for i, t in enumerate(self.source):
            self.copy_map[i, self.ext_id(t)] = 1.0
        # specials share ids across vocabularies, so plain lookup covers them
        self.word_ids = np.array([word_vocab.id(t) for t in gen_vocab.itos + self.oov], dtype=np.int64)

    def ext_id(self, token):
        t = token.lower()
        if t in self.gen_vocab.stoi:
            return self.gen_vocab.stoi[t]
        if t in self.oov:
            return len(self.gen_vocab) + self.oov.index(t)
        return UNK_ID

    def token(self, ext_id):
        V = len(self.gen_vocab)
        return self.gen_vocab.itos[ext_id] if ext_id < V else self.oov[ext_id - V]


def copy_generate(gen_scores, copy_scores, copy_map):
    """Distribution over the extended vocabulary from one softmax over ``[gen; copy]``.

    ``copy_map`` (source positions x extended vocabulary) routes each position's
    mass to its token, so repeated source tokens pool their probability.
    """
    V = gen_scores.shape[0]
    joint = T.softmax(T.concat([gen_scores, copy_scores]))
    gen_part = joint[:V]
    n_oov = copy_map.shape[1] - V
    if n_oov:
        gen_part = T.concat([gen_part, T.constant(np.zeros(n_oov))])
    return gen_part + joint[V:] @ T.constant(copy_map)


class DemandOptimizer:
    def __init__(self, store, cfg, word_vocab, char_vocab, gen_vocab, table_name="shared/word_emb", prefix="dom"):
        self.cfg = cfg
        self.word_vocab = word_vocab
        self.gen_vocab = gen_vocab
        H = cfg.hidden
        D = 2 * H
        self.embed = TokenEmbedder(store, prefix, word_vocab, char_vocab, table_name,
                                   cfg.char_dim, cfg.char_filters, cfg.filter_width)
        self.prev_embed = WordEmbedder(store, f"{prefix}/dec", table_name)
        d_in = self.embed.dim
        self.enc_query = BiLSTM(store, f"{prefix}/enc_query", d_in, H, cfg.dropout)
        self.enc_passage = BiLSTM(store, f"{prefix}/enc_passage", d_in, H, cfg.dropout)
        self.passage_match = Match(store, f"{prefix}/passage_match", D)
        self.fuse = store.weight(f"{prefix}/fuse", 2 * D, D)
        self.enc_fused = BiLSTM(store, f"{prefix}/enc_fused", D, H, cfg.dropout)
        self.init_W = store.weight(f"{prefix}/dec_init/W", D, H)
        self.init_b = store.bias(f"{prefix}/dec_init/b", H)
        self.dec_match = Match(store, f"{prefix}/dec_match", D, x_dim=H)
        e = self.prev_embed.dim
        self.cell = LSTMParams(store, f"{prefix}/dec_cell", e + D, H)
        self.gen_W = store.weight(f"{prefix}/gen/W", H + e + D, len(gen_vocab))
        self.gen_b = store.bias(f"{prefix}/gen/b", len(gen_vocab))
        self.copy_W = store.weight(f"{prefix}/copy/W", D + H, H)
        self.copy_v = store.vector(f"{prefix}/copy/v", H)
        self.hidden = H

    def source_map(self, query_tokens):
        return SourceMap(query_tokens, self.gen_vocab, self.word_vocab)

    def encode(self, query_tokens, passage_tokens, training=False, rng=None):
        if not query_tokens or not passage_tokens:
            raise T.ContractViolation("dom encode: empty query or passage")
        F = self.enc_query(self.embed(query_tokens), training, rng)
        P = self.enc_passage(self.embed(passage_tokens), training, rng)
        s = T.softmax(self.passage_match.matrix(F, P), axis=1)
        a = s @ P
        g = T.concat([F, F * a], axis=1) @ self.fuse
        h = self.enc_fused(g, training, rng)
        return DomEncoding(F, P, s, a, g, h, self.source_map(query_tokens))

    def initial_state(self, enc):
        s0 = T.tanh(T.mean(enc.h, axis=0) @ self.init_W + self.init_b)
        return s0, T.constant(np.zeros(self.hidden))

    def decode_step(self, prev_ext_id, state, enc):
        s_prev, c_prev = state
        h = enc.h
        m = h.shape[0]
        alpha = T.softmax(self.dec_match.against(s_prev, h))
        context = alpha @ h
        emb = self.prev_embed(enc.source.word_ids[[prev_ext_id]])[0]
        s_t, c_t = lstm_cell(T.concat([emb, context]), s_prev, c_prev, self.cell.W, self.cell.b)
        gen = T.concat([s_t, emb, context]) @ self.gen_W + self.gen_b
        copy = T.tanh(T.concat([h, T.tile(s_t, m)], axis=1) @ self.copy_W) @ self.copy_v
        return DecoderStep(s_t, c_t, context, alpha, copy_generate(gen, copy, enc.source.copy_map))

    def gold_ids(self, question_tokens, source):
        return [source.ext_id(t) for t in question_tokens] + [EOS_ID]

    def loss(self, query_tokens, passage_tokens, question_tokens, training=False, rng=None):
        """Teacher-forced negative log-likelihood of the question (EOS appended).

        Returns ``(loss, n_correct, n_tokens)`` where correctness is argmax agreement per step.
        """
        if not question_tokens:
            raise ValueError("dom loss: empty gold question")
        enc = self.encode(query_tokens, passage_tokens, training, rng)
        gold = self.gold_ids(question_tokens, enc.source)
        state = self.initial_state(enc)
        prev = EOS_ID
        terms = []
        correct = 0
        for tok in gold:
            step = self.decode_step(prev, state, enc)
            terms.append(step.dist[[tok]])
            correct += int(np.argmax(step.dist.data) == tok)
            state = (step.s, step.cell)
            prev = tok
        loss = -T.sum(T.log(T.concat(terms)))
        return loss, correct, len(gold)

    def generate(self, query_tokens, passage_tokens, beam_k=12, max_len=20, out_count=6):
        with T.no_grad():
            enc = self.encode(query_tokens, passage_tokens)

            def step(prev, state):
                st = self.decode_step(prev, state, enc)
                with np.errstate(divide="ignore"):
                    return np.log(st.dist.data), (st.s, st.cell)

            hyps = beam_search(step, self.initial_state(enc), EOS_ID, EOS_ID, beam_k, max_len, out_count,
                               min_len=1)
        return [CandidateQuestion([enc.source.token(i) for i in toks], score, norm, fin)
                for toks, score, norm, fin in hyps]


def beam_search(step, init_state, start, eos, beam_k=12, max_len=20, out_count=6, min_len=0):
    """Beam search over summed log-probabilities.

    ``step(prev_token, state) -> (log_probs, new_state)``. Hypotheses finish on
    ``eos`` or at ``max_len``; finished ones are ranked by score / length and the
    top ``out_count`` distinct sequences returned as
    ``(tokens_without_eos, log_score, norm_score, ended_with_eos)``. ``eos`` is
    barred until ``min_len`` tokens have been emitted.
    """
    if beam_k < out_count:
        raise T.ContractViolation(f"beam_k={beam_k} < out_count={out_count}")
    if max_len < 1:
        raise T.ContractViolation("max_len must be >= 1")
    alive = [(0.0, (), start, init_state)]
    finished = []
    for t in range(max_len):
        expansions = []
        for score, toks, prev, state in alive:
            logp, new_state = step(prev, state)
            if t < min_len:
                logp = logp.copy()
                logp[eos] = -np.inf
            top = np.argsort(-logp, kind="stable")[:beam_k]
            for tok in top:
                lp = logp[tok]
                if np.isfinite(lp):
                    expansions.append((score + float(lp), toks + (int(tok),), new_state))
        expansions.sort(key=lambda e: (-e[0], e[1]))
        alive = []
        for score, toks, state in expansions[:beam_k]:
            if toks[-1] == eos:
                finished.append((score, toks, True))
            else:
                alive.append((score, toks, toks[-1], state))
        if not alive:
            break
    if not any(f[2] for f in finished):
        logger.warning("beam search: no hypothesis produced EOS within %d steps", max_len)
    finished.extend((score, toks, False) for score, toks, _, _ in alive)
    ranked = sorted(finished, key=lambda f: (-f[0] / len(f[1]), -f[0], f[1]))
    out, seen = [], set()
    for score, toks, ended in ranked:
        body = toks[:-1] if ended else toks
        if body in seen:
            continue
        seen.add(body)
        out.append((list(body), score, score / len(toks), ended))
        if len(out) == out_count:
            break
    return out
