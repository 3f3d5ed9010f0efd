"""Full system: rewrite the query, read with every candidate question, mix the answers.

The final distribution over spans is ``sum_i p(span | P, Q_i) * w_i`` where the
``Q_i`` come from the query rewriter's beam and the ``w_i`` from a small scorer
that compares each candidate against the keyword query.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import tensor as T
from .dom import DemandOptimizer
from .layers import BiLSTM, CharVocab, ParamStore, WordEmbedder
from .reader import Reader, TokenFeatures, best_span
from .textproc import skipgram
from .textproc.tagging import GazetteerNERTagger, RulePOSTagger
from .textproc.vocab import SPECIALS, Vocabulary, load_embeddings, random_embeddings

logger = logging.getLogger(__name__)

WORD_TABLE = "shared/word_emb"


@dataclass
class WeightedAnswer:
    span: Tuple[int, int]
    text: str = ""
    question_probs: List[float] = field(default_factory=list)
    prob: float = 0.0


@dataclass
class QuestionWeights:
    query_summary: T.Tensor
    candidate_summaries: List[T.Tensor]
    scores: T.Tensor
    weights: T.Tensor

    @property
    def values(self):
        return self.weights.data


class EvaluationMechanism:
    """Scores candidates by ``v . [h_f; h_g; h_f*h_g; h_f-h_g]`` and softmaxes over the set."""

    def __init__(self, store, cfg, word_vocab, table_name=WORD_TABLE, prefix="eval"):
        self.word_vocab = word_vocab
        self.words = WordEmbedder(store, prefix, table_name)
        self.lstm = BiLSTM(store, f"{prefix}/lstm", self.words.dim, cfg.hidden, cfg.dropout)
        self.v = store.vector(f"{prefix}/v", 8 * cfg.hidden)

    def summary(self, tokens, training=False, rng=None):
        return self.lstm.summary(self.words(self.word_vocab.encode(tokens)), training, rng)

    def __call__(self, query_tokens, candidates, training=False, rng=None):
        if not candidates:
            raise ValueError("score_questions: no candidates")
        hf = self.summary(query_tokens, training, rng)
        summaries, scores = [], []
        for cand in candidates:
            hg = self.summary(cand, training, rng)
            summaries.append(hg)
            scores.append(T.concat([hf, hg, hf * hg, hf - hg]) @ self.v)
        I = T.concat(scores)
        return QuestionWeights(hf, summaries, I, T.softmax(I))


def span_candidates(p_start, p_end, top_k=5, max_span_len=15):
    """Top-k spans by p_start[i]*p_end[j] (ties: smaller i, then j) with renormalised probabilities."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    ps, pe = np.asarray(p_start), np.asarray(p_end)
    n = len(ps)
    spans = [(ps[i] * pe[j], i, j) for i in range(n) for j in range(i, min(n, i + max_span_len))]
    spans.sort(key=lambda s: (-s[0], s[1], s[2]))
    kept = spans[:top_k]
    total = sum(s[0] for s in kept)
    if total <= 0:
        return [((i, j), 1.0 / len(kept)) for _, i, j in kept]
    return [((i, j), v / total) for v, i, j in kept]


def answer_mixture(per_question, weights):
    """Mix per-question ``{span: prob}`` maps with question weights; ranked best first.

    Missing spans contribute zero. Ties go to the earlier start, then earlier end.
    """
    if not per_question or not any(per_question):
        raise ValueError("no candidates")
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(per_question):
        raise ValueError(f"{len(per_question)} answer sets but {len(weights)} weights")
    spans = sorted({s for answers in per_question for s in answers})
    out = []
    for span in spans:
        probs = [float(answers.get(span, 0.0)) for answers in per_question]
        out.append(WeightedAnswer(span, "", probs, float(np.dot(weights, probs))))
    out.sort(key=lambda a: (-a.prob, a.span[0], a.span[1]))
    return out


def end_to_end_loss(weights, span_dists, gold):
    """``-log sum_i w_i * p_start_i[s] * p_end_i[e]`` for gold span ``(s, e)``."""
    s, e = gold
    n = span_dists[0].p_start.shape[0]
    if not (0 <= s <= e < n):
        raise IndexError(f"gold span {gold} outside passage of length {n}")
    per_q = T.concat([sd.p_start[[s]] * sd.p_end[[e]] for sd in span_dists])
    return -T.log(T.sum(weights * per_q))


# --- system -----------------------------------------------------------------


def sentences(tokens):
    out, cur = [], []
    for t in tokens:
        cur.append(t)
        if t in (".", "!", "?"):
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


class Lexicon:
    def __init__(self, word_vocab, char_vocab, gen_vocab):
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.gen_vocab = gen_vocab
        self.pos_tagger = RulePOSTagger()
        self.ner_tagger = GazetteerNERTagger()

    @classmethod
    def build(cls, examples, gen_vocab_size=20000, extra=()):
        """Input vocabularies cover ``examples`` and ``extra``; the output vocabulary only ``examples``."""
        examples = list(examples)
        seqs = []
        for ex in examples + list(extra):
            seqs += [ex.passage_tokens, ex.question_tokens, ex.query_tokens]
        word_vocab = Vocabulary.build(seqs)
        char_vocab = CharVocab.from_tokens(t for s in seqs for t in s)
        gen_vocab = Vocabulary.build([ex.question_tokens for ex in examples], max_size=gen_vocab_size)
        return cls(word_vocab, char_vocab, gen_vocab)

    def to_json(self):
        return {"word_vocab": self.word_vocab.to_json(), "gen_vocab": self.gen_vocab.to_json(),
                "chars": self.char_vocab.chars[2:]}

    @classmethod
    def from_json(cls, obj):
        return cls(Vocabulary.from_json(obj["word_vocab"]), CharVocab(obj["chars"]),
                   Vocabulary.from_json(obj["gen_vocab"]))

    def tags(self, tokens):
        return self.pos_tagger.tag(tokens), self.ner_tagger.tag(tokens)


class Dorm:
    """Query rewriter, reader and question scorer over one shared parameter store."""

    def __init__(self, cfg, lexicon, word_table, pos_table, ner_table):
        self.cfg = cfg
        self.lexicon = lexicon
        self.store = ParamStore(cfg.seed)
        table = np.array(word_table, dtype=np.float64)
        table[: len(SPECIALS)] = 0.0
        self.store.add(WORD_TABLE, table, trainable=False)
        lx = lexicon
        self.dom = DemandOptimizer(self.store, cfg, lx.word_vocab, lx.char_vocab, lx.gen_vocab, WORD_TABLE)
        self.reader = Reader(self.store, cfg, lx.word_vocab, lx.char_vocab, pos_table, ner_table, WORD_TABLE)
        self.evaluator = EvaluationMechanism(self.store, cfg, lx.word_vocab, WORD_TABLE)
        self._tag_cache = {}

    # -- features
    def _tags(self, tokens):
        key = tuple(tokens)
        if key not in self._tag_cache:
            self._tag_cache[key] = self.lexicon.tags(tokens)
        return self._tag_cache[key]

    def features(self, passage_tokens, question_tokens):
        ppos, pner = self._tags(passage_tokens)
        qpos, qner = self._tags(question_tokens)
        return (TokenFeatures.build(passage_tokens, ppos, pner, against=question_tokens),
                TokenFeatures.build(question_tokens, qpos, qner))

    # -- components
    def generate_scored(self, ex):
        """Non-empty beam candidates as ``(tokens, length-normalised log score)``; the query if none."""
        cands = self.dom.generate(ex.query_tokens, ex.passage_tokens, self.cfg.beam_k, self.cfg.max_len,
                                  self.cfg.candidates)
        return [(c.tokens, c.norm_score) for c in cands if c.tokens] or [(list(ex.query_tokens), 0.0)]

    def generate(self, ex):
        return [toks for toks, _ in self.generate_scored(ex)]

    def read(self, ex, question_tokens, training=False, rng=None, char_cache=None):
        pf, qf = self.features(ex.passage_tokens, question_tokens)
        return self.reader(pf, qf, training, rng, char_cache)

    def forward(self, ex, candidates, training=False, rng=None):
        cache = {}
        dists = [self.read(ex, q, training, rng, cache) for q in candidates]
        weights = self.evaluator(ex.query_tokens, candidates, training, rng)
        return dists, weights

    def e2e_loss(self, ex, candidates, training=False, rng=None):
        a = ex.answers[0]
        dists, weights = self.forward(ex, candidates, training, rng)
        return end_to_end_loss(weights.weights, dists, (a.start, a.end))

    def answer(self, ex, candidates):
        """Ranked :class:`WeightedAnswer` list for one example; first entry is the prediction."""
        with T.no_grad():
            dists, weights = self.forward(ex, candidates)
        per_q = [dict(span_candidates(d.start_probs, d.end_probs, self.cfg.top_k_spans, self.cfg.max_span_len))
                 for d in dists]
        ranked = answer_mixture(per_q, weights.values)
        for a in ranked:
            a.text = ex.answer_text(*a.span)
        return ranked

    def reader_only_answer(self, ex, question_tokens):
        with T.no_grad():
            d = self.read(ex, question_tokens)
        i, j, _ = best_span(d.start_probs, d.end_probs, self.cfg.max_span_len)
        return ex.answer_text(i, j)

    # -- persistence
    def arrays(self):
        return self.store.arrays()

    def load_arrays(self, arrays):
        T.load_into(self.store.tensors, arrays)


def tag_corpora(lexicon, examples):
    pos_c, ner_c = [], []
    seen = set()
    for ex in examples:
        for seq in (ex.passage_tokens, ex.question_tokens):
            for sent in sentences(seq):
                key = tuple(sent)
                if key in seen:
                    continue
                seen.add(key)
                pos, ner = lexicon.tags(sent)
                pos_c.append(pos)
                ner_c.append(ner)
    return pos_c, ner_c


def build_system(cfg, train_examples, extra_examples=()):
    """Vocabularies, word table, skip-gram tag tables and a freshly initialised :class:`Dorm`."""
    lexicon = Lexicon.build(train_examples, cfg.gen_vocab_size, extra_examples)
    rng = np.random.default_rng([cfg.seed, 7])
    if cfg.embeddings:
        table = load_embeddings(cfg.embeddings, lexicon.word_vocab, rng)
    else:
        table = random_embeddings(lexicon.word_vocab, cfg.word_dim, rng, scale=1.0)
    pos_c, ner_c = tag_corpora(lexicon, train_examples)
    pos_t, ner_t = skipgram.train_tag_embeddings(
        pos_c, ner_c, len(lexicon.pos_tagger.tags), len(lexicon.ner_tagger.tags), window=cfg.skip_window,
        dim=cfg.tag_dim, epochs=cfg.tag_epochs, min_len=cfg.min_tag_sentence, seed=cfg.seed,
    )
    return Dorm(cfg, lexicon, table, pos_t, ner_t)


def system_skeleton(cfg, lexicon_json, word_dim):
    """A :class:`Dorm` with placeholder tables, ready to receive checkpoint arrays."""
    lexicon = Lexicon.from_json(lexicon_json)
    table = np.zeros((len(lexicon.word_vocab), word_dim))
    pos_t = np.zeros((len(lexicon.pos_tagger.tags), cfg.tag_dim))
    ner_t = np.zeros((len(lexicon.ner_tagger.tags), cfg.tag_dim))
    return Dorm(cfg, lexicon, table, pos_t, ner_t)


def save_lexicon(path, system, meta):
    blob = {"meta": meta, "word_dim": int(system.store[WORD_TABLE].shape[1]), "lexicon": system.lexicon.to_json()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=1, sort_keys=True)
        fh.write("\n")
