"""Keyword-query simulation: stochastic stopword removal plus TF-IDF pruning."""
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .tokens import is_punct, words

PRESERVED = frozenset({"when", "where"})


def load_stopwords(path=None):
    """One token per line; ``#`` starts a comment. Default is the bundled list."""
    if path is None:
        text = resources.files("keyreader").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    out = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            out.add(line)
    return frozenset(out)


class CorpusStats:
    """Document frequencies over training questions (one question = one document)."""

    def __init__(self, documents=()):
        self.n_docs = 0
        self.df = Counter()
        for doc in documents:
            self.add(doc)

    def add(self, tokens):
        self.n_docs += 1
        self.df.update({t.lower() for t in tokens})

    def idf(self, token):
        return math.log((1 + self.n_docs) / (1 + self.df.get(token.lower(), 0)))


def tfidf_scores(tokens, stats):
    tf = Counter(t.lower() for t in tokens)
    return [tf[t.lower()] * stats.idf(t) for t in tokens]


@dataclass
class KeywordStats:
    stopwords_seen: int = 0
    stopwords_dropped: int = 0
    preserved_seen: int = 0
    preserved_kept: int = 0
    pruned: int = 0
    random_prunes: int = 0
    fallbacks: int = 0
    lengths: Counter = field(default_factory=Counter)

    @property
    def drop_rate(self):
        return self.stopwords_dropped / self.stopwords_seen if self.stopwords_seen else 0.0

    def as_dict(self):
        return {
            "stopwords_seen": self.stopwords_seen,
            "stopwords_dropped": self.stopwords_dropped,
            "drop_rate": self.drop_rate,
            "preserved_seen": self.preserved_seen,
            "preserved_kept": self.preserved_kept,
            "pruned": self.pruned,
            "random_prunes": self.random_prunes,
            "fallbacks": self.fallbacks,
            "length_histogram": {str(k): v for k, v in sorted(self.lengths.items())},
        }


def keywordify(tokens, rng, stopwords, corpus, preserved=PRESERVED, max_len=8,
               stop_drop=0.95, noise=0.05, stats=None):
    """Turn a question token list into a keyword query.

    Non-preserved stopwords are each dropped with probability ``stop_drop``,
    sentence-final punctuation is removed, and while more than ``max_len`` tokens
    remain one token is removed per round: a uniformly random one with
    probability ``noise``, else the lowest TF-IDF one (leftmost on ties). Order is
    kept. If nothing survives, the single highest TF-IDF token is returned.
    """
    if not tokens:
        raise ValueError("keywordify: empty question")
    preserved = {p.lower() for p in preserved}
    weights = tfidf_scores(tokens, corpus)
    keep = []
    for i, tok in enumerate(tokens):
        low = tok.lower()
        if low in preserved:
            if stats is not None:
                stats.preserved_seen += 1
                stats.preserved_kept += 1
            keep.append(i)
            continue
        if low in stopwords:
            dropped = rng.random() < stop_drop
            if stats is not None:
                stats.stopwords_seen += 1
                stats.stopwords_dropped += int(dropped)
            if dropped:
                continue
        keep.append(i)
    while keep and is_punct(tokens[keep[-1]]):
        keep.pop()
    while len(keep) > max_len:
        if rng.random() < noise:
            victim = int(rng.integers(len(keep)))
            if stats is not None:
                stats.random_prunes += 1
        else:
            victim = min(range(len(keep)), key=lambda k: (weights[keep[k]], k))
        del keep[victim]
        if stats is not None:
            stats.pruned += 1
    if not keep:
        if stats is not None:
            stats.fallbacks += 1
        content = [i for i, t in enumerate(tokens) if not is_punct(t)] or list(range(len(tokens)))
        keep = [max(content, key=lambda i: (weights[i], -i))]
    out = [tokens[i] for i in keep]
    if stats is not None:
        stats.lengths[len(out)] += 1
    return out


def keywordify_examples(examples, rng, stopwords=None, corpus=None, stats=None, **kw):
    """Attach a keyword query to each example in place; TF-IDF statistics default to the questions."""
    stopwords = load_stopwords() if stopwords is None else stopwords
    corpus = corpus or CorpusStats(ex.question_tokens for ex in examples)
    for ex in examples:
        kw_tokens = keywordify(ex.question_tokens, rng, stopwords, corpus, stats=stats, **kw)
        ex.keyword = " ".join(kw_tokens)
        # re-tokenise so the stored query reads back identically
        ex.keyword_tokens = words(ex.keyword)
    return examples
