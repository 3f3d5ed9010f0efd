import logging
from collections import Counter

import numpy as np

logger = logging.getLogger(__name__)

PAD, UNK, EOS = "<pad>", "<unk>", "<eos>"
PAD_ID, UNK_ID, EOS_ID = 0, 1, 2
SPECIALS = (PAD, UNK, EOS)


class EmbeddingParseError(ValueError):
    pass


class Vocabulary:
    """Token/id maps with the three special symbols first. Keys are lowercased when ``lower``."""

    def __init__(self, tokens=(), lower=True):
        self.lower = lower
        self.itos = list(SPECIALS)
        self.stoi = {s: i for i, s in enumerate(self.itos)}
        for t in tokens:
            self.add(t)
        self.vectors = None

    def key(self, token):
        return token.lower() if self.lower else token

    def add(self, token):
        k = self.key(token)
        if k not in self.stoi:
            self.stoi[k] = len(self.itos)
            self.itos.append(k)
        return self.stoi[k]

    @classmethod
    def build(cls, sequences, min_count=1, max_size=None, lower=True):
        counts = Counter()
        for seq in sequences:
            counts.update(t.lower() if lower else t for t in seq)
        ranked = sorted((t for t, c in counts.items() if c >= min_count and t not in SPECIALS),
                        key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[:max_size]
        return cls(ranked, lower=lower)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return self.key(token) in self.stoi

    def id(self, token):
        return self.stoi.get(self.key(token), UNK_ID)

    def encode(self, tokens):
        return [self.id(t) for t in tokens]

    def decode(self, ids):
        return [self.itos[i] for i in ids]

    def to_json(self):
        return {"lower": self.lower, "tokens": self.itos[len(SPECIALS):]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["tokens"], lower=obj["lower"])


def load_embeddings(path, vocab, rng=None, scale=0.1):
    """Read a GloVe-style text file into a ``len(vocab) x d`` table.

    Rows of tokens absent from the file are drawn from N(0, scale^2) with ``rng``.
    The dimension comes from the first line; a later line of a different width
    raises :class:`EmbeddingParseError` naming the line.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    found = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if len(parts) < 2:
                continue
            tok, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise EmbeddingParseError(f"{path}:{lineno}: expected {dim} values, found {len(vals)}")
            k = vocab.key(tok)
            if k not in vocab.stoi:
                continue
            if k in found:
                logger.warning("%s:%d: duplicate token %r ignored (first occurrence wins)", path, lineno, tok)
                continue
            try:
                found[k] = np.array([float(v) for v in vals])
            except ValueError as exc:
                raise EmbeddingParseError(f"{path}:{lineno}: {exc}") from None
    if dim is None:
        raise EmbeddingParseError(f"{path}: no vectors")
    table = np.empty((len(vocab), dim))
    for i, tok in enumerate(vocab.itos):
        table[i] = found[tok] if tok in found else rng.normal(0.0, scale, size=dim)
    logger.info("embeddings: %d/%d tokens found in %s", len(found), len(vocab), path)
    return table


def random_embeddings(vocab, dim, rng, scale=0.1):
    return rng.normal(0.0, scale, size=(len(vocab), dim))
