"""Skip-gram with negative sampling for POS/NER tag embeddings."""
import logging

import numpy as np

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


def skipgram_pairs(seq, window=2):
    n = len(seq)
    return [(seq[i], seq[j]) for i in range(n) for j in range(max(0, i - window), min(n, i + window + 1)) if j != i]


def filter_sentences(corpus, min_len=9):
    """Drop sentences shorter than ``min_len`` tags."""
    return [s for s in corpus if len(s) >= min_len]


def _sig(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def train_skipgram(corpus, vocab_size, dim=20, window=2, negatives=5, epochs=5, lr=0.025, seed=0):
    """SGD on the negative-sampling objective; returns the input (center) embedding table."""
    rng = np.random.default_rng(seed)
    pairs = np.array([p for s in corpus for p in skipgram_pairs(s, window)], dtype=np.int64)
    if len(pairs) == 0:
        raise ConfigurationError("skip-gram: corpus yields no training pairs")
    counts = np.bincount(pairs[:, 0], minlength=vocab_size).astype(np.float64)
    noise = counts ** 0.75
    noise /= noise.sum()
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
    w_out = np.zeros((vocab_size, dim))
    total = epochs * len(pairs)
    step = 0
    for _ in range(epochs):
        for k in rng.permutation(len(pairs)):
            center, ctx = pairs[k]
            alpha = lr * max(1e-4, 1.0 - step / total)
            step += 1
            targets = np.concatenate([[ctx], rng.choice(vocab_size, size=negatives, p=noise)])
            labels = np.zeros(negatives + 1)
            labels[0] = 1.0
            v = w_in[center]
            u = w_out[targets]
            g = (labels - _sig(u @ v)) * alpha
            w_in[center] += g @ u
            np.add.at(w_out, targets, np.outer(g, v))
    return w_in


def train_tag_embeddings(pos_corpus, ner_corpus, n_pos, n_ner, window=2, dim=20, epochs=5,
                         min_len=9, seed=0):
    """Train one table per tag vocabulary on sentence-level tag sequences."""
    pos_corpus = filter_sentences(pos_corpus, min_len)
    ner_corpus = filter_sentences(ner_corpus, min_len)
    if not pos_corpus or not ner_corpus:
        raise ConfigurationError(f"tag corpus empty after removing sentences shorter than {min_len}")
    logger.info("tag embeddings: %d sentences", len(pos_corpus))
    pos = train_skipgram(pos_corpus, n_pos, dim, window, epochs=epochs, seed=seed)
    ner = train_skipgram(ner_corpus, n_ner, dim, window, epochs=epochs, seed=seed + 1)
    return pos, ner
