"""SQuAD-style exact match and token F1."""
import re
import string
from collections import Counter

_PUNCT = set(string.punctuation)


def normalize_answer(s):
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def _f1(prediction, gold):
    p = normalize_answer(prediction).split()
    g = normalize_answer(gold).split()
    if not p or not g:
        return float(p == g)
    common = Counter(p) & Counter(g)
    same = sum(common.values())
    if same == 0:
        return 0.0
    precision = same / len(p)
    recall = same / len(g)
    return 2 * precision * recall / (precision + recall)


def em_metric(prediction, golds):
    return int(any(normalize_answer(prediction) == normalize_answer(g) for g in golds))


def f1_metric(prediction, golds):
    return max((_f1(prediction, g) for g in golds), default=0.0)


def evaluate_predictions(predictions, examples):
    """Percent EM/F1 of ``{id: text}`` against examples' gold answers (missing ids score 0)."""
    em = f1 = 0.0
    for ex in examples:
        golds = [a.text for a in ex.answers]
        pred = predictions.get(ex.id)
        if pred is None:
            continue
        em += em_metric(pred, golds)
        f1 += f1_metric(pred, golds)
    n = max(len(examples), 1)
    return {"em": 100.0 * em / n, "f1": 100.0 * f1 / n}
