"""Small template corpora in SQuAD layout, for overfit runs, ablations and the shipped toy model."""
import numpy as np

from .textproc.keywords import keywordify_examples
from .textproc.squad import examples_from_json

NAMES = ["alice", "bruno", "chen", "dana", "emil", "farah", "gita", "hugo", "ines", "jonas", "karl", "lena"]
COLORS = ["red", "blue", "green", "black", "white", "yellow"]
ITEMS = ["car", "lamp", "piano", "boat", "kite", "clock", "sofa", "bike", "vase"]
CITIES = ["paris", "vienna", "tokyo", "berlin", "lima", "oslo"]
DAYS = ["monday", "friday", "sunday", "tuesday", "saturday", "thursday"]

_QUESTIONS = [
    ("what did {p} buy from {q} ?", "{color} {item}"),
    ("who sold {p} the {item} ?", "{q}"),
    ("where did {p} buy the {item} ?", "{city}"),
    ("when did {p} buy the {item} ?", "{day}"),
]


def qa_blob(records, title):
    paragraphs = []
    for k, (context, question, answer) in enumerate(records):
        start = context.index(" " + answer + " ") + 1 if (" " + answer + " ") in context else context.index(answer)
        paragraphs.append({"context": context, "qas": [{
            "id": f"{title}-{k:04d}", "question": question,
            "answers": [{"text": answer, "answer_start": start}],
        }]})
    return {"version": "1.1", "data": [{"title": title, "paragraphs": paragraphs}]}


def purchase_records(n, seed=0):
    """One purchase fact per passage; the question asks what, who, where or when."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p, q = rng.choice(NAMES, size=2, replace=False)
        f = dict(p=p, q=q, color=rng.choice(COLORS), item=rng.choice(ITEMS),
                 city=rng.choice(CITIES), day=rng.choice(DAYS))
        context = "{p} bought a {color} {item} from {q} in {city} on {day} .".format(**f)
        question, answer = _QUESTIONS[rng.integers(len(_QUESTIONS))]
        out.append((context, question.format(**f), answer.format(**f)))
    return out


def trade_records(n, seed=0):
    """One purchase made from one person for another; only ``from`` / ``for`` tells the questions apart.

    Both words are stopwords, so after keywordification most queries read ``<p> buy <item>`` either way.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p, seller, buyer = rng.choice(NAMES, size=3, replace=False)
        item = rng.choice(ITEMS)
        context = f"{p} bought a {item} from {seller} for {buyer} in {rng.choice(CITIES)} on {rng.choice(DAYS)} ."
        if rng.random() < 0.5:
            out.append((context, f"who did {p} buy the {item} from ?", seller))
        else:
            out.append((context, f"who did {p} buy the {item} for ?", buyer))
    return out


def keywordified(records, title="synthetic", seed=0, stopwords=None):
    """Examples whose keyword query comes from :func:`keywordify` with the given seed."""
    ex = examples_from_json(qa_blob(records, title))
    return keywordify_examples(ex, np.random.default_rng(seed), stopwords)


def purchase_corpus(n=20, seed=0):
    return keywordified(purchase_records(n, seed), "purchase", seed)


def trade_corpus(n=200, seed=0):
    return keywordified(trade_records(n, seed), "trade", seed)
