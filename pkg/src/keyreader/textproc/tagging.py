"""Deterministic desk-scale POS/NER taggers, a suffix lemmatizer and exact-match features.

Taggers are plain objects with a ``tags`` list (the closed tag vocabulary) and
a ``tag(tokens) -> list[int]`` method; anything with that shape can be plugged in.
"""
import re
from importlib import resources

from .tokens import is_punct

POS_TAGS = ("ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRON", "PROPN", "PUNCT", "VERB", "X")
NER_TAGS = ("O", "PERSON", "LOCATION", "ORGANIZATION", "DATE", "NUMBER", "MISC")

_DET = {"a", "an", "the", "this", "that", "these", "those", "each", "every", "some", "any", "no", "all", "both"}
_PRON = {"i", "me", "my", "we", "us", "our", "you", "your", "he", "him", "his", "she", "her", "it", "its",
         "they", "them", "their", "who", "whom", "whose", "what", "which", "'s"}
_ADP = {"of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
        "during", "before", "after", "above", "below", "to", "from", "up", "down", "out", "off", "over",
        "under", "as", "upon", "via", "per", "among"}
_CONJ = {"and", "but", "or", "nor", "because", "if", "while", "than", "whether", "so"}
_AUX = {"is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has", "had",
        "can", "will", "would", "could", "should", "shall", "may", "might", "must"}
_ADV = {"when", "where", "why", "how", "not", "very", "too", "also", "just", "now", "then", "here", "there"}
_NUM_WORDS = {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "hundred",
              "thousand", "million", "billion"}
_ADJ_SUFFIX = ("ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish")
_NUMBER = re.compile(r"^[+-]?\d[\d,.]*$")
_YEAR = re.compile(r"^(1[0-9]|20)\d\d$")


class RulePOSTagger:
    tags = POS_TAGS

    def __init__(self):
        self.index = {t: i for i, t in enumerate(self.tags)}

    def tag_one(self, tok, position):
        low = tok.lower()
        if is_punct(tok):
            return "PUNCT"
        if _NUMBER.match(tok) or low in _NUM_WORDS:
            return "NUM"
        for vocab, tag in ((_DET, "DET"), (_PRON, "PRON"), (_ADP, "ADP"), (_CONJ, "CONJ"),
                           (_AUX, "VERB"), (_ADV, "ADV")):
            if low in vocab:
                return tag
        if position > 0 and tok[:1].isupper():
            return "PROPN"
        if len(low) > 4 and low.endswith("ly"):
            return "ADV"
        if len(low) > 4 and (low.endswith("ing") or low.endswith("ed")):
            return "VERB"
        if len(low) > 4 and low.endswith(_ADJ_SUFFIX):
            return "ADJ"
        if not low.isalpha():
            return "X"
        return "NOUN"

    def tag(self, tokens):
        return [self.index[self.tag_one(t, k)] for k, t in enumerate(tokens)]


def load_gazetteer(path=None):
    if path is None:
        text = resources.files("keyreader").joinpath("data/gazetteer.tsv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok, tag = line.split("\t")
        if tag not in NER_TAGS:
            raise ValueError(f"unknown NER tag {tag!r} in gazetteer")
        out[tok.lower()] = tag
    return out


class GazetteerNERTagger:
    tags = NER_TAGS

    def __init__(self, gazetteer=None):
        self.gazetteer = load_gazetteer() if gazetteer is None else {k.lower(): v for k, v in gazetteer.items()}
        self.index = {t: i for i, t in enumerate(self.tags)}

    def tag_one(self, tok):
        hit = self.gazetteer.get(tok.lower())
        if hit:
            return hit
        if _YEAR.match(tok):
            return "DATE"
        if _NUMBER.match(tok):
            return "NUMBER"
        return "O"

    def tag(self, tokens):
        return [self.index[self.tag_one(t)] for t in tokens]


def tag_tokens(tokens, pos_tagger=None, ner_tagger=None):
    pos_tagger = pos_tagger or RulePOSTagger()
    ner_tagger = ner_tagger or GazetteerNERTagger()
    return pos_tagger.tag(tokens), ner_tagger.tag(tokens)


_VOWELS = set("aeiou")


def suffix_lemma(word):
    """Strip -ing/-ed/-es/-s with consonant-doubling repair; irregular forms are left alone."""
    w = word.lower()
    for suf in ("ing", "ed"):
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            stem = w[: -len(suf)]
            if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
                stem = stem[:-1]
            return stem
    if w.endswith("es") and len(w) > 4 and (w[:-2].endswith(("s", "x", "z", "ch", "sh"))):
        return w[:-2]
    if w.endswith("s") and not w.endswith("ss") and len(w) > 3:
        return w[:-1]
    return w


def exact_match_features(passage_token, question_tokens, lemmatizer=suffix_lemma):
    """(original, lowercase, lemma) match bits of one passage token against a question."""
    return match_bits([passage_token], question_tokens, lemmatizer)[0]


def match_bits(passage_tokens, question_tokens, lemmatizer=suffix_lemma):
    orig = set(question_tokens)
    lower = {q.lower() for q in question_tokens}
    lemma = {lemmatizer(q) for q in question_tokens}
    return [
        (int(p in orig), int(p.lower() in lower), int(lemmatizer(p) in lemma))
        for p in passage_tokens
    ]
