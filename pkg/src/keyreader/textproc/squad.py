"""SQuAD v1.1 JSON reading and writing.

Keywordified files keep the SQuAD layout: ``question`` holds the keyword query
and ``original_question`` the natural-language question it came from.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional

from .tokens import Token, tokenize, words

logger = logging.getLogger(__name__)


@dataclass
class Answer:
    text: str
    char_start: int
    start: int
    end: int  # inclusive token index


@dataclass
class Example:
    id: str
    context: str
    passage: List[Token]
    question: str
    question_tokens: List[str]
    answers: List[Answer]
    keyword: Optional[str] = None
    keyword_tokens: List[str] = field(default_factory=list)
    title: str = ""

    @property
    def passage_tokens(self):
        return [t.text for t in self.passage]

    @property
    def query_tokens(self):
        """Keyword query when present, otherwise the question itself."""
        return self.keyword_tokens if self.keyword is not None else self.question_tokens

    def answer_text(self, start, end):
        return self.context[self.passage[start].start:self.passage[end].end]


def char_span_to_tokens(passage, char_start, char_end):
    """Minimal token cover of ``[char_start, char_end)``; None if no token overlaps."""
    hit = [k for k, t in enumerate(passage) if t.start < char_end and t.end > char_start]
    if not hit:
        return None
    return hit[0], hit[-1]


def read_dataset(path, stats=None):
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    return examples_from_json(blob, stats=stats, source=str(path))


def examples_from_json(blob, stats=None, source="<json>"):
    out = []
    skipped = 0
    for article in blob["data"]:
        title = article.get("title", "")
        for para in article["paragraphs"]:
            context = para["context"]
            passage = tokenize(context)
            for qa in para["qas"]:
                answers = []
                ok = True
                for ans in qa.get("answers", []):
                    start = ans["answer_start"]
                    end = start + len(ans["text"])
                    span = None
                    if 0 <= start and end <= len(context) and ans["text"]:
                        span = char_span_to_tokens(passage, start, end)
                    if span is None:
                        ok = False
                        break
                    answers.append(Answer(ans["text"], start, span[0], span[1]))
                if not ok:
                    skipped += 1
                    logger.warning("%s: qa %s has an answer offset outside the passage; skipped", source, qa["id"])
                    continue
                if "original_question" in qa:
                    question, keyword = qa["original_question"], qa["question"]
                else:
                    question, keyword = qa["question"], None
                out.append(Example(
                    id=qa["id"], context=context, passage=passage, question=question,
                    question_tokens=words(question), answers=answers, keyword=keyword,
                    keyword_tokens=words(keyword) if keyword is not None else [], title=title,
                ))
    if stats is not None:
        stats["read"] = len(out)
        stats["skipped"] = skipped
    return out


def examples_to_json(examples, version="1.1", extra=None):
    articles = []
    by_title = {}
    for ex in examples:
        art = by_title.get(ex.title)
        if art is None:
            art = {"title": ex.title, "paragraphs": []}
            by_title[ex.title] = art
            articles.append(art)
        paras = art["paragraphs"]
        if not paras or paras[-1]["context"] != ex.context:
            paras.append({"context": ex.context, "qas": []})
        qa = {"id": ex.id, "answers": [{"text": a.text, "answer_start": a.char_start} for a in ex.answers]}
        if ex.keyword is not None:
            qa["question"] = ex.keyword
            qa["original_question"] = ex.question
        else:
            qa["question"] = ex.question
        paras[-1]["qas"].append(qa)
    blob = {"version": version, "data": articles}
    if extra:
        blob.update(extra)
    return blob


def write_dataset(examples, path, extra=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(examples_to_json(examples, extra=extra), fh, indent=1, ensure_ascii=False, sort_keys=False)
        fh.write("\n")
