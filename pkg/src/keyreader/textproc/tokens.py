import re
import unicodedata
from typing import List, NamedTuple


class Token(NamedTuple):
    text: str
    start: int
    end: int


_CLITIC = re.compile(r"(?i)(['’]s)$")


def is_punct(s):
    return bool(s) and all(unicodedata.category(ch)[0] in "PS" for ch in s)


def _split_chunk(chunk, offset):
    lead, trail = [], []
    i, j = 0, len(chunk)
    while i < j and is_punct(chunk[i]):
        lead.append(Token(chunk[i], offset + i, offset + i + 1))
        i += 1
    while j > i and is_punct(chunk[j - 1]):
        trail.append(Token(chunk[j - 1], offset + j - 1, offset + j))
        j -= 1
    core = []
    if i < j:
        m = _CLITIC.search(chunk[i:j])
        if m and j - i > len(m.group(1)):
            k = j - len(m.group(1))
            core = [Token(chunk[i:k], offset + i, offset + k), Token(chunk[k:j], offset + k, offset + j)]
        else:
            core = [Token(chunk[i:j], offset + i, offset + j)]
    return lead + core + trail[::-1]


def tokenize(text: str) -> List[Token]:
    """Whitespace split, then peel leading/trailing punctuation and a possessive ``'s`` off each chunk.

    >>> [t.text for t in tokenize("Who was MVP?")]
    ['Who', 'was', 'MVP', '?']
    """
    out = []
    for m in re.finditer(r"\S+", text):
        out.extend(_split_chunk(m.group(0), m.start()))
    return out


def words(text: str) -> List[str]:
    return [t.text for t in tokenize(text)]
