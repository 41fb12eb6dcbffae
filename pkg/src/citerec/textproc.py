"""Tokenization, normalization and stop-word handling.

Token streams interleave ordinary words with citation markers.  A marker
is written inline as ``⟦CITE:<id>⟧`` and survives tokenization untouched;
everything else is lowercased, split on whitespace and stripped of
leading/trailing non-alphanumeric characters.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

MARKER_PREFIX = "⟦CITE:"
MARKER_SUFFIX = "⟧"

_MARKER_RE = re.compile(re.escape(MARKER_PREFIX) + r"([^" + MARKER_SUFFIX + r"]+)" + re.escape(MARKER_SUFFIX))

WORD = "word"
CITATION_MARKER = "citation_marker"


class Token(NamedTuple):
    kind: str
    text: str

    @property
    def is_marker(self) -> bool:
        return self.kind == CITATION_MARKER

    @property
    def term(self) -> str:
        """Term key used in token streams and indexes (wire form for markers)."""
        return marker(self.text) if self.kind == CITATION_MARKER else self.text


def marker(doc_id: str) -> str:
    """Wire form of a citation marker naming ``doc_id``."""
    if not doc_id or MARKER_SUFFIX in doc_id:
        raise ValueError(f"invalid id for a citation marker: {doc_id!r}")
    return MARKER_PREFIX + doc_id + MARKER_SUFFIX


def is_marker(term: str) -> bool:
    return term.startswith(MARKER_PREFIX) and term.endswith(MARKER_SUFFIX)


def marker_id(term: str) -> str:
    """Cited id carried by a marker term."""
    if not is_marker(term):
        raise ValueError(f"not a citation marker: {term!r}")
    return term[len(MARKER_PREFIX) : -len(MARKER_SUFFIX)]


def normalize(word: str) -> str:
    """Lowercase and strip non-alphanumeric characters from both ends."""
    word = word.lower()
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


def _words(text: str) -> list[Token]:
    out = []
    for raw in text.split():
        w = normalize(raw)
        if w:
            out.append(Token(WORD, w))
    return out


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    for m in _MARKER_RE.finditer(text):
        tokens.extend(_words(text[pos : m.start()]))
        tokens.append(Token(CITATION_MARKER, m.group(1)))
        pos = m.end()
    tokens.extend(_words(text[pos:]))
    return tokens


def words(text: str) -> list[str]:
    """Word terms of ``text`` with any inline markers dropped."""
    return [t.text for t in tokenize(text) if t.kind == WORD]


def remove_stopwords(tokens: Iterable, stopwords: frozenset[str] | set[str]) -> list:
    """Drop stop words, keeping order.  Markers are never removed.

    Accepts :class:`Token` objects or plain term strings.
    """
    out = []
    for t in tokens:
        if isinstance(t, Token):
            if t.kind == WORD and t.text in stopwords:
                continue
        elif t in stopwords and not is_marker(t):
            continue
        out.append(t)
    return out


def parse_stopwords(lines: Iterable[str]) -> frozenset[str]:
    words_ = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        w = normalize(line)
        if w:
            words_.add(w)
    return frozenset(words_)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stop-word file (one word per line, ``#`` comments).

    With no path, the list bundled with the package is used.
    """
    if path is None:
        text = resources.files("citerec").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_stopwords(text.splitlines())
