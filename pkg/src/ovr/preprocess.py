"""Tokenization, stopword/digit filtering and Porter stemming.

The filtered sequence produced here is the input of both the co-occurrence
counting and the candidate generation, so positions refer to the filtered
sequence, not to the raw text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from nltk.stem.porter import PorterStemmer

# alphanumeric runs, hyphens allowed only between runs
TOKEN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*")
DIGITS_ONLY_RE = re.compile(r"^[0-9-]+$")
WORD_RE = re.compile(r"[^\W_]+")

_stemmer = PorterStemmer()


@dataclass(frozen=True)
class Token:
    stem: str
    surface: str
    position: int
    char_offset: int


@dataclass
class VocabEntry:
    count: int
    first_position: int
    surfaces: dict[str, int] = field(default_factory=dict)


@dataclass
class TokenSequence:
    tokens: list[Token]
    vocab: dict[str, VocabEntry]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def stems(self) -> list[str]:
        return [t.stem for t in self.tokens]


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    """Porter stem of a lowercase word (NLTK's extended Porter variant)."""
    return _stemmer.stem(word)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a one-word-per-line stopword file; the bundled English list if `path` is None."""
    if path is None:
        text = resources.files("ovr").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


DEFAULT_STOPWORDS = load_stopwords()


def tokenize_filter(text: str, stopwords: Iterable[str] | None = None) -> TokenSequence:
    """Lowercase, tokenize, drop stopwords and digit-only tokens, then stem.

    Stopwords are matched on the lowercased surface before stemming.
    """
    stop = DEFAULT_STOPWORDS if stopwords is None else stopwords
    tokens: list[Token] = []
    vocab: dict[str, VocabEntry] = {}
    for m in TOKEN_RE.finditer(text):
        surface = m.group().lower()
        if surface in stop or DIGITS_ONLY_RE.match(surface):
            continue
        s = stem(surface)
        pos = len(tokens)
        tokens.append(Token(s, surface, pos, m.start()))
        entry = vocab.get(s)
        if entry is None:
            entry = vocab[s] = VocabEntry(0, pos)
        entry.count += 1
        entry.surfaces[surface] = entry.surfaces.get(surface, 0) + 1
    return TokenSequence(tokens, vocab)


def normalize_phrase(phrase: str) -> tuple[str, ...]:
    """Stemmed word tuple used for evaluation matching.

    Punctuation is dropped and hyphenated words are split before stemming,
    so "State-of-the-art" becomes ("state", "of", "the", "art").
    """
    return tuple(stem(w) for w in WORD_RE.findall(phrase.lower()))
