"""TfIdf scoring of candidate phrases with a boost for multi-word phrases."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ovr.candidates import CandidateSet
from ovr.corpus import Corpus

NGram = tuple[str, ...]


@dataclass(frozen=True)
class Keyphrase:
    phrase: NGram
    surface: str
    score: float
    tf: int
    idf: float
    first_position: int

    def as_record(self, rank: int) -> dict:
        return {
            "rank": rank,
            "phrase": self.surface,
            "stems": list(self.phrase),
            "score": self.score,
            "tf": self.tf,
            "idf": self.idf,
        }


@dataclass(frozen=True)
class RankedKeyphrases:
    items: tuple[Keyphrase, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def phrases(self) -> list[NGram]:
        return [k.phrase for k in self.items]

    @property
    def surfaces(self) -> list[str]:
        return [k.surface for k in self.items]


def idf(df: int, n_docs: int) -> float:
    """Smoothed inverse document frequency log2((N + 1) / (df + 1))."""
    return math.log2((n_docs + 1) / (df + 1))


def score_candidates(
    cands: CandidateSet, corpus: Corpus | None, multiword_boost: float = 2.0
) -> RankedKeyphrases:
    """score = boost * tf * idf, boost applying to phrases of two or more words.

    Without a corpus every idf is 1 (pure term-frequency ranking). Equal
    scores are ordered by first occurrence, then by the stem tuple.
    """
    items = []
    for phrase, stats in cands.phrases.items():
        w = 1.0 if corpus is None else idf(corpus.df(phrase), corpus.n_docs)
        m = multiword_boost if len(phrase) > 1 else 1.0
        items.append(Keyphrase(phrase, stats.surface, m * stats.tf * w, stats.tf, w, stats.first_position))
    items.sort(key=lambda k: (-k.score, k.first_position, k.phrase))
    return RankedKeyphrases(tuple(items))


def top_k(ranked: RankedKeyphrases, k: int) -> RankedKeyphrases:
    if k < 1:
        raise ValueError("k must be >= 1")
    return RankedKeyphrases(ranked.items[:k])
