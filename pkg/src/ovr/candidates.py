"""Candidate unigrams from outlier words, and consecutive n-grams built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ovr.outlier import OutlierReport
from ovr.preprocess import TokenSequence

NGram = tuple[str, ...]


@dataclass
class PhraseStats:
    tf: int
    first_position: int
    # insertion order is first-occurrence order
    surfaces: dict[str, int] = field(default_factory=dict)

    @property
    def surface(self) -> str:
        """Most frequent surface string; ties go to the earliest seen."""
        return max(self.surfaces.items(), key=lambda kv: kv[1])[0]


@dataclass
class CandidateSet:
    unigrams: list[str]
    phrases: dict[NGram, PhraseStats]


def select_unigrams(
    report: OutlierReport, seq: TokenSequence, top_k: int = 100, min_len: int = 3
) -> list[str]:
    """Outlier stems of at least `min_len` characters, earliest first occurrence first, top `top_k`."""
    kept = [w for w in report.outliers if len(w) >= min_len]
    kept.sort(key=lambda w: seq.vocab[w].first_position)
    return kept[:top_k]


def generate_phrases(unigrams: Iterable[str], seq: TokenSequence, max_n: int = 3) -> CandidateSet:
    """All runs of 1..max_n consecutive tokens whose stems are all candidates.

    Each occurrence is counted, overlapping windows included.
    """
    unigrams = list(unigrams)
    allowed = set(unigrams)
    tokens = seq.tokens
    phrases: dict[NGram, PhraseStats] = {}
    for i in range(len(tokens)):
        for n in range(1, max_n + 1):
            window = tokens[i:i + n]
            # the window grows by one token per step, so only the new one needs checking
            if len(window) < n or window[-1].stem not in allowed:
                break
            key = tuple(t.stem for t in window)
            surface = " ".join(t.surface for t in window)
            stats = phrases.get(key)
            if stats is None:
                stats = phrases[key] = PhraseStats(0, i)
            stats.tf += 1
            stats.surfaces[surface] = stats.surfaces.get(surface, 0) + 1
    return CandidateSet(unigrams, phrases)
