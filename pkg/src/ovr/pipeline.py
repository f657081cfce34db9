"""End-to-end extraction: preprocess, embed, detect outliers, generate and rank candidates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

from ovr.candidates import CandidateSet, generate_phrases, select_unigrams
from ovr.corpus import Corpus
from ovr.embed import (
    CooccurrenceMatrix,
    DocumentTooShort,
    EmbeddingModel,
    GloveConfig,
    build_cooccurrence,
    train_glove,
)
from ovr.outlier import DETECTORS, OutlierError, OutlierReport, quantile_threshold, score_points
from ovr.preprocess import TokenSequence, load_stopwords, tokenize_filter
from ovr.rank import RankedKeyphrases, score_candidates

BASELINES = ("tfidf",)


@dataclass
class PipelineConfig:
    glove: GloveConfig = field(default_factory=GloveConfig)
    contamination: float = 0.49
    detector: str = "mcd"
    top_unigrams: int = 100
    min_word_len: int = 3
    max_phrase_len: int = 3
    k: list[int] = field(default_factory=lambda: [10, 20])
    stopwords: str | None = None
    df_table: str | None = None
    seed: int = 0
    # None for the outlier-filtered method, "tfidf" to score every document n-gram
    baseline: str | None = None

    def __post_init__(self):
        if isinstance(self.glove, dict):
            self.glove = GloveConfig(**self.glove)
        if not 0 < self.contamination <= 0.5:
            raise ValueError(f"contamination must be in (0, 0.5], got {self.contamination}")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.baseline is not None and self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if not 1 <= self.max_phrase_len <= 3:
            raise ValueError("max_phrase_len must be in [1, 3]")
        if self.top_unigrams < 1 or self.min_word_len < 0:
            raise ValueError("top_unigrams must be >= 1 and min_word_len >= 0")
        if not self.k or any(k < 1 for k in self.k):
            raise ValueError("k must be a non-empty list of positive counts")
        self.k = list(self.k)

    def glove_config(self) -> GloveConfig:
        return replace(self.glove, seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@lru_cache(maxsize=8)
def _stopwords(path: str | None):
    return load_stopwords(path)


def stopword_set(config: PipelineConfig) -> frozenset[str]:
    return _stopwords(config.stopwords)


@dataclass
class DocumentEmbedding:
    seq: TokenSequence
    cooc: CooccurrenceMatrix
    model: EmbeddingModel


@dataclass
class ExtractionResult:
    seq: TokenSequence
    ranked: RankedKeyphrases
    candidates: CandidateSet
    model: EmbeddingModel | None = None
    report: OutlierReport | None = None


def embed_document(text: str, config: PipelineConfig) -> DocumentEmbedding:
    seq = tokenize_filter(text, stopword_set(config))
    cooc = build_cooccurrence(seq, config.glove.window)
    if cooc.nnz == 0:
        raise DocumentTooShort("document too short: fewer than two content tokens")
    return DocumentEmbedding(seq, cooc, train_glove(cooc, config.glove_config()))


def rank_from_report(
    seq: TokenSequence, report: OutlierReport, config: PipelineConfig, corpus: Corpus | None
) -> tuple[CandidateSet, RankedKeyphrases]:
    unigrams = select_unigrams(report, seq, config.top_unigrams, config.min_word_len)
    cands = generate_phrases(unigrams, seq, config.max_phrase_len)
    return cands, score_candidates(cands, corpus)


def extract_tfidf_baseline(text: str, config: PipelineConfig, corpus: Corpus | None) -> ExtractionResult:
    """Plain TfIdf over every n-gram of the filtered sequence, without boosting."""
    seq = tokenize_filter(text, stopword_set(config))
    cands = generate_phrases(list(seq.vocab), seq, config.max_phrase_len)
    return ExtractionResult(seq, score_candidates(cands, corpus, multiword_boost=1.0), cands)


def extract_keyphrases(text: str, config: PipelineConfig | None = None, corpus: Corpus | None = None) -> ExtractionResult:
    """Run the full extraction on one document.

    `corpus` supplies document frequencies; without it ranking falls back to
    raw term frequency.
    """
    config = config or PipelineConfig()
    if config.baseline == "tfidf":
        return extract_tfidf_baseline(text, config, corpus)
    emb = embed_document(text, config)
    return extract_with_contaminations(emb, config, corpus, [config.contamination], config.detector)[0]


def extract_with_contaminations(
    emb: DocumentEmbedding,
    config: PipelineConfig,
    corpus: Corpus | None,
    contaminations: list[float],
    detector: str,
) -> list[ExtractionResult]:
    """Rank candidates for several contamination levels sharing one detector fit."""
    n, p = emb.model.matrix.shape
    if n <= p + 1:
        raise OutlierError(f"document too short for robust fit ({n} distinct words, {p} dimensions)")
    scores, fit = score_points(emb.model.matrix, detector, config.seed)
    results = []
    for c in contaminations:
        if not 0 < c <= 0.5:
            raise ValueError(f"contamination must be in (0, 0.5], got {c}")
        threshold, mask = quantile_threshold(scores, c)
        report = OutlierReport(list(emb.model.words), scores, mask, threshold, c, detector, fit)
        cands, ranked = rank_from_report(emb.seq, report, config, corpus)
        results.append(ExtractionResult(emb.seq, ranked, cands, emb.model, report))
    return results

