"""Exact-match and word-match F1@k, batch evaluation, sweeps and diagnostics export."""

from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ovr.corpus import Corpus, GoldKeyphrases, RawDocument, build_df, corpus_stats_from_sidecar
from ovr.embed import EmbeddingError, EmbeddingModel
from ovr.outlier import OutlierError, OutlierReport
from ovr.pipeline import (
    PipelineConfig,
    embed_document,
    extract_tfidf_baseline,
    extract_with_contaminations,
    stopword_set,
)
from ovr.preprocess import normalize_phrase
from ovr.rank import RankedKeyphrases, top_k

logger = logging.getLogger(__name__)

MODES = ("exact", "word")
RESULT_COLUMNS = ["dataset", "detector", "contamination", "mode", "k", "macro_f1", "n_docs"]


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class EvalResult:
    doc_id: str
    k: int
    mode: str
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class AggregateResult:
    dataset: str
    detector: str
    contamination: float | None
    mode: str
    k: int
    macro_f1: float
    n_docs: int
    n_failed: int = 0
    n_no_gold: int = 0

    def row(self) -> dict:
        return {
            "dataset": self.dataset,
            "detector": self.detector,
            "contamination": "" if self.contamination is None else self.contamination,
            "mode": self.mode,
            "k": self.k,
            "macro_f1": f"{self.macro_f1:.6f}",
            "n_docs": self.n_docs,
        }


def _extracted_tuples(extracted: RankedKeyphrases, k: int) -> list[tuple[str, ...]]:
    # hyphenated tokens are split and re-stemmed to match the gold normalization
    return [normalize_phrase(kp.surface) for kp in top_k(extracted, k)]


def _check_gold(gold: GoldKeyphrases) -> None:
    if not gold.stemmed_forms:
        raise EvaluationError(f"document {gold.doc_id!r} has no gold keyphrases")


def eval_exact(extracted: RankedKeyphrases, gold: GoldKeyphrases, k: int) -> EvalResult:
    _check_gold(gold)
    top = _extracted_tuples(extracted, k) if len(extracted) else []
    gold_set = set(gold.stemmed_forms)
    tp = len(set(top) & gold_set)
    return EvalResult(gold.doc_id, k, "exact", tp, len(top) - tp, len(gold_set) - tp)


def eval_word(extracted: RankedKeyphrases, gold: GoldKeyphrases, k: int) -> EvalResult:
    _check_gold(gold)
    top = _extracted_tuples(extracted, k) if len(extracted) else []
    ext_words = set(itertools.chain.from_iterable(top))
    gold_words = set(itertools.chain.from_iterable(gold.stemmed_forms))
    tp = len(ext_words & gold_words)
    return EvalResult(gold.doc_id, k, "word", tp, len(ext_words) - tp, len(gold_words) - tp)


EVALUATORS = {"exact": eval_exact, "word": eval_word}


def macro_f1(results: Iterable[EvalResult]) -> float:
    scores = [r.f1 for r in results]
    return float(np.mean(scores)) if scores else 0.0


# ---------------------------------------------------------------- batch runs


def _run_document(doc: RawDocument, config: PipelineConfig, stats: Corpus,
                  detectors: Sequence[str], contaminations: Sequence[float]):
    """Rankings keyed by (detector, contamination); the embedding is trained once."""
    if config.baseline == "tfidf":
        return {("tfidf", None): extract_tfidf_baseline(doc.text, config, stats).ranked}
    emb = embed_document(doc.text, config)
    out = {}
    for det in detectors:
        for c, res in zip(contaminations, extract_with_contaminations(emb, config, stats, list(contaminations), det)):
            out[(det, c)] = res.ranked
    return out


def _safe_run(args):
    doc, config, stats, detectors, contaminations = args
    try:
        return doc.id, _run_document(doc, config, stats, detectors, contaminations), None
    except (EmbeddingError, OutlierError) as exc:
        return doc.id, None, str(exc)


def _stats_corpus(corpus: Corpus, config: PipelineConfig) -> Corpus:
    if config.df_table:
        return corpus_stats_from_sidecar(config.df_table)
    if corpus.df_table:
        return corpus
    return build_df(corpus, 3, stopword_set(config))


def run_grid(
    corpus: Corpus,
    config: PipelineConfig,
    detectors: Sequence[str],
    contaminations: Sequence[float],
    dataset: str = "corpus",
    jobs: int = 1,
) -> list[AggregateResult]:
    """Macro F1 for every (detector, contamination, mode, k) cell.

    Documents without gold are skipped; documents whose pipeline fails
    (too short, divergence) are logged and excluded, and both counts are
    carried on every result row.
    """
    gold_docs = [d for d in corpus.documents if d.id in corpus.gold and corpus.gold[d.id].stemmed_forms]
    if not gold_docs:
        raise EvaluationError("corpus has no documents with gold keyphrases")
    n_no_gold = corpus.n_docs - len(gold_docs)
    stats = _stats_corpus(corpus, config)
    # the worker only needs df statistics, not every document text
    stats = Corpus(documents=(), df_table=stats.df_table, doc_count=stats.n_docs)
    tasks = [(d, config, stats, tuple(detectors), tuple(contaminations)) for d in gold_docs]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_safe_run, tasks, chunksize=4))
    else:
        outputs = [_safe_run(t) for t in tasks]

    per_cell: dict[tuple, list[EvalResult]] = {}
    failed = 0
    for doc_id, rankings, err in outputs:
        if err is not None:
            logger.warning("document %s failed: %s", doc_id, err)
            failed += 1
            continue
        gold = corpus.gold[doc_id]
        for (det, c), ranked in rankings.items():
            for mode in MODES:
                for k in config.k:
                    per_cell.setdefault((det, c, mode, k), []).append(EVALUATORS[mode](ranked, gold, k))

    keys = [("tfidf", None)] if config.baseline == "tfidf" else [(d, c) for d in detectors for c in contaminations]
    rows = []
    for det, c in keys:
        for mode in MODES:
            for k in config.k:
                res = per_cell.get((det, c, mode, k), [])
                rows.append(AggregateResult(dataset, det, c, mode, k, macro_f1(res), len(res), failed, n_no_gold))
    return rows


def evaluate_corpus(corpus: Corpus, config: PipelineConfig, dataset: str = "corpus", jobs: int = 1) -> list[AggregateResult]:
    return run_grid(corpus, config, [config.detector], [config.contamination], dataset, jobs)


def run_sweep(corpus: Corpus, contaminations: Sequence[float], config: PipelineConfig,
              dataset: str = "corpus", jobs: int = 1) -> list[AggregateResult]:
    return run_grid(corpus, replace(config, baseline=None), [config.detector], contaminations, dataset, jobs)


def run_compare(corpus: Corpus, detectors: Sequence[str], config: PipelineConfig,
                dataset: str = "corpus", jobs: int = 1) -> list[AggregateResult]:
    return run_grid(corpus, replace(config, baseline=None), detectors, [config.contamination], dataset, jobs)


def lookup(rows: Iterable[AggregateResult], **match) -> AggregateResult:
    found = [r for r in rows if all(getattr(r, k) == v for k, v in match.items())]
    if len(found) != 1:
        raise KeyError(f"{len(found)} rows match {match}")
    return found[0]


def write_results_csv(rows: Iterable[AggregateResult], out) -> None:
    writer = csv.DictWriter(out, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r.row())


# ---------------------------------------------------------------- diagnostics


def pca_2d(points: np.ndarray) -> np.ndarray:
    """Project centered points on the top-2 eigenvectors of their sample covariance.

    Each component's sign is fixed so that its largest-magnitude loading is positive.
    """
    X = np.asarray(points, dtype=float)
    centered = X - X.mean(axis=0)
    cov = np.cov(centered, rowvar=False)
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    order = np.argsort(vals)[::-1][:2]
    comps = vecs[:, order]
    signs = np.sign(comps[np.abs(comps).argmax(axis=0), range(comps.shape[1])])
    comps = comps * np.where(signs == 0, 1, signs)
    proj = centered @ comps
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((len(proj), 2 - proj.shape[1]))])
    return proj


def distance_groups(model: EmbeddingModel, keyword: np.ndarray) -> dict[str, np.ndarray]:
    """Pairwise Euclidean distances split into keyword-keyword (kk),
    keyword-nonkeyword (kn) and nonkeyword-nonkeyword (nn) groups."""
    X = model.matrix
    i, j = np.triu_indices(len(X), k=1)
    d = np.linalg.norm(X[i] - X[j], axis=1)
    ki, kj = keyword[i], keyword[j]
    return {"kk": d[ki & kj], "kn": d[ki ^ kj], "nn": d[~ki & ~kj]}


def export_diagnostics(
    model: EmbeddingModel,
    report: OutlierReport,
    gold: GoldKeyphrases | None,
    out_dir: str | Path,
    doc_id: str,
) -> tuple[Path, Path]:
    """Write ``<doc_id>.distances.csv`` (boxplot-ready) and ``<doc_id>.pca.csv``.

    Words count as keywords when their stem occurs in a gold keyphrase; with
    no gold the outlier labels are used instead, and the header says so.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outlier = np.array([report.labels[w] == "outlier" for w in model.words])
    if gold is not None and gold.stemmed_forms:
        gold_words = set(itertools.chain.from_iterable(gold.stemmed_forms))
        keyword = np.array([w in gold_words for w in model.words])
        partition = "gold"
    else:
        keyword = outlier
        partition = "outlier_label"

    dist_path = out / f"{doc_id}.distances.csv"
    with open(dist_path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# partition={partition}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["group", "distance"])
        for group, values in distance_groups(model, keyword).items():
            w.writerows((group, repr(float(v))) for v in values)

    pca_path = out / f"{doc_id}.pca.csv"
    proj = pca_2d(model.matrix)
    with open(pca_path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# partition={partition}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["word", "pc1", "pc2", "keyword", "outlier"])
        for word, (x, y), k, o in zip(model.words, proj, keyword, outlier):
            w.writerow([word, repr(float(x)), repr(float(y)), int(k), int(o)])
    return dist_path, pca_path
