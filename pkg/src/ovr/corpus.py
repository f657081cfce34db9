"""Document collections, gold keyphrases and document-frequency tables."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from ovr.preprocess import normalize_phrase, tokenize_filter

logger = logging.getLogger(__name__)

LAYOUTS = ("flat", "krapivin", "semeval")

NGram = tuple[str, ...]


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str


@dataclass(frozen=True)
class GoldKeyphrases:
    doc_id: str
    phrases: tuple[str, ...]
    stemmed_forms: tuple[NGram, ...]

    @classmethod
    def from_phrases(cls, doc_id: str, phrases: Iterable[str]) -> "GoldKeyphrases":
        phrases = tuple(p.strip() for p in phrases if p.strip())
        forms: dict[NGram, None] = {}
        for p in phrases:
            t = normalize_phrase(p)
            if t:
                forms[t] = None
        return cls(doc_id, phrases, tuple(forms))


@dataclass(frozen=True)
class Corpus:
    documents: tuple[RawDocument, ...]
    gold: dict[str, GoldKeyphrases] = field(default_factory=dict)
    df_table: dict[NGram, int] = field(default_factory=dict)
    # per-file load failures, reported but not fatal
    errors: tuple[str, ...] = ()
    # set when statistics come from a sidecar instead of loaded documents
    doc_count: int | None = None

    @property
    def n_docs(self) -> int:
        return len(self.documents) if self.doc_count is None else self.doc_count

    def df(self, gram: NGram) -> int:
        return self.df_table.get(gram, 0)


def document_ngrams(text: str, max_n: int, stopwords=None) -> set[NGram]:
    stems = tokenize_filter(text, stopwords).stems
    grams: set[NGram] = set()
    for n in range(1, max_n + 1):
        for i in range(len(stems) - n + 1):
            grams.add(tuple(stems[i:i + n]))
    return grams


def build_df(corpus: Corpus, max_n: int = 3, stopwords=None) -> Corpus:
    """Return a copy of `corpus` whose df_table counts, for every stemmed
    n-gram (n <= max_n) of the filtered token sequences, the number of
    documents containing it."""
    if max_n not in (1, 2, 3):
        raise ValueError(f"max_n must be 1, 2 or 3, got {max_n}")
    counts: Counter[NGram] = Counter()
    for doc in corpus.documents:
        counts.update(document_ngrams(doc.text, max_n, stopwords))
    return replace(corpus, df_table=dict(counts))


def write_df_table(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#ndocs={corpus.n_docs}\n")
        for gram, count in sorted(corpus.df_table.items()):
            f.write(f"{' '.join(gram)}\t{count}\n")


def read_df_table(path: str | Path) -> tuple[int, dict[NGram, int]]:
    """Parse a df sidecar file into (n_docs, table)."""
    n_docs = None
    table: dict[NGram, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#ndocs=(\d+)", line)
                if m:
                    n_docs = int(m.group(1))
                continue
            try:
                gram, count = line.split("\t")
                table[tuple(gram.split(" "))] = int(count)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: malformed df line {line!r}") from None
    if n_docs is None:
        raise CorpusError(f"{path}: missing '#ndocs=' header")
    return n_docs, table


def corpus_stats_from_sidecar(path: str | Path) -> Corpus:
    """A document-less Corpus carrying only df statistics, for single-document extraction."""
    n_docs, table = read_df_table(path)
    return Corpus(documents=(), df_table=table, doc_count=n_docs)


def _read_text(path: Path, errors: list[str]) -> str | None:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        msg = f"{path}: {exc}"
        logger.warning("skipping unreadable file %s", msg)
        errors.append(msg)
        return None


def _read_key_lines(text: str) -> list[str]:
    return [line.strip() for line in text.splitlines() if line.strip()]


_KRAPIVIN_MARK = re.compile(r"^--([A-Z])\s*$")


def _krapivin_body(text: str) -> str:
    # sections are introduced by marker lines: --T title, --A abstract, --B body, --R references
    keep, parts = True, []
    for line in text.splitlines():
        m = _KRAPIVIN_MARK.match(line.strip())
        if m:
            keep = m.group(1) != "R"
            continue
        if keep:
            parts.append(line)
    return "\n".join(parts)


def _parse_semeval_keys(text: str) -> dict[str, list[str]]:
    # "C-41 : kw one,kw two+alternative form,..."
    out: dict[str, list[str]] = {}
    for line in text.splitlines():
        if ":" not in line:
            continue
        doc_id, rest = line.split(":", 1)
        phrases = [p for chunk in rest.split(",") for p in chunk.split("+")]
        out.setdefault(doc_id.strip(), []).extend(p.strip() for p in phrases if p.strip())
    return out


def load_corpus(directory: str | Path, layout: str = "flat") -> Corpus:
    """Load every document (and gold keyphrases where present) of a directory.

    Layouts: ``flat`` is ``<id>.txt`` plus optional ``<id>.key``; ``krapivin``
    is the same naming with ``--T/--A/--B/--R`` section markers inside the text
    (references dropped); ``semeval`` accepts ``<id>.txt.final`` or ``<id>.txt``
    documents with gold in per-document ``.key`` files or combined
    ``*.final`` key files of ``<id> : p1,p2+alt`` lines.
    """
    root = Path(directory)
    if layout not in LAYOUTS:
        raise CorpusError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")

    errors: list[str] = []
    docs: dict[str, RawDocument] = {}
    keys: dict[str, list[str]] = {}

    for path in sorted(root.iterdir()):
        if not path.is_file():
            continue
        name = path.name
        if name.endswith(".txt") or (layout == "semeval" and name.endswith(".txt.final")):
            doc_id = name[: -len(".txt.final")] if name.endswith(".final") else name[: -len(".txt")]
            if doc_id in docs:
                raise CorpusError(f"duplicate document id {doc_id!r} in {root}")
            text = _read_text(path, errors)
            if text is None:
                continue
            if layout == "krapivin":
                text = _krapivin_body(text)
            docs[doc_id] = RawDocument(doc_id, text)
        elif name.endswith(".key"):
            text = _read_text(path, errors)
            if text is not None:
                keys[name[: -len(".key")]] = _read_key_lines(text)
        elif layout == "semeval" and name.endswith(".final"):
            text = _read_text(path, errors)
            if text is not None:
                for doc_id, phrases in _parse_semeval_keys(text).items():
                    keys.setdefault(doc_id, []).extend(phrases)

    gold = {
        doc_id: GoldKeyphrases.from_phrases(doc_id, phrases)
        for doc_id, phrases in keys.items()
        if doc_id in docs
    }
    ordered = tuple(docs[k] for k in sorted(docs))
    return Corpus(documents=ordered, gold=gold, errors=tuple(errors))
