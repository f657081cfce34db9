"""Command-line interface.

    ovr extract DOC [--top N]
    ovr evaluate CORPUS_DIR [--layout flat] [--baseline tfidf]
    ovr sweep CORPUS_DIR [--contaminations 0.1,0.2,0.3,0.4,0.49]
    ovr compare CORPUS_DIR [--detectors mcd,iforest]
    ovr build-df CORPUS_DIR OUT.tsv
    ovr diagnostics CORPUS_DIR OUT_DIR [--docs ID,...]

Every pipeline flag can also be given as an ``OVR_<FLAG>`` environment
variable (``OVR_CONTAMINATION=0.3``); explicit flags win over the
environment, which wins over ``--config``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from ovr.corpus import CorpusError, build_df, corpus_stats_from_sidecar, load_corpus, write_df_table
from ovr.embed import DocumentTooShort, GloveDivergence
from ovr.evalharness import (
    EvaluationError,
    evaluate_corpus,
    export_diagnostics,
    run_compare,
    run_sweep,
    write_results_csv,
)
from ovr.outlier import DETECTORS, OutlierError
from ovr.pipeline import PipelineConfig, embed_document, extract_keyphrases, extract_with_contaminations, stopword_set

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

ENV_PREFIX = "OVR_"

# flag name -> (config attribute path, parser)
PIPELINE_FLAGS = {
    "dim": ("glove.dim", int),
    "iters": ("glove.iterations", int),
    "window": ("glove.window", int),
    "seed": ("seed", int),
    "contamination": ("contamination", float),
    "detector": ("detector", str),
    "top_unigrams": ("top_unigrams", int),
    "min_word_len": ("min_word_len", int),
    "k": ("k", lambda s: [int(x) for x in str(s).split(",") if x]),
    "stopwords": ("stopwords", str),
    "df_table": ("df_table", str),
    "baseline": ("baseline", str),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--dim", help="embedding dimensions (default 5)")
    g.add_argument("--iters", help="GloVe epochs (default 100)")
    g.add_argument("--window", help="co-occurrence window (default 10)")
    g.add_argument("--seed", help="random seed (default 0)")
    g.add_argument("--contamination", help="outlier proportion (default 0.49)")
    g.add_argument("--detector", choices=DETECTORS)
    g.add_argument("--top-unigrams", dest="top_unigrams", help="candidate unigram cap (default 100)")
    g.add_argument("--min-word-len", dest="min_word_len", help="minimum stem length (default 3)")
    g.add_argument("--k", help="comma-separated cutoffs (default 10,20)")
    g.add_argument("--stopwords", help="stopword file, one word per line")
    g.add_argument("--df-table", dest="df_table", help="document-frequency sidecar TSV")
    g.add_argument("--baseline", choices=["tfidf"], help="skip outlier filtering")


def _set_path(cfg: PipelineConfig, path: str, value) -> PipelineConfig:
    if path.startswith("glove."):
        return replace(cfg, glove=replace(cfg.glove, **{path.split(".", 1)[1]: value}))
    return replace(cfg, **{path: value})


def config_from_args(args: argparse.Namespace, environ=os.environ) -> PipelineConfig:
    try:
        cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"--config: {exc}") from None
    for flag, (path, parse) in PIPELINE_FLAGS.items():
        cli_value = getattr(args, flag, None)
        raw = cli_value if cli_value is not None else environ.get(ENV_PREFIX + flag.upper())
        if raw is None:
            continue
        try:
            cfg = _set_path(cfg, path, parse(raw))
        except ValueError as exc:
            raise UsageError(f"--{flag.replace('_', '-')}: {exc}") from None
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ovr", description="Keyphrase extraction by outlying word vectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract keyphrases from one document (JSON lines)")
    p.add_argument("doc")
    p.add_argument("--top", type=int, default=None, help="print only the first N phrases")
    _add_pipeline_flags(p)

    for name, helptext in [
        ("evaluate", "macro F1@k of a corpus with gold keyphrases (CSV)"),
        ("sweep", "macro F1@k across contamination levels (CSV)"),
        ("compare", "macro F1@k across outlier detectors (CSV)"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("corpus")
        p.add_argument("--layout", default=os.environ.get(ENV_PREFIX + "LAYOUT", "flat"),
                       choices=["flat", "krapivin", "semeval"])
        p.add_argument("--dataset", default=None, help="dataset name in the CSV (default: directory name)")
        p.add_argument("--jobs", type=int, default=int(os.environ.get(ENV_PREFIX + "JOBS", 1)))
        p.add_argument("--output", "-o", default=None, help="CSV path (default stdout)")
        if name == "sweep":
            p.add_argument("--contaminations", default="0.1,0.2,0.3,0.4,0.49")
        if name == "compare":
            p.add_argument("--detectors", default=",".join(DETECTORS))
        _add_pipeline_flags(p)

    p = sub.add_parser("build-df", help="write the document-frequency sidecar of a corpus")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--layout", default="flat", choices=["flat", "krapivin", "semeval"])
    p.add_argument("--stopwords")

    p = sub.add_parser("diagnostics", help="export distance and PCA CSVs per document")
    p.add_argument("corpus")
    p.add_argument("output_dir")
    p.add_argument("--layout", default="flat", choices=["flat", "krapivin", "semeval"])
    p.add_argument("--docs", default=None, help="comma-separated document ids (default all)")
    _add_pipeline_flags(p)
    return parser


def _emit_csv(rows, output):
    if output:
        with open(output, "w", newline="", encoding="utf-8") as f:
            write_results_csv(rows, f)
    else:
        write_results_csv(rows, sys.stdout)


def _cmd_extract(args, cfg):
    try:
        text = Path(args.doc).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read {args.doc}: {exc}") from None
    corpus = corpus_stats_from_sidecar(cfg.df_table) if cfg.df_table else None
    ranked = extract_keyphrases(text, cfg, corpus).ranked
    items = ranked.items if args.top is None else ranked.items[: args.top]
    for rank, kp in enumerate(items, 1):
        sys.stdout.write(json.dumps(kp.as_record(rank)) + "\n")


def _load(args):
    corpus = load_corpus(args.corpus, args.layout)
    for err in corpus.errors:
        logging.getLogger("ovr").warning("load error: %s", err)
    return corpus, getattr(args, "dataset", None) or Path(args.corpus).resolve().name


def _cmd_batch(args, cfg):
    corpus, dataset = _load(args)
    if args.command == "evaluate":
        rows = evaluate_corpus(corpus, cfg, dataset, args.jobs)
    elif args.command == "sweep":
        try:
            levels = [float(x) for x in args.contaminations.split(",") if x]
        except ValueError:
            raise UsageError(f"bad --contaminations {args.contaminations!r}") from None
        rows = run_sweep(corpus, levels, cfg, dataset, args.jobs)
    else:
        detectors = [d for d in args.detectors.split(",") if d]
        if any(d not in DETECTORS for d in detectors):
            raise UsageError(f"--detectors must be drawn from {DETECTORS}")
        rows = run_compare(corpus, detectors, cfg, dataset, args.jobs)
    _emit_csv(rows, args.output)
    if rows and (rows[0].n_failed or rows[0].n_no_gold):
        print(f"# skipped: {rows[0].n_failed} failed, {rows[0].n_no_gold} without gold", file=sys.stderr)


def _cmd_build_df(args):
    corpus = load_corpus(args.corpus, args.layout)
    stop = None if args.stopwords is None else stopword_set(PipelineConfig(stopwords=args.stopwords))
    write_df_table(build_df(corpus, 3, stop), args.output)


def _cmd_diagnostics(args, cfg):
    corpus, _ = _load(args)
    wanted = set(args.docs.split(",")) if args.docs else None
    for doc in corpus.documents:
        if wanted is not None and doc.id not in wanted:
            continue
        try:
            emb = embed_document(doc.text, cfg)
            res = extract_with_contaminations(emb, cfg, None, [cfg.contamination], cfg.detector)[0]
        except (DocumentTooShort, OutlierError) as exc:
            print(f"skipping {doc.id}: {exc}", file=sys.stderr)
            continue
        export_diagnostics(emb.model, res.report, corpus.gold.get(doc.id), args.output_dir, doc.id)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "build-df":
            _cmd_build_df(args)
            return EXIT_OK
        cfg = config_from_args(args)
        if args.command == "extract":
            _cmd_extract(args, cfg)
        elif args.command == "diagnostics":
            _cmd_diagnostics(args, cfg)
        else:
            _cmd_batch(args, cfg)
    except UsageError as exc:
        print(f"ovr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DocumentTooShort, OutlierError, CorpusError, EvaluationError) as exc:
        print(f"ovr: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GloveDivergence as exc:
        print(f"ovr: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
