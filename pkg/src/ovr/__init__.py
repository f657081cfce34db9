"""Unsupervised keyphrase extraction by treating keyphrase word vectors as
outliers of a document's dominant (non-keyphrase) word-vector distribution."""

from ovr.corpus import Corpus, GoldKeyphrases, RawDocument, build_df, load_corpus
from ovr.embed import GloveConfig, build_cooccurrence, train_glove
from ovr.outlier import detect_outliers, fast_mcd, fit_isolation_forest, iforest_score
from ovr.pipeline import PipelineConfig, extract_keyphrases
from ovr.preprocess import stem, tokenize_filter
from ovr.rank import score_candidates, top_k

__version__ = "0.1.0"
