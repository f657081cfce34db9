import random

import pytest

FILLER = ("results method approach paper study system analysis present propose based show "
          "problem work model performance general experiments evaluation provide important").split()
TOPICS = [
    ["bayesian network", "belief propagation", "conditional independence"],
    ["frequent itemset", "association rule", "support threshold"],
    ["gradient descent", "learning rate", "convergence analysis"],
    ["graph partitioning", "spectral clustering", "eigenvalue decomposition"],
    ["query expansion", "relevance feedback", "inverted index"],
]


def fixture_documents(n_docs=10, seed=7):
    """Deterministic synthetic abstracts: filler text with topic keyphrases sprinkled in."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        topic = TOPICS[i % len(TOPICS)]
        words = []
        for _ in range(40):
            if rng.random() < 0.35:
                words.extend(rng.choice(topic).split())
            else:
                words.append(rng.choice(FILLER))
        docs.append((f"doc{i:02d}", " ".join(words) + ".", topic))
    return docs


@pytest.fixture
def fixture_corpus_dir(tmp_path):
    for doc_id, text, gold in fixture_documents():
        (tmp_path / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        (tmp_path / f"{doc_id}.key").write_text("\n".join(gold) + "\n", encoding="utf-8")
    return tmp_path


@pytest.fixture
def fast_config():
    from ovr.embed import GloveConfig
    from ovr.pipeline import PipelineConfig

    return PipelineConfig(glove=GloveConfig(iterations=20))
