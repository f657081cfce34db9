from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovr.embed import (
    CooccurrenceMatrix,
    DocumentTooShort,
    GloveConfig,
    _entry_update,
    build_cooccurrence,
    glove_cost,
    glove_gradient,
    init_parameters,
    train_glove,
    weighting,
)
from ovr.preprocess import Token, TokenSequence, VocabEntry


def seq_of(stems):
    tokens = [Token(s, s, i, i) for i, s in enumerate(stems)]
    vocab = {}
    for t in tokens:
        e = vocab.setdefault(t.stem, VocabEntry(0, t.position))
        e.count += 1
        e.surfaces[t.surface] = e.surfaces.get(t.surface, 0) + 1
    return TokenSequence(tokens, vocab)


def brute_cooc(stems, window):
    # enumerate every unordered token pair independently of the implementation
    X = defaultdict(float)
    for a in range(len(stems)):
        for b in range(a + 1, len(stems)):
            d = b - a
            if d <= window:
                X[(stems[a], stems[b])] += 1.0 / d
                X[(stems[b], stems[a])] += 1.0 / d
    return dict(X)


def test_cooc_single_pair():
    X = build_cooccurrence(seq_of(["a", "b"]), 10)
    assert X.entries == {("a", "b"): 1.0, ("b", "a"): 1.0}


def test_cooc_repeat():
    X = build_cooccurrence(seq_of(["a", "b", "a"]), 10).entries
    assert X[("a", "b")] == X[("b", "a")] == 2.0
    assert X[("a", "a")] == 1.0


def test_cooc_beyond_window():
    X = build_cooccurrence(seq_of(["a", "x", "y", "c"]), 2).entries
    assert ("a", "c") not in X


def test_cooc_short_sequence_empty():
    assert build_cooccurrence(seq_of(["a"]), 10).nnz == 0
    assert build_cooccurrence(seq_of([]), 10).nnz == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), max_size=30), st.integers(1, 6))
def test_cooc_matches_brute_force(stems, window):
    X = build_cooccurrence(seq_of(stems), window)
    got = X.entries
    want = brute_cooc(stems, window)
    assert got.keys() == want.keys()
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-12)
    dense = X.dense()
    assert np.allclose(dense, dense.T)
    assert (X.values > 0).all()
    assert X.vocab_index == {w: i for i, w in enumerate(dict.fromkeys(stems))}


def test_weighting():
    assert weighting(50, 100, 0.75) == pytest.approx(0.5**0.75)
    assert float(weighting(50, 100, 0.75)) == pytest.approx(0.5946, abs=1e-4)
    assert weighting(100, 100, 0.75) == 1.0
    assert weighting(1e6, 100, 0.75) == 1.0
    xs = np.linspace(0, 300, 1000)
    f = weighting(xs)
    assert (np.diff(f) >= 0).all() and f.max() == 1.0


def random_problem(seed, V=6, dim=3):
    rng = np.random.default_rng(seed)
    dense = np.triu(rng.uniform(0.2, 150, (V, V)) * (rng.random((V, V)) < 0.7))
    dense = dense + np.triu(dense, 1).T
    rows, cols = np.nonzero(dense)
    W, C, bw, bc = (rng.normal(scale=0.5, size=s) for s in [(V, dim), (V, dim), V, V])
    return W, C, bw, bc, rows, cols, dense[rows, cols]


def finite_difference(fn, arrays, h=1e-5):
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            up = fn()
            a[idx] = old - h
            down = fn()
            a[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    W, C, bw, bc, rows, cols, vals = random_problem(seed)
    analytic = glove_gradient(W, C, bw, bc, rows, cols, vals)
    numeric = finite_difference(lambda: glove_cost(W, C, bw, bc, rows, cols, vals), [W, C, bw, bc])
    for a, n in zip(analytic, numeric):
        rel = np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        assert rel < 1e-4


def test_single_step_matches_half_gradient():
    # first AdaGrad step (accumulators = 1) is a plain step along half the gradient
    W, C, bw, bc, rows, cols, vals = random_problem(7, V=2, dim=3)
    i, j, x = rows[0], cols[0], vals[0]
    r, c, v = np.array([i]), np.array([j]), np.array([x])
    dW, dC, dbw, dbc = glove_gradient(W, C, bw, bc, r, c, v)
    W2, C2, bw2, bc2 = W.copy(), C.copy(), bw.copy(), bc.copy()
    ones = [np.ones_like(a) for a in (W, C, bw, bc)]
    lr = 0.05
    _entry_update(i, j, np.log(x), float(weighting(x)), W2, C2, bw2, bc2, *ones, lr)
    # word and context rows update from the same pre-step values
    assert np.allclose(W2[i], W[i] - lr * 0.5 * dW[i])
    assert np.allclose(bw2[i], bw[i] - lr * 0.5 * dbw[i])
    assert np.allclose(bc2[j], bc[j] - lr * 0.5 * dbc[j])
    if i != j:
        assert np.allclose(C2[j], C[j] - lr * 0.5 * dC[j])


def test_zero_residual_fixed_point():
    x_max = 100.0
    W = np.array([[1.0, 0.0], [0.0, 0.0]])
    C = np.array([[0.0, 0.0], [np.log(x_max), 0.0]])
    bw = np.zeros(2)
    bc = np.zeros(2)
    rows, cols, vals = np.array([0]), np.array([1]), np.array([x_max])
    assert glove_cost(W, C, bw, bc, rows, cols, vals, x_max) == pytest.approx(0.0, abs=1e-24)
    for g in glove_gradient(W, C, bw, bc, rows, cols, vals, x_max):
        assert np.all(g == 0)


def small_matrix():
    stems = ("bayesian network model inference graph bayesian network structure learning "
             "data model graph inference network learning bayesian data structure").split()
    return build_cooccurrence(seq_of(stems * 3), 10)


def test_train_output_shape_and_finite():
    X = small_matrix()
    m = train_glove(X, GloveConfig(dim=5, iterations=20, seed=1))
    assert m.words == X.vocab
    assert m.matrix.shape == (len(X.vocab), 5)
    assert np.isfinite(m.matrix).all()
    assert all(len(v) == 5 for v in m.vectors.values())
    assert len(m.cost_history) == 20 and m.final_cost == m.cost_history[-1]


def test_train_deterministic():
    X = small_matrix()
    a = train_glove(X, GloveConfig(iterations=30, seed=3))
    b = train_glove(X, GloveConfig(iterations=30, seed=3))
    assert np.array_equal(a.matrix, b.matrix)
    assert a.final_cost == b.final_cost
    c = train_glove(X, GloveConfig(iterations=30, seed=4))
    assert not np.array_equal(a.matrix, c.matrix)


def test_cost_decreases_over_training():
    X = small_matrix()
    violations = 0
    for seed in range(10):
        one = train_glove(X, GloveConfig(iterations=1, seed=seed)).final_cost
        hundred = train_glove(X, GloveConfig(iterations=100, seed=seed)).final_cost
        violations += hundred > one
    assert violations <= 1


def test_word_only_output():
    X = small_matrix()
    s = train_glove(X, GloveConfig(iterations=5, seed=0))
    w = train_glove(X, GloveConfig(iterations=5, seed=0, output="word"))
    assert not np.array_equal(s.matrix, w.matrix)
    assert w.matrix.shape == s.matrix.shape


def test_parallel_mode_runs():
    X = small_matrix()
    m = train_glove(X, GloveConfig(iterations=10, seed=0, parallel=True))
    assert np.isfinite(m.matrix).all()


def test_empty_matrix_is_too_short():
    X = build_cooccurrence(seq_of(["solo"]), 10)
    with pytest.raises(DocumentTooShort, match="too short"):
        train_glove(X)


def test_init_range():
    W, C, bw, bc = init_parameters(50, 5, np.random.default_rng(0))
    for a in (W, C, bw, bc):
        assert np.abs(a).max() < 0.5 / 5


@pytest.mark.parametrize("kw", [dict(dim=0), dict(iterations=0), dict(x_max=0), dict(alpha=0),
                                dict(alpha=1.5), dict(window=0), dict(output="both")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GloveConfig(**kw)


def test_model_dump(tmp_path):
    m = train_glove(small_matrix(), GloveConfig(iterations=2))
    p = tmp_path / "model.tsv"
    m.dump(p)
    lines = p.read_text().splitlines()
    assert len(lines) == len(m.words)
    parts = lines[0].split("\t")
    assert parts[0] == m.words[0] and len(parts) == 1 + m.dim
    assert np.allclose([float(x) for x in parts[1:]], m.matrix[0])


def test_coo_matrix_dense_roundtrip():
    X = CooccurrenceMatrix(["a", "b"], np.array([0, 1]), np.array([1, 0]), np.array([2.0, 2.0]))
    assert X.dense().tolist() == [[0, 2.0], [2.0, 0]]
