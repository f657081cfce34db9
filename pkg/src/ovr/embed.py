"""Single-document GloVe: co-occurrence counting and AdaGrad training."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from ovr.preprocess import TokenSequence


class EmbeddingError(Exception):
    pass


class DocumentTooShort(EmbeddingError):
    pass


class GloveDivergence(EmbeddingError):
    def __init__(self, epoch: int, cost: float):
        super().__init__(f"GloVe training diverged at epoch {epoch} (cost={cost})")
        self.epoch = epoch
        self.cost = cost


@dataclass
class GloveConfig:
    dim: int = 5
    iterations: int = 100
    x_max: float = 100.0
    alpha: float = 0.75
    window: int = 10
    learning_rate: float = 0.05
    seed: int = 0
    # "sum" returns word + context vector, "word" only the word vector
    output: str = "sum"
    parallel: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.x_max <= 0:
            raise ValueError("x_max must be > 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.output not in ("sum", "word"):
            raise ValueError("output must be 'sum' or 'word'")


@dataclass
class CooccurrenceMatrix:
    """Sparse symmetric co-occurrence counts in coordinate form."""

    vocab: list[str]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @property
    def vocab_index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.vocab)}

    @property
    def entries(self) -> dict[tuple[str, str], float]:
        return {
            (self.vocab[i], self.vocab[j]): float(x)
            for i, j, x in zip(self.rows, self.cols, self.values)
        }

    @property
    def nnz(self) -> int:
        return len(self.values)

    def dense(self) -> np.ndarray:
        m = np.zeros((len(self.vocab), len(self.vocab)))
        m[self.rows, self.cols] = self.values
        return m


@dataclass
class EmbeddingModel:
    words: list[str]
    matrix: np.ndarray
    config: GloveConfig
    final_cost: float
    cost_history: list[float] = field(default_factory=list)

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return dict(zip(self.words, self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for w, v in zip(self.words, self.matrix):
                f.write(w + "\t" + "\t".join(repr(float(x)) for x in v) + "\n")


def build_cooccurrence(seq: TokenSequence, window: int = 10) -> CooccurrenceMatrix:
    """Symmetric 1/d-weighted co-occurrence counts over the filtered sequence.

    Every pair of tokens at distance 1 <= d <= window adds 1/d to both X[i, j]
    and X[j, i]; a repeated stem therefore adds 2/d to its diagonal cell.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    vocab = list(seq.vocab)  # insertion order = first occurrence
    index = {w: i for i, w in enumerate(vocab)}
    ids = [index[t.stem] for t in seq.tokens]
    counts: dict[tuple[int, int], float] = {}
    for k, wk in enumerate(ids):
        for d in range(1, min(window, k) + 1):
            wj = ids[k - d]
            inc = 1.0 / d
            counts[(wj, wk)] = counts.get((wj, wk), 0.0) + inc
            counts[(wk, wj)] = counts.get((wk, wj), 0.0) + inc
    if not counts:
        empty = np.zeros(0, dtype=np.int64)
        return CooccurrenceMatrix(vocab, empty, empty.copy(), np.zeros(0))
    keys = sorted(counts)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    values = np.array([counts[k] for k in keys], dtype=np.float64)
    return CooccurrenceMatrix(vocab, rows, cols, values)


def weighting(x, x_max: float = 100.0, alpha: float = 0.75):
    """GloVe weighting f(x) = (x / x_max) ** alpha, capped at 1."""
    x = np.asarray(x, dtype=float)
    return np.where(x < x_max, (x / x_max) ** alpha, 1.0)


def glove_cost(W, C, bw, bc, rows, cols, values, x_max=100.0, alpha=0.75) -> float:
    """J = sum f(X_ij) (w_i . c_j + b_i + b~_j - log X_ij)^2 over stored entries."""
    diff = np.einsum("ij,ij->i", W[rows], C[cols]) + bw[rows] + bc[cols] - np.log(values)
    return float(np.sum(weighting(values, x_max, alpha) * diff**2))


def glove_gradient(W, C, bw, bc, rows, cols, values, x_max=100.0, alpha=0.75):
    """Analytic gradient of `glove_cost` as (dW, dC, dbw, dbc)."""
    diff = np.einsum("ij,ij->i", W[rows], C[cols]) + bw[rows] + bc[cols] - np.log(values)
    g = 2.0 * weighting(values, x_max, alpha) * diff
    dW = np.zeros_like(W)
    dC = np.zeros_like(C)
    dbw = np.zeros_like(bw)
    dbc = np.zeros_like(bc)
    np.add.at(dW, rows, g[:, None] * C[cols])
    np.add.at(dC, cols, g[:, None] * W[rows])
    np.add.at(dbw, rows, g)
    np.add.at(dbc, cols, g)
    return dW, dC, dbw, dbc


@numba.njit(cache=True)
def _entry_update(i, j, logx, fx, W, C, bw, bc, gW, gC, gbw, gbc, lr):
    dim = W.shape[1]
    diff = bw[i] + bc[j] - logx
    for b in range(dim):
        diff += W[i, b] * C[j, b]
    # half-gradient of the weighted squared error, scaled by the learning rate
    fdiff = lr * fx * diff
    for b in range(dim):
        t1 = fdiff * C[j, b]
        t2 = fdiff * W[i, b]
        W[i, b] -= t1 / np.sqrt(gW[i, b])
        C[j, b] -= t2 / np.sqrt(gC[j, b])
        gW[i, b] += t1 * t1
        gC[j, b] += t2 * t2
    bw[i] -= fdiff / np.sqrt(gbw[i])
    bc[j] -= fdiff / np.sqrt(gbc[j])
    gbw[i] += fdiff * fdiff
    gbc[j] += fdiff * fdiff
    return fx * diff * diff


@numba.njit(cache=True)
def _epoch(order, rows, cols, logx, fx, W, C, bw, bc, gW, gC, gbw, gbc, lr):
    cost = 0.0
    for k in range(order.shape[0]):
        e = order[k]
        cost += _entry_update(rows[e], cols[e], logx[e], fx[e],
                              W, C, bw, bc, gW, gC, gbw, gbc, lr)
    return cost


@numba.njit(cache=True, parallel=True)
def _epoch_parallel(order, rows, cols, logx, fx, W, C, bw, bc, gW, gC, gbw, gbc, lr, n_chunks):
    # lock-free: chunks update shared parameters without synchronization
    n = order.shape[0]
    partial = np.zeros(n_chunks)
    for c in numba.prange(n_chunks):
        lo = c * n // n_chunks
        hi = (c + 1) * n // n_chunks
        s = 0.0
        for k in range(lo, hi):
            e = order[k]
            s += _entry_update(rows[e], cols[e], logx[e], fx[e],
                               W, C, bw, bc, gW, gC, gbw, gbc, lr)
        partial[c] = s
    return partial.sum()


def init_parameters(n_words: int, dim: int, rng: np.random.Generator):
    """Uniform init in (-0.5/dim, 0.5/dim) for vectors and biases."""
    W = (rng.random((n_words, dim)) - 0.5) / dim
    C = (rng.random((n_words, dim)) - 0.5) / dim
    bw = (rng.random(n_words) - 0.5) / dim
    bc = (rng.random(n_words) - 0.5) / dim
    return W, C, bw, bc


def train_glove(X: CooccurrenceMatrix, cfg: GloveConfig | None = None) -> EmbeddingModel:
    """Fit GloVe vectors on one co-occurrence matrix with per-entry AdaGrad.

    Entries are visited in a fresh seeded permutation every epoch. The
    returned vector of each word is word + context vector (``cfg.output ==
    "sum"``). ``final_cost`` is the mean weighted squared error accumulated
    over the last epoch. Sequential mode is bitwise reproducible for a seed.
    """
    cfg = cfg or GloveConfig()
    if X.nnz == 0:
        raise DocumentTooShort("document too short: no co-occurring word pairs")
    rng = np.random.default_rng(cfg.seed)
    V = len(X.vocab)
    W, C, bw, bc = init_parameters(V, cfg.dim, rng)
    gW = np.ones_like(W)
    gC = np.ones_like(C)
    gbw = np.ones(V)
    gbc = np.ones(V)
    logx = np.log(X.values)
    fx = weighting(X.values, cfg.x_max, cfg.alpha)
    n_chunks = max(1, numba.get_num_threads()) if cfg.parallel else 1

    history = []
    for epoch in range(cfg.iterations):
        order = rng.permutation(X.nnz)
        args = (order, X.rows, X.cols, logx, fx, W, C, bw, bc, gW, gC, gbw, gbc, cfg.learning_rate)
        if cfg.parallel:
            total = _epoch_parallel(*args, n_chunks)
        else:
            total = _epoch(*args)
        cost = total / X.nnz
        if not np.isfinite(cost):
            raise GloveDivergence(epoch, cost)
        history.append(cost)

    matrix = W + C if cfg.output == "sum" else W.copy()
    return EmbeddingModel(list(X.vocab), matrix, cfg, history[-1], history)
