"""Robust outlier detection on word vectors.

FastMCD (random elemental starts + concentration steps), the elliptical
envelope thresholding built on it, and an Isolation Forest used as an
alternative detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from ovr.embed import EmbeddingModel

DETECTORS = ("mcd", "iforest")
RIDGE_EPS = 1e-8


class OutlierError(Exception):
    pass


@dataclass
class McdFit:
    location: np.ndarray
    scatter: np.ndarray
    support: np.ndarray
    h: int
    determinant: float
    raw_location: np.ndarray
    raw_scatter: np.ndarray
    degenerate: bool = False
    n_csteps: int = 0

    def mahalanobis(self, points) -> np.ndarray:
        """Squared Mahalanobis distances under the reweighted fit."""
        return sq_mahalanobis(np.asarray(points, dtype=float), self.location, self.scatter)


def _regularize(cov: np.ndarray) -> np.ndarray:
    p = cov.shape[0]
    ridge = RIDGE_EPS * np.trace(cov) / p
    return cov + (ridge if ridge > 0 else RIDGE_EPS) * np.eye(p)


def _is_singular(cov: np.ndarray) -> bool:
    eig = np.linalg.eigvalsh(cov)
    return eig[-1] <= 0 or eig[0] <= eig[-1] * 1e-12


def sq_mahalanobis(points: np.ndarray, location: np.ndarray, cov: np.ndarray) -> np.ndarray:
    if _is_singular(cov):
        cov = _regularize(cov)
    centered = points - location
    sol = np.linalg.solve(cov, centered.T).T
    return np.einsum("ij,ij->i", centered, sol)


def _mean_cov(X: np.ndarray, idx: np.ndarray):
    sub = X[idx]
    loc = sub.mean(axis=0)
    centered = sub - loc
    return loc, centered.T @ centered / len(idx)


def c_step(X: np.ndarray, subset: np.ndarray, h: int):
    """One concentration step: refit on `subset`, keep the h closest points.

    Returns (new_subset, det of the covariance of the *input* subset,
    singular flag). The determinant of the returned subset's covariance is
    never larger than the input one's.
    """
    loc, cov = _mean_cov(X, subset)
    det = float(np.linalg.det(cov))
    if _is_singular(cov):
        return subset, det, True
    d = sq_mahalanobis(X, loc, cov)
    return np.sort(np.argsort(d, kind="stable")[:h]), det, False


def _subset_det(X, subset) -> float:
    return float(np.linalg.det(_mean_cov(X, subset)[1]))


def _initial_subset(X: np.ndarray, h: int, rng: np.random.Generator) -> np.ndarray:
    # random (p+1)-subset, grown while its covariance is singular
    n, p = X.shape
    perm = rng.permutation(n)
    k = p + 1
    while True:
        idx = perm[:k]
        loc, cov = _mean_cov(X, idx)
        if not _is_singular(cov) or k >= h:
            break
        k += 1
    d = sq_mahalanobis(X, loc, cov)
    return np.sort(np.argsort(d, kind="stable")[:h])


def fast_mcd(
    points,
    h: int | None = None,
    seed: int = 0,
    n_trials: int = 500,
    n_best: int = 10,
    n_initial_csteps: int = 2,
    max_csteps: int = 100,
) -> McdFit:
    """Minimum Covariance Determinant estimate via FastMCD.

    Parameters
    ----------
    points : (n, p) array
    h : size of the subset whose covariance determinant is minimized;
        defaults to floor((n + p + 1) / 2).
    seed : seed for the random elemental starts.
    n_trials, n_best, n_initial_csteps : search schedule. Each start gets
        ``n_initial_csteps`` C-steps; the ``n_best`` lowest-determinant
        candidates are iterated to convergence.

    Returns
    -------
    McdFit with the consistency-corrected, reweighted location/scatter
    (points with corrected squared distance above the chi2(p) 0.975 quantile
    get weight 0). ``determinant`` is that of the raw h-subset covariance.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n, p = X.shape
    if n <= p:
        raise OutlierError(f"need more samples than dimensions (n={n}, p={p})")
    h_min = (n + p + 1) // 2
    if h is None:
        h = h_min
    if not h_min <= h <= n:
        raise ValueError(f"h must be in [{h_min}, {n}], got {h}")

    rng = np.random.default_rng(seed)
    candidates: dict[bytes, tuple[float, np.ndarray]] = {}
    degenerate = False
    for _ in range(n_trials):
        subset = _initial_subset(X, h, rng)
        for _ in range(n_initial_csteps):
            subset, _, singular = c_step(X, subset, h)
            if singular:
                degenerate = True
                break
        key = subset.tobytes()
        if key not in candidates:
            candidates[key] = (_subset_det(X, subset), subset)

    best_det, best_subset, total_steps = math.inf, None, 0
    ranked = sorted(candidates.values(), key=lambda c: c[0])[:n_best]
    for det, subset in ranked:
        for _ in range(max_csteps):
            new, _, singular = c_step(X, subset, h)
            total_steps += 1
            if singular:
                degenerate = True
                break
            new_det = _subset_det(X, new)
            if new_det >= det:
                break
            subset, det = new, new_det
        if det < best_det:
            best_det, best_subset = det, subset

    raw_loc, raw_cov = _mean_cov(X, best_subset)
    support = np.zeros(n, dtype=bool)
    support[best_subset] = True
    if _is_singular(raw_cov):
        degenerate = True

    d_raw = sq_mahalanobis(X, raw_loc, raw_cov)
    med = np.median(d_raw)
    if med > 0:
        raw_cov = raw_cov * (med / stats.chi2.ppf(0.5, p))
        d_raw = sq_mahalanobis(X, raw_loc, raw_cov)

    keep = d_raw < stats.chi2.ppf(0.975, p)
    if keep.sum() > p:
        loc, cov = _mean_cov(X, np.flatnonzero(keep))
    else:
        loc, cov = raw_loc, raw_cov
    if _is_singular(cov):
        degenerate = True
        cov = _regularize(cov)

    return McdFit(loc, cov, support, h, float(best_det), raw_loc, raw_cov, degenerate, total_steps)


# ---------------------------------------------------------------- isolation forest


def average_path_length(n) -> np.ndarray:
    """c(n) = 2 H(n-1) - 2 (n-1) / n, the mean unsuccessful-search path length
    of a binary search tree on n points; c(n) = 0 for n <= 1."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n > 1
    m = n[big]
    harmonic = special.digamma(m) + np.euler_gamma  # H(m - 1)
    out[big] = 2.0 * harmonic - 2.0 * (m - 1.0) / m
    return out


@dataclass
class IsolationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # training points reaching each node

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    def depth(self) -> int:
        def rec(node):
            if self.left[node] < 0:
                return 0
            return 1 + max(rec(self.left[node]), rec(self.right[node]))
        return rec(0)


def _grow_tree(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
    feature, threshold, left, right, size = [], [], [], [], []

    def new_node(n_points):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n_points)
        return len(size) - 1

    def grow(data, depth):
        node = new_node(len(data))
        if depth >= height_limit or len(data) <= 1:
            return node
        lo, hi = data.min(axis=0), data.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if len(splittable) == 0:
            return node
        q = splittable[rng.integers(len(splittable))]
        t = rng.uniform(lo[q], hi[q])
        mask = data[:, q] < t
        feature[node] = q
        threshold[node] = t
        left[node] = grow(data[mask], depth + 1)
        right[node] = grow(data[~mask], depth + 1)
        return node

    grow(X, 0)
    return IsolationTree(
        np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(size)
    )


@dataclass
class IsolationForestModel:
    trees: list[IsolationTree]
    n_trees: int
    subsample: int
    seed: int
    height_limit: int = field(init=False)

    def __post_init__(self):
        self.height_limit = max(1, math.ceil(math.log2(self.subsample)))

    def path_lengths(self, points) -> np.ndarray:
        """Mean path length E[h(x)] over trees, including the c(size) leaf adjustment."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(len(X))
        rows = np.arange(len(X))
        for tree in self.trees:
            node = np.zeros(len(X), dtype=int)
            depth = np.zeros(len(X))
            while True:
                active = tree.left[node] >= 0
                if not active.any():
                    break
                a = rows[active]
                nd = node[a]
                go_left = X[a, tree.feature[nd]] < tree.threshold[nd]
                node[a] = np.where(go_left, tree.left[nd], tree.right[nd])
                depth[a] += 1
            total += depth + average_path_length(tree.size[node])
        return total / len(self.trees)

    def score(self, points) -> np.ndarray:
        c = float(average_path_length(self.subsample))
        return 2.0 ** (-self.path_lengths(points) / c)


def fit_isolation_forest(points, n_trees: int = 100, subsample: int = 256, seed: int = 0) -> IsolationForestModel:
    X = np.asarray(points, dtype=float)
    n = len(X)
    if n < 2:
        raise OutlierError("isolation forest needs at least 2 points")
    psi = min(subsample, n)
    rng = np.random.default_rng(seed)
    height = max(1, math.ceil(math.log2(psi)))
    trees = [
        _grow_tree(X[rng.choice(n, psi, replace=False)], height, rng) for _ in range(n_trees)
    ]
    return IsolationForestModel(trees, n_trees, psi, seed)


def iforest_score(model: IsolationForestModel, point) -> float:
    """Anomaly score 2^(-E[path] / c(subsample)) of a single point; higher is more anomalous."""
    return float(model.score(np.asarray(point, dtype=float)[None, :])[0])


# ---------------------------------------------------------------- detection


@dataclass
class OutlierReport:
    words: list[str]
    # squared Mahalanobis distances (mcd) or anomaly scores (iforest)
    scores: np.ndarray
    is_outlier: np.ndarray
    threshold: float
    contamination: float
    detector: str
    fit: McdFit | IsolationForestModel | None = None

    @property
    def distances(self) -> dict[str, float]:
        return dict(zip(self.words, self.scores.tolist()))

    @property
    def labels(self) -> dict[str, str]:
        return {w: ("outlier" if o else "inlier") for w, o in zip(self.words, self.is_outlier)}

    @property
    def outliers(self) -> set[str]:
        return {w for w, o in zip(self.words, self.is_outlier) if o}

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for w, s, o in zip(self.words, self.scores, self.is_outlier):
                f.write(f"{w}\t{float(s)!r}\t{'outlier' if o else 'inlier'}\n")


def quantile_threshold(scores: np.ndarray, contamination: float) -> tuple[float, np.ndarray]:
    """Threshold at the (1 - contamination) quantile; scores equal to it are inliers."""
    threshold = float(np.percentile(scores, 100.0 * (1.0 - contamination)))
    return threshold, scores > threshold


def score_points(points, detector: str = "mcd", seed: int = 0):
    X = np.asarray(points, dtype=float)
    if detector == "mcd":
        fit = fast_mcd(X, seed=seed)
        return fit.mahalanobis(X), fit
    if detector == "iforest":
        forest = fit_isolation_forest(X, seed=seed)
        return forest.score(X), forest
    raise ValueError(f"unknown detector {detector!r}; expected one of {DETECTORS}")


def detect_outliers(
    model: EmbeddingModel, contamination: float = 0.49, detector: str = "mcd", seed: int = 0
) -> OutlierReport:
    if not 0 < contamination <= 0.5:
        raise ValueError(f"contamination must be in (0, 0.5], got {contamination}")
    n, p = model.matrix.shape
    if n <= p + 1:
        raise OutlierError(
            f"document too short for robust fit ({n} distinct words, {p} dimensions)"
        )
    scores, fit = score_points(model.matrix, detector, seed)
    threshold, mask = quantile_threshold(scores, contamination)
    return OutlierReport(list(model.words), scores, mask, threshold, contamination, detector, fit)
