"""Regression trees and bootstrap forests with split-level statistics.

Trees record enough per-node state (counts, means, population variances)
to evaluate the weighted variance decrease of every split after the fact,
which is what the importance metrics consume. Forests are reproducible:
(data, params, seed) pins every tree, because tree ``b`` draws its
bootstrap rows and split candidates from a stream derived from
``(seed, b)`` alone.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from . import _tree_kernel
from ._seeding import kernel_seed, spawn_rng

THREADS_ENV = "NFSELECT_THREADS"


def thread_count():
    """Worker threads for tree fitting; NFSELECT_THREADS overrides cores."""
    raw = os.environ.get(THREADS_ENV, "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class Dataset:
    """Feature matrix with named columns and a response vector."""

    features: np.ndarray
    response: np.ndarray
    names: list = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n, p = self.features.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one row and one feature")
        if self.response.shape != (n,):
            raise ValueError("response length must match the row count")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.response)):
            raise ValueError("all values must be finite")
        if self.names is None:
            self.names = [f"x{k + 1}" for k in range(p)]
        self.names = [str(s) for s in self.names]
        if len(self.names) != p:
            raise ValueError("need one name per feature column")
        if len(set(self.names)) != p:
            raise ValueError("feature names must be unique")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset_rows(self, rows):
        return Dataset(self.features[rows], self.response[rows], list(self.names))

    def select_features(self, cols):
        cols = list(cols)
        return Dataset(
            self.features[:, cols],
            self.response,
            [self.names[c] for c in cols],
        )


@dataclass
class RfParams:
    """Forest controls. ``mtry=None`` resolves to max(1, ceil(p/3)) at fit."""

    n_trees: int = 100
    mtry: int = None
    min_node: int = 5
    max_depth: int = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_node < 2:
            raise ValueError("min_node must be >= 2")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1 when given")

    def resolved_mtry(self, p):
        if self.mtry is None:
            return max(1, ceil(p / 3))
        if self.mtry > p:
            raise ValueError(f"mtry={self.mtry} exceeds feature count {p}")
        return self.mtry


@dataclass(frozen=True)
class SplitRecord:
    """One internal node's split statistics; weights are fractions of the
    tree's training size and variances divide by the node count."""

    feature: int
    threshold: float
    weight: float
    variance: float
    left_weight: float
    left_variance: float
    right_weight: float
    right_variance: float


@dataclass
class Tree:
    """Array-backed regression tree. ``feature[i] < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    variance: np.ndarray
    depth: np.ndarray
    train_size: int

    @property
    def n_nodes(self):
        return self.feature.size

    @property
    def max_depth(self):
        return int(self.depth.max())

    def is_leaf(self, node):
        return self.feature[node] < 0

    def split_records(self):
        """SplitRecord for every internal node, in node-id order."""
        records = []
        m = float(self.train_size)
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            records.append(
                SplitRecord(
                    feature=int(self.feature[i]),
                    threshold=float(self.threshold[i]),
                    weight=self.count[i] / m,
                    variance=float(self.variance[i]),
                    left_weight=self.count[l] / m,
                    left_variance=float(self.variance[l]),
                    right_weight=self.count[r] / m,
                    right_variance=float(self.variance[r]),
                )
            )
        return records


@dataclass
class Forest:
    trees: list
    params: RfParams
    train_size: int
    seed: int
    n_features: int
    names: list = field(default_factory=list)

    def predict_many(self, X):
        return predict_many(self, X)

    def predict(self, x):
        return predict(self, x)


def fit_tree(data: Dataset, row_indices, params: RfParams, rng) -> Tree:
    """Grow one tree on the given row multiset.

    ``rng`` seeds the candidate-feature stream; bootstrap resampling, if
    any, is the caller's job (see fit_forest).
    """
    rows = np.asarray(row_indices, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("empty node")
    if rows.min() < 0 or rows.max() >= data.n_rows:
        raise ValueError("row index out of range")
    mtry = params.resolved_mtry(data.n_features)
    cap = params.max_depth if params.max_depth is not None else _tree_kernel._NO_DEPTH_CAP
    parts = _tree_kernel.grow(
        data.features,
        data.response,
        rows,
        mtry,
        params.min_node,
        cap,
        kernel_seed(rng),
    )
    return Tree(*parts, train_size=rows.size)


def fit_forest(data: Dataset, params: RfParams, seed: int) -> Forest:
    """Fit ``params.n_trees`` trees, each on its own bootstrap resample.

    Tree b is fully determined by (seed, b), so refits are bit-identical
    and independent of how the trees are scheduled across threads.
    """
    n = data.n_rows
    mtry = params.resolved_mtry(data.n_features)
    cap = params.max_depth if params.max_depth is not None else _tree_kernel._NO_DEPTH_CAP

    def one(b):
        rng = spawn_rng(seed, b)
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n, dtype=np.int64)
        parts = _tree_kernel.grow(
            data.features, data.response, rows, mtry, params.min_node, cap, kernel_seed(rng)
        )
        return Tree(*parts, train_size=n)

    workers = min(thread_count(), params.n_trees)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(one, range(params.n_trees)))
    else:
        trees = [one(b) for b in range(params.n_trees)]
    return Forest(
        trees=trees,
        params=params,
        train_size=n,
        seed=seed,
        n_features=data.n_features,
        names=list(data.names),
    )


def predict_many(forest: Forest, X) -> np.ndarray:
    """Forest predictions for each row of X: the mean of per-tree leaves."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(
            f"dimension mismatch: expected {forest.n_features} features, got {X.shape}"
        )
    total = np.zeros(X.shape[0])
    for t in forest.trees:
        total += _tree_kernel.route(t.feature, t.threshold, t.left, t.right, t.value, X)
    return total / len(forest.trees)


def predict(forest: Forest, x) -> float:
    """Prediction at a single feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != forest.n_features:
        raise ValueError(
            f"dimension mismatch: expected {forest.n_features} features, got {x.size}"
        )
    return float(predict_many(forest, x[None, :])[0])


def weighted_variance_decrease(record: SplitRecord) -> float:
    """Weighted drop in population variance achieved by one split."""
    return (
        record.weight * record.variance
        - record.left_weight * record.left_variance
        - record.right_weight * record.right_variance
    )


def _tree_gains(tree: Tree):
    """Per-internal-node variance decreases and split features, vectorized."""
    internal = np.flatnonzero(tree.feature >= 0)
    if internal.size == 0:
        return internal, np.zeros(0)
    l = tree.left[internal]
    r = tree.right[internal]
    m = float(tree.train_size)
    delta = (
        tree.count[internal] / m * tree.variance[internal]
        - tree.count[l] / m * tree.variance[l]
        - tree.count[r] / m * tree.variance[r]
    )
    return tree.feature[internal], delta


def importance(forest: Forest) -> np.ndarray:
    """Variance-decrease importance: for each feature, the sum of weighted
    variance decreases over every split made on it, averaged over trees.
    Features never split on score 0."""
    acc = np.zeros(forest.n_features)
    for t in forest.trees:
        feats, delta = _tree_gains(t)
        np.add.at(acc, feats, delta)
    return acc / len(forest.trees)


def min_depth_importance(forest: Forest) -> np.ndarray:
    """Mean over trees of the shallowest depth at which each feature splits
    (root = 0). A tree that never uses the feature contributes its own
    maximal depth plus one. Smaller means more important."""
    acc = np.zeros(forest.n_features)
    for t in forest.trees:
        internal = t.feature >= 0
        md = np.full(forest.n_features, t.max_depth + 1, dtype=np.float64)
        np.minimum.at(md, t.feature[internal], t.depth[internal].astype(np.float64))
        acc += md
    return acc / len(forest.trees)
