"""Forward feature selection by residual-distribution tests.

Features arrive pre-ranked. A full model fit on one subsample produces
reference residuals; for each prefix length K a reduced model fit on a
second, disjoint subsample produces comparison residuals, and a deep-
kernel two-sample test asks whether the two residual distributions match.
The first prefix whose test is not rejected is the selected feature set.
All five working subsamples are mutually disjoint so the two residual
sets stay independent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._seeding import spawn_rng
from .bcfi import ImportanceReport, compute_importance_report
from .deep_mmd import KernelTrainConfig, deep_mmd_test
from .rf_core import Dataset, RfParams, fit_forest


@dataclass
class Partition:
    """Disjoint index sets: a0 ranks features, a3/a4 train the full and
    reduced models, a1/a2 supply the residuals under test."""

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray

    def __post_init__(self):
        sets = [np.asarray(a, dtype=np.int64) for a in (self.a0, self.a1, self.a2, self.a3, self.a4)]
        self.a0, self.a1, self.a2, self.a3, self.a4 = sets
        if self.a1.size != self.a2.size or self.a3.size != self.a4.size:
            raise ValueError("a1/a2 and a3/a4 must come in equal-size pairs")
        combined = np.concatenate(sets)
        if np.unique(combined).size != combined.size:
            raise ValueError("subsample index sets must be disjoint")


def partition_indices(n: int, m0: int, m1: int, m2: int, rng) -> Partition:
    """Uniform random disjoint draws of sizes (m0, m1, m1, m2, m2)."""
    need = m0 + 2 * m1 + 2 * m2
    if need > n:
        raise ValueError(
            f"infeasible subsample sizes: m0 + 2*m1 + 2*m2 = {need} exceeds n = {n}"
        )
    perm = rng.permutation(n)
    bounds = np.cumsum([m0, m1, m1, m2, m2])
    return Partition(
        a0=perm[: bounds[0]],
        a1=perm[bounds[0] : bounds[1]],
        a2=perm[bounds[1] : bounds[2]],
        a3=perm[bounds[2] : bounds[3]],
        a4=perm[bounds[3] : bounds[4]],
    )


def residuals(model, data: Dataset, rows, feature_subset=None) -> np.ndarray:
    """Response minus model prediction on the given rows.

    ``feature_subset`` restricts the columns fed to the model, in order;
    the model must have been trained on exactly those columns.
    """
    rows = np.asarray(rows, dtype=np.int64)
    x = data.features[rows]
    if feature_subset is not None:
        x = x[:, np.asarray(feature_subset, dtype=np.int64)]
    return data.response[rows] - model.predict_many(x)


@dataclass
class KrrModel:
    """Gaussian-kernel ridge regressor on a single feature."""

    x_train: np.ndarray
    coef: np.ndarray
    lengthscale: float

    def predict_many(self, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        g = np.exp(-((x[:, None] - self.x_train[None, :]) ** 2) / (2.0 * self.lengthscale**2))
        return g @ self.coef

    def predict(self, x):
        return float(self.predict_many(np.atleast_1d(x))[0])


def fit_krr(xs, ys, lengthscale: float = None, ridge: float = 1e-3) -> KrrModel:
    """Solve (G + ridge*I) c = y for a Gaussian Gram matrix G.

    ``lengthscale=None`` uses the median pairwise-distance heuristic.
    A singular system with ridge = 0 is reported as such.
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size == 0:
        raise ValueError("need at least one training point")
    if xs.size != ys.size:
        raise ValueError("xs and ys must have equal length")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if lengthscale is None:
        d = np.abs(xs[:, None] - xs[None, :])[np.triu_indices(xs.size, k=1)]
        lengthscale = float(np.median(d)) if d.size else 1.0
        if lengthscale <= 0:
            positive = d[d > 0]
            lengthscale = float(np.median(positive)) if positive.size else 1.0
    if lengthscale <= 0:
        raise ValueError("lengthscale must be positive")
    g = np.exp(-((xs[:, None] - xs[None, :]) ** 2) / (2.0 * lengthscale**2))
    try:
        coef = np.linalg.solve(g + ridge * np.eye(xs.size), ys)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "singular kernel system; use ridge > 0"
        ) from err
    return KrrModel(x_train=xs.copy(), coef=coef, lengthscale=float(lengthscale))


def fit_krr_cv(xs, ys, lengthscale=None, grid=(1e-4, 1e-3, 1e-2, 1e-1, 1.0), folds=5, seed=0):
    """Pick the ridge from ``grid`` by k-fold mean squared error."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    order = spawn_rng(seed, "krr-cv").permutation(xs.size)
    chunks = np.array_split(order, folds)
    best = (math.inf, grid[0])
    for ridge in grid:
        err = 0.0
        for i in range(folds):
            test = chunks[i]
            train = np.concatenate([chunks[jj] for jj in range(folds) if jj != i])
            if train.size == 0 or test.size == 0:
                continue
            model = fit_krr(xs[train], ys[train], lengthscale=lengthscale, ridge=ridge)
            err += float(np.mean((ys[test] - model.predict_many(xs[test])) ** 2))
        if err < best[0]:
            best = (err, ridge)
    return fit_krr(xs, ys, lengthscale=lengthscale, ridge=best[1])


@dataclass
class SelectionConfig:
    """Knobs for the full selection pipeline, all seeded."""

    m0: int = 400
    m1: int = 400
    m2: int = 400
    alpha: float = 0.05
    R: int = 100
    rf: RfParams = field(default_factory=RfParams)
    kernel_train: KernelTrainConfig = field(default_factory=KernelTrainConfig)
    n_perm: int = 100
    metric: str = "bcfi"
    seed: int = 0
    krr_at_k1: bool = True
    krr_ridge: float = 1e-3
    correct_multiplicity: bool = False
    tune_rf: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        for name in ("m0", "m1", "m2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class SelectionResult:
    order: np.ndarray
    tests: list
    k_hat: int
    selected: np.ndarray
    exhausted: bool


def _reduced_params(rf: RfParams, k: int) -> RfParams:
    mtry = rf.mtry if rf.mtry is not None else None
    if mtry is not None:
        mtry = min(mtry, k)
    return RfParams(
        n_trees=rf.n_trees,
        mtry=mtry,
        min_node=rf.min_node,
        max_depth=rf.max_depth,
        bootstrap=rf.bootstrap,
    )


def _fit_model_forest(data: Dataset, rf: RfParams, seed: int, tune: bool):
    """Forest for the residual models, tuned by five-fold cross-validation.

    The grid spans candidate dilution (default mtry vs all features) and
    leaf granularity (min_node and two coarser settings): the two levers
    that decide how much estimation error leaks into the residuals. An
    explicit ``rf.mtry`` skips tuning. Held-out error is scored with a
    lighter ensemble; the winner refits on all rows at full size.
    """
    p = data.n_features
    if not tune or rf.mtry is not None:
        return fit_forest(data, rf, seed=seed)
    half = max(2, data.n_rows // 2)
    grid = [
        (mtry, mn)
        for mtry in sorted({rf.resolved_mtry(p), p})
        for mn in sorted({rf.min_node, 4 * rf.min_node, 12 * rf.min_node})
        if mn <= half
    ]
    if len(grid) > 1:
        folds = 5
        order = spawn_rng(seed, "cv-folds").permutation(data.n_rows)
        chunks = np.array_split(order, folds)
        cv_trees = min(rf.n_trees, 50)
        best = (math.inf, grid[0])
        for mtry, mn in grid:
            err = 0.0
            for i in range(folds):
                held = chunks[i]
                train = np.concatenate([chunks[jj] for jj in range(folds) if jj != i])
                trial = RfParams(
                    n_trees=cv_trees,
                    mtry=mtry,
                    min_node=mn,
                    max_depth=rf.max_depth,
                    bootstrap=rf.bootstrap,
                )
                model = fit_forest(
                    data.subset_rows(train), trial, seed=_stage_seed(seed, "cv", mtry, mn, i)
                )
                pred = model.predict_many(data.features[held])
                err += float(np.mean((data.response[held] - pred) ** 2))
            if err < best[0]:
                best = (err, (mtry, mn))
        chosen_mtry, chosen_mn = best[1]
    else:
        chosen_mtry, chosen_mn = grid[0]
    final = RfParams(
        n_trees=rf.n_trees,
        mtry=chosen_mtry,
        min_node=chosen_mn,
        max_depth=rf.max_depth,
        bootstrap=rf.bootstrap,
    )
    return fit_forest(data, final, seed=seed)


def forward_select(
    data: Dataset,
    report: ImportanceReport,
    config: SelectionConfig,
    partition: Partition = None,
) -> SelectionResult:
    """Sequential prefix tests over the ranked features.

    The full model trains once on a3 and its residuals on a1 are reused
    for every K. The reduced model at K = 1 is kernel ridge regression on
    the single best feature (a switch falls back to a forest); for K >= 2
    it is a forest on the K-feature prefix, trained on a4. Testing stops
    at the first non-rejection; if every prefix through p is rejected the
    full feature set comes back with ``exhausted`` set.
    """
    order = np.asarray(report.order, dtype=np.int64)
    p = data.n_features
    if sorted(order.tolist()) != list(range(p)):
        raise ValueError("report.order must be a permutation of the features")
    if partition is None:
        partition = partition_indices(
            data.n_rows, config.m0, config.m1, config.m2, spawn_rng(config.seed, "partition")
        )

    full = _fit_model_forest(
        data.subset_rows(partition.a3),
        config.rf,
        seed=_stage_seed(config.seed, "full-rf"),
        tune=config.tune_rf,
    )
    resid_full = residuals(full, data, partition.a1)

    alpha = config.alpha / p if config.correct_multiplicity else config.alpha
    tests = []
    k_hat = p
    exhausted = True
    for k in range(1, p + 1):
        prefix = order[:k]
        if k == 1 and config.krr_at_k1:
            xs4 = data.features[partition.a4][:, prefix[0]]
            model = fit_krr(xs4, data.response[partition.a4], ridge=config.krr_ridge)
            resid_reduced = residuals(model, data, partition.a2, feature_subset=prefix[:1])
        else:
            reduced_data = data.subset_rows(partition.a4).select_features(prefix)
            model = _fit_model_forest(
                reduced_data,
                _reduced_params(config.rf, k),
                seed=_stage_seed(config.seed, "reduced-rf", k),
                tune=config.tune_rf,
            )
            resid_reduced = residuals(model, data, partition.a2, feature_subset=prefix)
        result, _ = deep_mmd_test(
            resid_full,
            resid_reduced,
            config.kernel_train,
            config.n_perm,
            alpha,
            seed=_stage_seed(config.seed, "test", k),
        )
        tests.append(result)
        if not result.reject:
            k_hat = k
            exhausted = False
            break
    return SelectionResult(
        order=order,
        tests=tests,
        k_hat=k_hat,
        selected=order[:k_hat].copy(),
        exhausted=exhausted,
    )


def select_features(data: Dataset, config: SelectionConfig):
    """Rank-then-select pipeline: partition, importance on a0, forward
    selection on a1..a4. Returns (Partition, ImportanceReport, SelectionResult)."""
    partition = partition_indices(
        data.n_rows, config.m0, config.m1, config.m2, spawn_rng(config.seed, "partition")
    )
    report = compute_importance_report(
        data,
        partition.a0,
        config.R,
        config.rf,
        seed=_stage_seed(config.seed, "importance"),
        metric=config.metric,
    )
    result = forward_select(data, report, config, partition=partition)
    return partition, report, result


@dataclass
class SelectionScore:
    mu_c: float
    n_w: int


def evaluate_selection(result: SelectionResult, true_features) -> SelectionScore:
    """Hit fraction over the true features and count of spurious picks."""
    true = set(int(t) for t in true_features)
    if not true:
        raise ValueError("true_features must be nonempty")
    selected = set(int(s) for s in result.selected)
    return SelectionScore(
        mu_c=len(selected & true) / len(true),
        n_w=len(selected - true),
    )


def _stage_seed(seed, *path):
    return int(spawn_rng(seed, *path).integers(1, 2**63))
