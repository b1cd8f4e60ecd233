"""Shadow-feature augmentation and bias-corrected importance.

Raw variance-decrease importance drifts upward for features with many
distinct values. Pairing every feature with a shadow copy (the same
column values under a random row permutation, so it carries no signal)
and subtracting the shadow's score removes that drift. The procedure is
repeated R times with fresh shadows and averaged.
"""

from dataclasses import dataclass

import numpy as np

from ._seeding import spawn_rng
from .rf_core import Dataset, RfParams, fit_forest, importance, min_depth_importance


@dataclass
class ImportanceReport:
    """Per-feature scores with the per-repetition breakdown.

    ``order`` ranks features best-first: descending values for the
    bias-corrected metric, ascending for minimum depth.
    """

    values: np.ndarray
    per_rep: np.ndarray
    order: np.ndarray
    metric: str


def shadow_augment(data: Dataset, rng) -> Dataset:
    """Append one shadow column per feature.

    A single row permutation is shared by all columns, so the shadow block
    keeps the features' joint dependence while severing any link to the
    response. Column k's shadow lands at column p + k.
    """
    perm = rng.permutation(data.n_rows)
    shadows = data.features[perm]
    names = list(data.names) + [f"{name}__shadow" for name in data.names]
    return Dataset(np.hstack([data.features, shadows]), data.response, names)


def rank_features(values, ascending: bool = False) -> np.ndarray:
    """Stable best-first ordering; ties go to the lower feature index."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("importance values must be finite")
    if ascending:
        return np.argsort(values, kind="stable")
    return np.argsort(-values, kind="stable")


def compute_bcfi(
    data: Dataset, subset, R: int, params: RfParams, seed: int
) -> ImportanceReport:
    """Bias-corrected importance on the row subset.

    Each repetition draws fresh shadows, fits a forest on the doubled
    feature set, and scores feature k as its importance minus its
    shadow's. Repetitions average into the final values; everything is
    deterministic in ``seed``.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size > data.n_rows:
        raise ValueError("subset size exceeds the number of rows")
    if R < 1:
        raise ValueError("R must be >= 1")
    base = data.subset_rows(subset)
    p = base.n_features
    per_rep = np.empty((R, p))
    for r in range(R):
        augmented = shadow_augment(base, spawn_rng(seed, "shadow", r))
        forest = fit_forest(augmented, params, seed=_rep_seed(seed, r))
        raw = importance(forest)
        per_rep[r] = raw[:p] - raw[p:]
    values = per_rep.mean(axis=0)
    return ImportanceReport(
        values=values, per_rep=per_rep, order=rank_features(values), metric="bcfi"
    )


def compute_min_depth_report(
    data: Dataset, subset, R: int, params: RfParams, seed: int
) -> ImportanceReport:
    """Minimum-depth scores averaged over R independently seeded forests
    on the raw features; ranked ascending (shallower = more important)."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size > data.n_rows:
        raise ValueError("subset size exceeds the number of rows")
    if R < 1:
        raise ValueError("R must be >= 1")
    base = data.subset_rows(subset)
    per_rep = np.empty((R, base.n_features))
    for r in range(R):
        forest = fit_forest(base, params, seed=_rep_seed(seed, r))
        per_rep[r] = min_depth_importance(forest)
    values = per_rep.mean(axis=0)
    return ImportanceReport(
        values=values,
        per_rep=per_rep,
        order=rank_features(values, ascending=True),
        metric="min_depth",
    )


def compute_importance_report(
    data: Dataset, subset, R: int, params: RfParams, seed: int, metric: str = "bcfi"
) -> ImportanceReport:
    if metric == "bcfi":
        return compute_bcfi(data, subset, R, params, seed)
    if metric == "min_depth":
        return compute_min_depth_report(data, subset, R, params, seed)
    raise ValueError(f"unknown importance metric: {metric!r}")


def _rep_seed(seed, r):
    # flat 63-bit seed per repetition so forests stay order-independent
    return int(spawn_rng(seed, "rep", r).integers(1, 2**63))
