"""Forest-ranked feature selection with deep-kernel residual tests."""

__version__ = "0.1.0"

from .rf_core import (
    Dataset,
    Forest,
    RfParams,
    Tree,
    fit_forest,
    fit_tree,
    importance,
    min_depth_importance,
    predict,
    predict_many,
    weighted_variance_decrease,
)
from .bcfi import (
    ImportanceReport,
    compute_bcfi,
    compute_importance_report,
    rank_features,
    shadow_augment,
)
from .deep_mmd import (
    KernelParams,
    KernelTrainConfig,
    Mlp,
    TestResult,
    deep_mmd_test,
    kernel_eval,
    mmd2_u,
    permutation_test,
    train_kernel,
    variance_hat,
)
from .fsd import (
    Partition,
    SelectionConfig,
    SelectionResult,
    evaluate_selection,
    fit_krr,
    forward_select,
    partition_indices,
    residuals,
    select_features,
)
from .synth import ModelSpec, estimate_snr, gen_model, run_benchmark

__all__ = [
    "Dataset",
    "Forest",
    "ImportanceReport",
    "KernelParams",
    "KernelTrainConfig",
    "Mlp",
    "ModelSpec",
    "Partition",
    "RfParams",
    "SelectionConfig",
    "SelectionResult",
    "TestResult",
    "Tree",
    "compute_bcfi",
    "compute_importance_report",
    "deep_mmd_test",
    "estimate_snr",
    "evaluate_selection",
    "fit_forest",
    "fit_krr",
    "fit_tree",
    "forward_select",
    "gen_model",
    "importance",
    "kernel_eval",
    "min_depth_importance",
    "mmd2_u",
    "partition_indices",
    "permutation_test",
    "predict",
    "predict_many",
    "rank_features",
    "residuals",
    "run_benchmark",
    "select_features",
    "shadow_augment",
    "train_kernel",
    "variance_hat",
    "weighted_variance_decrease",
]
