"""Synthetic regression benchmarks.

Six generators: three response surfaces crossed with two feature laws
(uniform on [1, 10], and a skewed scaled beta on [1, 15.5]), unit normal
noise throughout. A correlated variant blends each feature with its left
neighbor. The harness reruns the whole rank-and-select pipeline across
seeded repetitions and scores how often the true features are recovered
and how many spurious ones tag along.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._seeding import spawn_rng
from .fsd import SelectionConfig, evaluate_selection, select_features
from .rf_core import Dataset

# model id -> (signal function over the first columns, 0-based true features)
_MODELS = {
    1: (lambda x: 0.3 * x[:, 0] + 0.3 * x[:, 1], (0, 1)),
    2: (lambda x: 3.0 * np.sin(x[:, 0]), (0,)),
    3: (lambda x: 5.0 * np.sin(x[:, 0] / 10.0) * np.sqrt(x[:, 1]), (0, 1)),
    4: (lambda x: 0.3 * x[:, 0] + 0.3 * x[:, 1], (0, 1)),
    5: (lambda x: 3.0 * np.sin(x[:, 0]), (0,)),
    6: (lambda x: 5.0 * np.sin(x[:, 0] / 10.0) * np.sqrt(x[:, 1]), (0, 1)),
}


def known_models():
    return sorted(_MODELS)


def true_features(model_id: int):
    _check_model(model_id)
    return _MODELS[model_id][1]


def signal(model_id: int, x) -> np.ndarray:
    """Noise-free response surface over the leading feature columns."""
    _check_model(model_id)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    f, true = _MODELS[model_id]
    if x.shape[1] < len(true):
        raise ValueError(f"model {model_id} needs {len(true)} feature columns")
    return f(x)


@dataclass
class ModelSpec:
    model_id: int
    n: int
    p: int
    correlated: bool = False
    seed: int = 0

    def __post_init__(self):
        _check_model(self.model_id)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.p < len(_MODELS[self.model_id][1]):
            raise ValueError("p is smaller than the model's useful feature count")


def _check_model(model_id):
    if model_id not in _MODELS:
        raise ValueError(f"unknown model: {model_id}")


def _draw_features(model_id, n, p, correlated, rng):
    if model_id <= 3:
        x = rng.uniform(1.0, 10.0, size=(n, p))
    else:
        x = 14.5 * rng.beta(2.0, 4.0, size=(n, p)) + 1.0
    if correlated and p > 1:
        # x_k = 0.7 x'_k + 0.3 x'_{k-1}, first column passed through
        base = x
        x = np.empty_like(base)
        x[:, 0] = base[:, 0]
        x[:, 1:] = 0.7 * base[:, 1:] + 0.3 * base[:, :-1]
    return x


def gen_model(spec: ModelSpec):
    """Dataset plus the 0-based indices of the useful features."""
    x = _draw_features(
        spec.model_id, spec.n, spec.p, spec.correlated, spawn_rng(spec.seed, "features")
    )
    y = signal(spec.model_id, x) + spawn_rng(spec.seed, "noise").standard_normal(spec.n)
    return Dataset(x, y), true_features(spec.model_id)


def estimate_snr(spec: ModelSpec, mc_size: int) -> float:
    """Monte Carlo sqrt(var f(X)); the noise variance is 1 by design."""
    if mc_size < 1000:
        raise ValueError("mc_size must be >= 1000")
    k = len(true_features(spec.model_id))
    x = _draw_features(
        spec.model_id, mc_size, max(k, 2 if spec.correlated else k), spec.correlated,
        spawn_rng(spec.seed, "snr"),
    )
    return float(np.sqrt(signal(spec.model_id, x).var()))


def run_benchmark(models, config: SelectionConfig, reps: int):
    """Repeat the selection pipeline over fresh data draws.

    Returns (rows, summaries): per-repetition rows of
    (model_id, rep, hits, wrong, seconds) and one aggregate per model with
    the hit proportion mu_c and the mean spurious count n_w.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n = config.m0 + 2 * config.m1 + 2 * config.m2
    rows = []
    summaries = []
    for spec in models:
        k0 = len(true_features(spec.model_id))
        hits_total = 0
        wrong_total = 0
        seconds = []
        for rep in range(reps):
            began = time.perf_counter()
            data_spec = replace(spec, n=n, seed=_rep_seed(spec.seed, spec.model_id, rep))
            data, true = gen_model(data_spec)
            rep_config = replace(config, seed=_rep_seed(config.seed, spec.model_id, rep))
            _, _, result = select_features(data, rep_config)
            score = evaluate_selection(result, true)
            elapsed = time.perf_counter() - began
            hits = round(score.mu_c * k0)
            rows.append(
                {
                    "model_id": spec.model_id,
                    "rep": rep,
                    "hits": hits,
                    "wrong": score.n_w,
                    "seconds": elapsed,
                }
            )
            hits_total += hits
            wrong_total += score.n_w
            seconds.append(elapsed)
        summaries.append(
            {
                "model_id": spec.model_id,
                "p": spec.p,
                "correlated": spec.correlated,
                "reps": reps,
                "mu_c": hits_total / (reps * k0),
                "n_w": wrong_total / reps,
                "mean_seconds": float(np.mean(seconds)),
            }
        )
    return rows, summaries


def write_rows_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["model_id", "rep", "hits", "wrong", "seconds"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def benchmark_summary(summaries, config: SelectionConfig, include_timings: bool = False):
    """JSON-ready aggregate; timings are opt-in so reports stay reproducible."""
    cleaned = []
    for s in summaries:
        s = dict(s)
        if not include_timings:
            s.pop("mean_seconds", None)
        cleaned.append(s)
    return {"config": asdict(config), "models": cleaned}


def write_summary_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True))
        fh.write("\n")


def _rep_seed(seed, *path):
    return int(spawn_rng(seed, "bench", *path).integers(1, 2**63))
