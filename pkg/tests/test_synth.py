import math

import numpy as np
import pytest

import nfselect.synth as synth
from nfselect.deep_mmd import KernelTrainConfig
from nfselect.fsd import SelectionConfig
from nfselect.rf_core import RfParams
from nfselect.synth import (
    ModelSpec,
    benchmark_summary,
    estimate_snr,
    gen_model,
    run_benchmark,
    signal,
    true_features,
)


class TestGenModel:
    def test_uniform_support_bounds(self):
        data, _ = gen_model(ModelSpec(model_id=1, n=5000, p=8, seed=0))
        assert data.features.min() >= 1.0
        assert data.features.max() <= 10.0

    def test_beta_support_bounds(self):
        data, _ = gen_model(ModelSpec(model_id=4, n=5000, p=8, seed=0))
        assert data.features.min() >= 1.0
        assert data.features.max() <= 15.5

    def test_correlated_support_stays_inside(self):
        data, _ = gen_model(ModelSpec(model_id=1, n=2000, p=6, correlated=True, seed=1))
        assert data.features.min() >= 1.0
        assert data.features.max() <= 10.0

    def test_true_feature_sets(self):
        expected = {1: (0, 1), 2: (0,), 3: (0, 1), 4: (0, 1), 5: (0,), 6: (0, 1)}
        for mid, want in expected.items():
            _, true = gen_model(ModelSpec(model_id=mid, n=10, p=4, seed=0))
            assert true == want
            assert true_features(mid) == want

    def test_noise_free_model2_at_pi_over_two(self):
        assert signal(2, np.array([[math.pi / 2.0]])) == pytest.approx([3.0])

    def test_signal_needs_enough_columns(self):
        with pytest.raises(ValueError, match="columns"):
            signal(3, np.ones((4, 1)))

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError, match="unknown model"):
            ModelSpec(model_id=9, n=10, p=2)

    def test_p_below_k0_rejected(self):
        with pytest.raises(ValueError, match="useful feature count"):
            ModelSpec(model_id=1, n=10, p=1)

    def test_bit_identical_regeneration(self):
        a, _ = gen_model(ModelSpec(model_id=3, n=500, p=5, seed=7))
        b, _ = gen_model(ModelSpec(model_id=3, n=500, p=5, seed=7))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.response, b.response)

    def test_response_is_signal_plus_unit_noise(self):
        data, _ = gen_model(ModelSpec(model_id=2, n=50000, p=3, seed=9))
        noise = data.response - signal(2, data.features)
        assert abs(noise.mean()) < 0.02
        assert abs(noise.var() - 1.0) < 0.03


class TestCorrelatedVariant:
    def test_adjacent_correlation_matches_mixing_arithmetic(self):
        # interior: var(x_k) = (0.49 + 0.09) s^2 and cov(x_k, x_k+1) = 0.21 s^2
        # -> corr = 0.21 / 0.58; first pair: x_1 = x_1' enters x_2 with weight
        # 0.3, so cov = 0.3 s^2 -> corr = 0.3 / sqrt(0.58)
        data, _ = gen_model(ModelSpec(model_id=1, n=100000, p=5, correlated=True, seed=4))
        x = data.features
        interior = np.corrcoef(x[:, 2], x[:, 3])[0, 1]
        first = np.corrcoef(x[:, 0], x[:, 1])[0, 1]
        assert interior == pytest.approx(0.21 / 0.58, abs=0.05)
        assert first == pytest.approx(0.3 / math.sqrt(0.58), abs=0.05)
        assert interior > 0

    def test_independent_variant_uncorrelated(self):
        data, _ = gen_model(ModelSpec(model_id=1, n=100000, p=4, seed=4))
        r = np.corrcoef(data.features[:, 1], data.features[:, 2])[0, 1]
        assert abs(r) < 0.02


class TestSnr:
    def test_constant_signal_gives_zero(self, monkeypatch):
        monkeypatch.setitem(synth._MODELS, 99, (lambda x: np.zeros(len(x)), (0,)))
        assert estimate_snr(ModelSpec(model_id=99, n=10, p=2, seed=0), 2000) == 0.0

    def test_model1_near_table_value(self):
        assert estimate_snr(ModelSpec(model_id=1, n=10, p=2, seed=0), 100_000) == pytest.approx(
            1.1, abs=0.05
        )

    def test_model3_near_table_value(self):
        assert estimate_snr(ModelSpec(model_id=3, n=10, p=2, seed=0), 100_000) == pytest.approx(
            3.0, abs=0.1
        )

    def test_mc_size_floor(self):
        with pytest.raises(ValueError, match="mc_size"):
            estimate_snr(ModelSpec(model_id=1, n=10, p=2), 100)


class TestBenchmark:
    def _config(self):
        return SelectionConfig(
            m0=50,
            m1=40,
            m2=50,
            R=2,
            rf=RfParams(n_trees=20),
            kernel_train=KernelTrainConfig(epochs=20),
            n_perm=30,
            seed=3,
        )

    def test_single_rep_aggregate_equals_run(self):
        spec = ModelSpec(model_id=2, n=10, p=4, seed=5)
        rows, summaries = run_benchmark([spec], self._config(), reps=1)
        assert len(rows) == 1
        assert len(summaries) == 1
        row, summary = rows[0], summaries[0]
        assert summary["mu_c"] == row["hits"] / len(true_features(2))
        assert summary["n_w"] == row["wrong"]
        assert row["model_id"] == 2 and row["rep"] == 0

    def test_reps_floor(self):
        with pytest.raises(ValueError, match="reps"):
            run_benchmark([ModelSpec(model_id=2, n=10, p=4)], self._config(), reps=0)

    def test_summary_json_shape_and_timing_toggle(self):
        spec = ModelSpec(model_id=2, n=10, p=4, seed=5)
        rows, summaries = run_benchmark([spec], self._config(), reps=1)
        bare = benchmark_summary(summaries, self._config())
        assert "mean_seconds" not in bare["models"][0]
        timed = benchmark_summary(summaries, self._config(), include_timings=True)
        assert "mean_seconds" in timed["models"][0]
        assert bare["config"]["m0"] == 50

    def test_deterministic_scores(self):
        spec = ModelSpec(model_id=2, n=10, p=4, seed=5)
        _, first = run_benchmark([spec], self._config(), reps=2)
        _, second = run_benchmark([spec], self._config(), reps=2)
        assert first[0]["mu_c"] == second[0]["mu_c"]
        assert first[0]["n_w"] == second[0]["n_w"]
