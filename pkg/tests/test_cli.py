import json

import pytest

from nfselect.cli import load_csv, main


def run_cli(*argv):
    return main(list(argv))


def gen_csv(tmp_path, name="data.csv", model=2, n=400, p=5, seed=0):
    path = tmp_path / name
    assert run_cli(
        "gen", "--model", str(model), "--n", str(n), "--p", str(p),
        "--seed", str(seed), "--out", str(path),
    ) == 0
    return path


class TestGen:
    def test_writes_expected_shape(self, tmp_path):
        path = gen_csv(tmp_path, model=2, n=100, p=5)
        lines = path.read_text().splitlines()
        assert lines[0] == "x1,x2,x3,x4,x5,target"
        assert len(lines) == 101
        assert all(len(line.split(",")) == 6 for line in lines)

    def test_byte_identical_reruns(self, tmp_path):
        a = gen_csv(tmp_path, "a.csv", seed=3)
        b = gen_csv(tmp_path, "b.csv", seed=3)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_model_exits_2(self, tmp_path, capsys):
        code = run_cli("gen", "--model", "9", "--out", str(tmp_path / "x.csv"))
        assert code == 2
        assert "unknown model" in capsys.readouterr().err

    def test_unwritable_path_exits_2(self, tmp_path):
        code = run_cli("gen", "--model", "2", "--out", str(tmp_path / "nodir" / "x.csv"))
        assert code == 2

    def test_roundtrip_through_loader(self, tmp_path):
        path = gen_csv(tmp_path, n=50, p=3, seed=9)
        data, names = load_csv(str(path), "target")
        assert names == ["x1", "x2", "x3"]
        assert data.n_rows == 50


class TestLoadCsv:
    def test_missing_target(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n")
        from nfselect.cli import DataError

        with pytest.raises(DataError, match="target"):
            load_csv(str(path), "target")

    def test_non_numeric_cell_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,target\n1,2\nx,4\n")
        from nfselect.cli import DataError

        with pytest.raises(DataError, match=r"m.csv:3.*'x'.*'a'"):
            load_csv(str(path), "target")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        from nfselect.cli import DataError

        with pytest.raises(DataError, match="empty"):
            load_csv(str(path), "target")

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,target\n")
        from nfselect.cli import DataError

        with pytest.raises(DataError, match="no data rows"):
            load_csv(str(path), "target")


class TestImportance:
    def test_ranks_signal_feature_first(self, tmp_path, capsys):
        path = gen_csv(tmp_path, model=2, n=400, p=5, seed=1)
        out = tmp_path / "imp.json"
        code = run_cli(
            "importance", str(path), "--m0", "200", "--R", "3", "--B", "30",
            "--seed", "2", "--json-out", str(out),
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["importance"]["ranked_names"][0] == "x1"
        assert payload["config"]["R"] == 3

    def test_min_depth_metric_dispatch(self, tmp_path):
        path = gen_csv(tmp_path, model=2, n=400, p=5, seed=1)
        out = tmp_path / "imp.json"
        code = run_cli(
            "importance", str(path), "--m0", "200", "--R", "2", "--B", "30",
            "--metric", "min_depth", "--json-out", str(out),
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["importance"]["metric"] == "min_depth"
        assert payload["importance"]["ranked_names"][0] == "x1"

    @pytest.mark.slow
    def test_top_rank_stable_across_twenty_seeds(self, tmp_path):
        path = gen_csv(tmp_path, model=2, n=2000, p=10, seed=0)
        hits = 0
        for seed in range(20):
            out = tmp_path / f"imp{seed}.json"
            assert run_cli(
                "importance", str(path), "--m0", "400", "--R", "10", "--B", "50",
                "--seed", str(seed), "--json-out", str(out),
            ) == 0
            hits += json.loads(out.read_text())["importance"]["ranked_names"][0] == "x1"
        assert hits >= 19

    def test_m0_too_large_exits_2(self, tmp_path, capsys):
        path = gen_csv(tmp_path, n=50, p=3)
        assert run_cli("importance", str(path), "--m0", "60") == 2
        assert "m0" in capsys.readouterr().err

    def test_empty_csv_exits_2(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        assert run_cli("importance", str(path)) == 2

    def test_json_report_roundtrips(self, tmp_path):
        path = gen_csv(tmp_path, n=300, p=4, seed=5)
        out = tmp_path / "imp.json"
        run_cli(
            "importance", str(path), "--m0", "150", "--R", "2", "--B", "20",
            "--json-out", str(out),
        )
        raw = out.read_text()
        payload = json.loads(raw)
        assert json.dumps(payload, indent=2, sort_keys=True) + "\n" == raw


SELECT_FLAGS = [
    "--m0", "60", "--m1", "40", "--m2", "60", "--R", "2", "--B", "25",
    "--n-perm", "40",
]


class TestSelect:
    def test_select_smoke_and_determinism(self, tmp_path, monkeypatch):
        path = gen_csv(tmp_path, model=2, n=300, p=4, seed=6)
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        assert run_cli("select", str(path), *SELECT_FLAGS, "--seed", "3", "--json-out", str(out1)) == 0
        monkeypatch.setenv("NFSELECT_THREADS", "2")
        assert run_cli("select", str(path), *SELECT_FLAGS, "--seed", "3", "--json-out", str(out2)) == 0
        assert out1.read_bytes() == out2.read_bytes()
        payload = json.loads(out1.read_text())
        assert payload["selected"]
        assert payload["k_hat"] == len(payload["selected"])
        assert payload["tests"][0]["K"] == 1

    def test_infeasible_sizes_exit_2(self, tmp_path, capsys):
        path = gen_csv(tmp_path, n=100, p=3)
        code = run_cli("select", str(path), "--m0", "50", "--m1", "40", "--m2", "40")
        assert code == 2
        assert "exceeds n" in capsys.readouterr().err

    def test_smaller_alpha_selects_subset(self, tmp_path):
        # same seed means shared statistics; a stricter level can only stop earlier
        path = gen_csv(tmp_path, model=1, n=300, p=4, seed=8)
        sets = {}
        for alpha in ("0.01", "0.05"):
            out = tmp_path / f"{alpha}.json"
            assert run_cli(
                "select", str(path), *SELECT_FLAGS, "--alpha", alpha,
                "--seed", "4", "--json-out", str(out),
            ) == 0
            sets[alpha] = set(json.loads(out.read_text())["selected"])
        assert sets["0.01"] <= sets["0.05"]

    def test_timings_flag_adds_section(self, tmp_path):
        path = gen_csv(tmp_path, model=2, n=300, p=4, seed=6)
        out = tmp_path / "t.json"
        run_cli("select", str(path), *SELECT_FLAGS, "--seed", "3", "--json-out", str(out), "--timings")
        assert "timings_seconds" in json.loads(out.read_text())


class TestBenchmark:
    def test_reps_zero_exits_2(self, capsys):
        assert run_cli("benchmark", "--reps", "0") == 2

    def test_small_benchmark_writes_outputs(self, tmp_path):
        prefix = tmp_path / "bench"
        code = run_cli(
            "benchmark", "--models", "2", "--p", "4", "--sizes", "50",
            "--reps", "1", "--R", "2", "--B", "20", "--n-perm", "30",
            "--out", str(prefix),
        )
        assert code == 0
        rows = (tmp_path / "bench.rows.csv").read_text().splitlines()
        assert rows[0] == "model_id,rep,hits,wrong,seconds"
        assert len(rows) == 2
        summary = json.loads((tmp_path / "bench.summary.json").read_text())
        assert summary["models"][0]["model_id"] == 2
        assert "mean_seconds" not in summary["models"][0]

    def test_summary_json_deterministic(self, tmp_path):
        args = [
            "benchmark", "--models", "2", "--p", "4", "--sizes", "50",
            "--reps", "1", "--R", "2", "--B", "20", "--n-perm", "30",
        ]
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert run_cli(*args, "--out", str(a)) == 0
        assert run_cli(*args, "--out", str(b)) == 0
        assert (tmp_path / "a.summary.json").read_bytes() == (tmp_path / "b.summary.json").read_bytes()

    def test_unknown_model_exits_2(self, capsys):
        assert run_cli("benchmark", "--models", "2,9") == 2
