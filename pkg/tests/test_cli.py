"""End-to-end tests of the command-line interface.

Each test invokes carafe.cli.main with argv and inspects exit codes and the
files written under a temp directory. Determinism tests compare report bytes
across repeat runs.
"""

import csv
import json
from pathlib import Path

import pytest

from carafe.cli import build_parser, main


def _read_json(path):
    return json.loads(Path(path).read_text())


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--banana", "3"])
        assert exc.value.code == 2


class TestGradcheckCommand:
    def test_single_op_passes(self, tmp_path):
        rc = main(["gradcheck", "--ops", "relu", "--out", str(tmp_path)])
        assert rc == 0
        payload = _read_json(tmp_path / "gradcheck.json")
        assert payload["schema"] == 1
        assert payload["command"] == "gradcheck"
        assert payload["passed"] is True
        assert [r["op"] for r in payload["results"]] == ["relu"]

    def test_unknown_op_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gradcheck", "--ops", "warp", "--out", str(tmp_path)])
        assert exc.value.code == 2
        assert "warp" in capsys.readouterr().err

    def test_impossible_tolerance_fails_with_exit_1(self, tmp_path):
        rc = main(["gradcheck", "--ops", "conv2d", "--tol", "0",
                   "--out", str(tmp_path)])
        assert rc == 1
        payload = _read_json(tmp_path / "gradcheck.json")
        assert payload["passed"] is False

    def test_stanza_records_config_and_seed(self, tmp_path):
        main(["gradcheck", "--ops", "relu", "--seed", "3",
              "--out", str(tmp_path)])
        payload = _read_json(tmp_path / "gradcheck.json")
        assert payload["seed"] == 3
        assert payload["config"]["ops"] == "relu"
        assert payload["timing"] == "excluded"


class TestBenchCommand:
    def test_csv_and_json_written(self, tmp_path):
        rc = main(["bench", "--ops", "nearest_up,avg_pool",
                   "--shape", "1,2,8,8", "--reps", "2",
                   "--out", str(tmp_path)])
        assert rc == 0
        with open(tmp_path / "bench.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["operator"] for r in rows] == ["nearest_up", "avg_pool"]
        assert set(rows[0]) == {"operator", "direction", "shape", "sigma",
                                "median_ns", "p90_ns", "checksum"}
        payload = _read_json(tmp_path / "bench.json")
        assert payload["schema"] == 1
        assert len(payload["results"]) == 2

    def test_single_repetition_p90_equals_median(self, tmp_path):
        main(["bench", "--ops", "nearest_up", "--shape", "1,1,4,4",
              "--reps", "1", "--out", str(tmp_path)])
        with open(tmp_path / "bench.csv", newline="") as fh:
            row = next(csv.DictReader(fh))
        assert row["p90_ns"] == row["median_ns"]

    def test_conv_pair_checksums_match(self, tmp_path):
        # the blocked and direct convolution run the same problem, so their
        # output checksums must agree exactly
        main(["bench", "--ops", "conv_blocked,conv_direct",
              "--shape", "1,4,12,12", "--reps", "1",
              "--out", str(tmp_path)])
        payload = _read_json(tmp_path / "bench.json")
        sums = {r["operator"]: r["checksum"] for r in payload["results"]}
        assert sums["conv_blocked"] == sums["conv_direct"]

    def test_bad_shape_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--shape", "4,4", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_indivisible_shape_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--ops", "carafe_down", "--shape", "1,2,7,7",
                  "--sigma", "2", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_timings_absent_from_json(self, tmp_path):
        # wall-clock numbers live only in the CSV; the JSON report stays
        # byte-deterministic
        main(["bench", "--ops", "nearest_up", "--shape", "1,1,4,4",
              "--reps", "1", "--out", str(tmp_path)])
        payload = _read_json(tmp_path / "bench.json")
        assert payload["timing"] == "excluded"
        assert all("median_ns" not in r and "p90_ns" not in r
                   for r in payload["results"])


class TestTrainCommand:
    def test_writes_report_and_losses(self, tmp_path):
        rc = main(["train", "--task", "super_res", "--size", "8",
                   "--epochs", "3", "--operator", "nearest_up",
                   "--channels", "4", "--out", str(tmp_path)])
        assert rc == 0
        report = _read_json(tmp_path / "report.json")
        assert report["status"] == "ok"
        assert report["result"]["operator"] == "nearest_up"
        assert len(report["result"]["losses"]) == 3
        with open(tmp_path / "losses.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert [r["step"] for r in rows] == ["0", "1", "2"]

    def test_super_res_requires_upsampler(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--task", "super_res", "--arch", "bottleneck",
                  "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_carafe_config_flags_flow_through(self, tmp_path):
        rc = main(["train", "--task", "seg2", "--size", "8", "--epochs", "2",
                   "--operator", "carafe", "--c-mid", "4", "--k-encoder", "3",
                   "--k-reassembly", "3", "--channels", "4",
                   "--out", str(tmp_path)])
        assert rc == 0
        report = _read_json(tmp_path / "report.json")
        assert report["config"]["c_mid"] == 4
        assert report["config"]["k_reassembly"] == 3
        assert report["result"]["metric_name"] == "iou"

    def test_divergence_exits_1(self, tmp_path):
        rc = main(["train", "--task", "super_res", "--size", "8",
                   "--epochs", "300", "--lr", "50.0", "--operator",
                   "nearest_plus_conv", "--channels", "4",
                   "--out", str(tmp_path)])
        assert rc == 1
        report = _read_json(tmp_path / "report.json")
        assert report["status"] == "diverged"

    def test_invalid_size_sigma_pair_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--size", "9", "--sigma", "2",
                  "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestConfigFile:
    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"task": "seg2", "epochs": 2, "size": 8,
                                   "channels": 4, "operator": "avg_pool"}))
        rc = main(["train", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0
        report = _read_json(tmp_path / "report.json")
        assert report["config"]["task"] == "seg2"
        assert report["config"]["operator"] == "avg_pool"

    def test_flags_override_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 2, "size": 8, "channels": 4,
                                   "operator": "avg_pool", "task": "seg2"}))
        rc = main(["train", "--config", str(cfg), "--operator", "max_pool",
                   "--out", str(tmp_path)])
        assert rc == 0
        report = _read_json(tmp_path / "report.json")
        assert report["config"]["operator"] == "max_pool"

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epohcs": 2}))
        with pytest.raises(SystemExit) as exc:
            main(["train", "--config", str(cfg), "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestDeterminism:
    def test_gradcheck_json_identical_across_runs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            main(["gradcheck", "--ops", "relu,softmax_group", "--seed", "1",
                  "--out", str(out)])
        ja = (a / "gradcheck.json").read_bytes()
        jb = (b / "gradcheck.json").read_bytes()
        assert ja.replace(str(a).encode(), b"OUT") == \
            jb.replace(str(b).encode(), b"OUT")

    def test_train_json_identical_across_runs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            main(["train", "--task", "super_res", "--size", "8", "--epochs",
                  "3", "--channels", "4", "--c-mid", "4", "--seed", "2",
                  "--out", str(out)])
        ja = (a / "report.json").read_bytes()
        jb = (b / "report.json").read_bytes()
        assert ja.replace(str(a).encode(), b"OUT") == \
            jb.replace(str(b).encode(), b"OUT")


class TestSweepCommand:
    def test_grid_size_and_outputs(self, tmp_path):
        rc = main(["sweep", "--task", "seg2", "--size", "8", "--epochs", "2",
                   "--channels", "4", "--c-mid-grid", "2,4",
                   "--kernel-grid", "1:3,3:5", "--out", str(tmp_path)])
        assert rc == 0
        payload = _read_json(tmp_path / "sweep.json")
        assert len(payload["cells"]) == 4
        cell_files = sorted((tmp_path / "cells").glob("*.json"))
        assert len(cell_files) == 4
        with open(tmp_path / "summary.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4

    def test_diagonal_flag_marks_matching_cells(self, tmp_path):
        main(["sweep", "--task", "seg2", "--size", "8", "--epochs", "2",
              "--channels", "4", "--c-mid-grid", "4",
              "--kernel-grid", "1:3,3:3", "--out", str(tmp_path)])
        with open(tmp_path / "summary.csv", newline="") as fh:
            rows = {r["cell"]: r for r in csv.DictReader(fh)}
        flags = {name: row["diagonal"] for name, row in rows.items()}
        # 1:3 satisfies k_enc == k_re - 2; 3:3 does not
        by_kernel = {name.split("_enc")[1]: flag for name, flag in flags.items()}
        assert by_kernel["1_re3_softmax"] == "yes"
        assert by_kernel["3_re3_softmax"] == "no"

    def test_bad_kernel_grid_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--kernel-grid", "2:4", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CARAFE_THREADS", "2")
        rc = main(["sweep", "--task", "seg2", "--size", "8", "--epochs", "2",
                   "--channels", "4", "--c-mid-grid", "2,4",
                   "--kernel-grid", "1:3", "--out", str(tmp_path)])
        assert rc == 0
        payload = _read_json(tmp_path / "sweep.json")
        assert payload["config"]["threads"] == 2
