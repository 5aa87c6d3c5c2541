import json

import numpy as np
import pytest

from rnewton.cli import main

from test_reservoir import scenario_dict


@pytest.fixture
def scenario_file(tmp_path):
    cfg = scenario_dict(rows=2, columns=3)
    cfg["time_grid"] = {"spans_days": [[4, 0.1]]}
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def bench_spec_file(tmp_path, scenario_file):
    spec = {"scenario": scenario_file.name, "sizes": [6, 12], "repetitions": 1,
            "time_spans_days": [[3, 0.1]]}
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(spec))
    return path


class TestSimulateCommand:
    def test_writes_all_outputs(self, scenario_file, tmp_path):
        out = tmp_path / "out"
        rc = main(["simulate", str(scenario_file), "--method", "newton-like",
                   "--out", str(out)])
        assert rc == 0
        for name in ("trajectory.csv", "trajectory.bin", "report.csv",
                     "run.json", "pressure_saturation.png"):
            assert (out / name).exists(), name
        run = json.loads((out / "run.json").read_text())
        assert run["method"] == "newton_like"
        assert run["cells"] == 6
        assert run["totals"]["iterations"] > 0

    def test_newton_method_flag(self, scenario_file, tmp_path):
        out = tmp_path / "out_n"
        rc = main(["simulate", str(scenario_file), "--method", "newton",
                   "--out", str(out)])
        assert rc == 0
        report = (out / "report.csv").read_text().splitlines()
        assert all(",newton," in line for line in report[1:])

    def test_trajectory_files_round_trip(self, scenario_file, tmp_path):
        from rnewton.driver import load_trajectory_binary, load_trajectory_csv
        out = tmp_path / "out_rt"
        assert main(["simulate", str(scenario_file), "--out", str(out)]) == 0
        times, from_csv = load_trajectory_csv(out / "trajectory.csv")
        from_bin = load_trajectory_binary(out / "trajectory.bin")
        assert np.array_equal(from_csv, from_bin)
        assert times.size == from_bin.shape[0]

    def test_seed_override_changes_result(self, scenario_file, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", str(scenario_file), "--out", str(out_a)]) == 0
        assert main(["simulate", str(scenario_file), "--out", str(out_b),
                     "--seed", "99"]) == 0
        a = (out_a / "trajectory.bin").read_bytes()
        b = (out_b / "trajectory.bin").read_bytes()
        assert a != b

    def test_repeat_runs_bit_identical(self, scenario_file, tmp_path):
        out_a = tmp_path / "r1"
        out_b = tmp_path / "r2"
        assert main(["simulate", str(scenario_file), "--out", str(out_a)]) == 0
        assert main(["simulate", str(scenario_file), "--out", str(out_b)]) == 0
        assert (out_a / "trajectory.bin").read_bytes() == \
            (out_b / "trajectory.bin").read_bytes()

    def test_failure_emits_error_json(self, tmp_path, capsys):
        rc = main(["simulate", str(tmp_path / "missing.json"),
                   "--out", str(tmp_path / "o")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "FileNotFoundError"


class TestBenchCommand:
    def test_dry_run_prints_plan_without_outputs(self, bench_spec_file, tmp_path,
                                                 capsys):
        out = tmp_path / "bench_out"
        rc = main(["bench", str(bench_spec_file), "--out", str(out), "--dry-run"])
        assert rc == 0
        plan = json.loads(capsys.readouterr().out)
        assert [p["cells"] for p in plan["planned_sweep"]] == [6, 12]
        assert not out.exists()

    def test_end_to_end_outputs(self, bench_spec_file, tmp_path):
        out = tmp_path / "bench_out"
        rc = main(["bench", str(bench_spec_file), "--out", str(out)])
        assert rc == 0
        for name in ("results.csv", "speedup.csv", "run.json",
                     "computation_time.png", "speedup.png"):
            assert (out / name).exists(), name
        from rnewton.bench import read_results_csv
        rows = read_results_csv(out / "results.csv")
        assert len(rows) == 4  # 2 sizes x 2 methods x 1 repetition
        run = json.loads((out / "run.json").read_text())
        assert run["command"] == "bench"
        assert "speedup_mean" in run

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_scenario_error_gives_nonzero_exit(self, tmp_path, capsys):
        spec = {"scenario": "nope.json", "sizes": [4]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(spec))
        out = tmp_path / "o"
        rc = main(["bench", str(path), "--out", str(out)])
        assert rc == 3
        run = json.loads((out / "run.json").read_text())
        assert run["errors"]


class TestShippedScenarios:
    def test_desk_scenario_loads(self):
        from rnewton.reservoir import load_scenario
        scenario = load_scenario("scenarios/desk.json")
        assert scenario.grid.n_cells == 300
        assert scenario.time_grid.n_steps == 60

    def test_bench_spec_loads(self):
        from rnewton.bench import BenchmarkSpec
        spec = BenchmarkSpec.from_json("scenarios/bench_desk.json")
        assert spec.sizes == [75, 150, 300, 600, 1200]
        assert spec.repetitions == 3
