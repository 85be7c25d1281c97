import json
import math
import time

import numpy as np
import pytest

from spartanbo.cli import (ENV_OUT, cmd_plot, cmd_run, main, parse_experiment,
                           read_trace, trace_header, write_trace)
from spartanbo.exceptions import ConfigError
from spartanbo.strategies import Trace, TraceRecord, run_bo, RunConfig
from spartanbo.space import SearchSpace


MINIMAL_TOML = """
benchmark = "exp2d"
algorithms = ["sbo"]
repetitions = 1
"""


class TestParseExperiment:
    def test_minimal_toml_defaults(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text(MINIMAL_TOML)
        ex = parse_experiment(p)
        assert ex.benchmark == "exp2d"
        assert ex.algorithms == ["sbo"]
        assert ex.repetitions == 1
        cfg = ex.run_config
        assert cfg.n_init == 10 and cfg.m == 10 and cfg.burn_in == 100

    def test_json_equivalent(self, tmp_path):
        p = tmp_path / "exp.json"
        p.write_text(json.dumps({
            "benchmark": "hartmann6", "algorithms": "bo", "repetitions": 3,
            "n_iter": 7, "acquisition": {"kind": "eiig", "alpha": 0.5}}))
        ex = parse_experiment(p)
        assert ex.benchmark == "hartmann6"
        assert ex.algorithms == ["bo"]
        assert ex.run_config.n_iter == 7
        assert ex.run_config.acquisition.kind == "eiig"

    def test_nested_tables(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text(MINIMAL_TOML + """
[spbo]
c = 0.2
T = 5

[hbo]
N_c = 3
N_d = 2
""")
        ex = parse_experiment(p)
        assert ex.run_config.spbo.c == 0.2 and ex.run_config.spbo.T == 5
        assert ex.run_config.hbo.N_c == 3

    def test_unknown_algorithm_lists_valid_names(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text('benchmark = "exp2d"\nalgorithms = ["warp"]\n')
        with pytest.raises(ConfigError, match="sbo"):
            parse_experiment(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text(MINIMAL_TOML + 'iterations = 5\n')
        with pytest.raises(ConfigError, match="iterations"):
            parse_experiment(p)

    def test_unknown_benchmark(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text('benchmark = "branin"\nalgorithms = ["bo"]\n')
        with pytest.raises(KeyError):
            parse_experiment(p)

    def test_zero_repetitions(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text('benchmark = "exp2d"\nalgorithms = ["bo"]\nrepetitions = 0\n')
        with pytest.raises(ConfigError):
            parse_experiment(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_experiment(tmp_path / "absent.toml")

    def test_malformed_toml(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text("benchmark = [unclosed\n")
        with pytest.raises(ConfigError):
            parse_experiment(p)


class TestTraceRoundtrip:
    def _trace(self):
        cfg = RunConfig(n_init=3, n_iter=2, m=2, burn_in=5, seed=0)
        return run_bo(lambda x: float(np.sum(x ** 2)),
                      SearchSpace(((0.0, 1.0), (0.0, 1.0))), cfg)

    def test_header(self):
        assert trace_header(2, 1) == ["iteration", "phase", "algorithm", "seed",
                                      "x0", "x1", "cat0", "y", "best_y", "wall_ms"]

    def test_exact_roundtrip(self, tmp_path):
        tr = self._trace()
        path = tmp_path / "t.csv"
        write_trace(tr, path)
        back = read_trace(path)
        assert back.algorithm == tr.algorithm and back.seed == tr.seed
        for a, b in zip(tr.records, back.records):
            assert a.iteration == b.iteration and a.phase == b.phase
            assert np.array_equal(a.x, b.x)
            assert a.y == b.y and a.best_y == b.best_y and a.wall_ms == b.wall_ms

    def test_rewrite_is_byte_identical(self, tmp_path):
        tr = self._trace()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace(tr, p1)
        write_trace(read_trace(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("not,a,trace\n1,2,3\n")
        with pytest.raises(ConfigError):
            read_trace(p)


SMOKE_TOML = """
benchmark = "exp2d"
algorithms = ["sbo"]
repetitions = 1
n_init = 4
n_iter = 5
m = 3
burn_in = 10
"""


class TestRunAndPlot:
    def test_smoke_run_under_60s(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_OUT, raising=False)
        p = tmp_path / "exp.toml"
        p.write_text(SMOKE_TOML + f'output_dir = "{tmp_path / "out"}"\n')
        t0 = time.time()
        rc = main(["run", str(p)])
        elapsed = time.time() - t0
        assert rc == 0
        assert elapsed < 60
        out = tmp_path / "out"
        traces = sorted(out.glob("*.csv"))
        assert [f.name for f in traces] == ["exp2d__sbo__rep000.csv"]
        tr = read_trace(traces[0])
        assert len(tr.records) == 4 + 5
        summary = json.loads((out / "summary.json").read_text())
        assert summary["benchmark"] == "exp2d"
        entry = summary["algorithms"]["sbo"]
        assert entry["completed"] == 1
        assert len(entry["median_gap"]) == 9
        assert all(math.isfinite(v) for v in entry["final_gaps"])

        # plot the directory produced by run
        rc = main(["plot", str(out)])
        assert rc == 0
        svg = (out / "exp2d.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg
        assert (out / "final_gaps.txt").read_text().strip()

    def test_env_var_overrides_output(self, tmp_path, monkeypatch):
        env_dir = tmp_path / "env_out"
        monkeypatch.setenv(ENV_OUT, str(env_dir))
        p = tmp_path / "exp.toml"
        p.write_text(SMOKE_TOML.replace('n_iter = 5', 'n_iter = 2'))
        assert main(["run", str(p)]) == 0
        assert list(env_dir.glob("*.csv"))

    def test_seed_override_changes_init(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_OUT, raising=False)
        p = tmp_path / "exp.toml"
        p.write_text(SMOKE_TOML.replace('n_iter = 5', 'n_iter = 2'))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(p), "--out", str(a), "--seed", "0"]) == 0
        assert main(["run", str(p), "--out", str(b), "--seed", "123"]) == 0
        ta = read_trace(next(a.glob("*.csv")))
        tb = read_trace(next(b.glob("*.csv")))
        assert not np.array_equal(ta.records[0].x, tb.records[0].x)

    def test_plot_empty_dir(self, tmp_path):
        assert main(["plot", str(tmp_path)]) == 2


class TestMainExitCodes:
    def test_bench_list(self, capsys):
        assert main(["bench-list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["exp2d", "hartmann6", "michalewicz10", "mixed-quad4"]

    def test_config_error_exit_1(self, tmp_path):
        p = tmp_path / "exp.toml"
        p.write_text('benchmark = "exp2d"\nalgorithms = ["warp"]\n')
        assert main(["run", str(p)]) == 1

    def test_missing_file_exit_1(self, tmp_path):
        assert main(["run", str(tmp_path / "none.toml")]) == 1
