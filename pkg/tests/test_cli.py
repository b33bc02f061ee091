"""Command line coverage, mostly in-process through cli.main."""

import json
import subprocess
import sys

import pytest

from onroute import cli, harness
from onroute.model import save_instance
from onroute.offline import evaluate_schedule, load_schedule
from onroute.simulate import load_trace


@pytest.fixture
def inst_path(worked, tmp_path):
    path = tmp_path / "worked.json"
    save_instance(worked, str(path))
    return str(path)


@pytest.fixture
def stream_path(tmp_path):
    doc = {
        "space": {"kind": "line", "left": 5, "right": 5},
        "mode": "tsp",
        "k": 1,
        "delta": 3.0,
        "generator": {"law": "uniform", "m": 3, "lo": 0.2, "hi": 0.8, "seed": 12},
    }
    path = tmp_path / "stream.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestRun:
    def test_instance_text_output(self, inst_path, capsys):
        assert cli.main(["run", "--instance", inst_path,
                         "--policy", "replan-baseline"]) == 0
        out = capsys.readouterr().out
        assert "makespan    14" in out
        assert "ratio       1" in out
        assert "audit       ok" in out

    def test_sniffed_path_json_output(self, inst_path, capsys):
        assert cli.main(["run", inst_path, "--policy", "line-switch",
                         "--json"]) == 0
        row = json.loads(capsys.readouterr().out)
        assert set(row) == set(harness.CSV_FIELDS)
        assert row["makespan"] == 14.0
        assert row["within_bound"] == "pass"
        assert row["branch"] == "radius"

    def test_stream_file_runs(self, stream_path, capsys):
        assert cli.main(["run", stream_path, "--policy", "replan-baseline",
                         "--json"]) == 0
        row = json.loads(capsys.readouterr().out)
        assert row["m"] == 3
        assert row["audit_ok"] is True

    def test_trace_output_replayable(self, inst_path, tmp_path, capsys):
        trace_path = str(tmp_path / "out.jsonl")
        assert cli.main(["run", inst_path, "--policy", "replan-baseline",
                         "--trace", trace_path]) == 0
        trace = load_trace(trace_path)
        assert trace.makespan == 14.0

    def test_requires_exactly_one_input(self, inst_path, stream_path, capsys):
        assert cli.main(["run", "--instance", inst_path, "--oracle", stream_path,
                         "--policy", "replan-baseline"]) == 1
        assert "exactly one input" in capsys.readouterr().err
        assert cli.main(["run", "--policy", "replan-baseline"]) == 1

    def test_missing_file(self, capsys):
        assert cli.main(["run", "nope.json", "--policy", "replan-baseline"]) == 1
        assert "error:" in capsys.readouterr().err


class TestOpt:
    def test_text(self, inst_path, capsys):
        assert cli.main(["opt", inst_path]) == 0
        assert "optimum     14" in capsys.readouterr().out

    def test_json_and_witness(self, worked, inst_path, tmp_path, capsys):
        sched_path = str(tmp_path / "sched.json")
        assert cli.main(["opt", inst_path, "--json",
                         "--schedule", sched_path]) == 0
        assert json.loads(capsys.readouterr().out) == {"opt": 14.0, "exact": True}
        sched = load_schedule(sched_path)
        assert evaluate_schedule(worked, sched).makespan == 14.0

    def test_lower_bound(self, inst_path, capsys):
        assert cli.main(["opt", inst_path, "--lower-bound"]) == 0
        out = capsys.readouterr().out
        assert "lower bound 14" in out
        assert "tour" in out

    def test_lower_bound_json(self, inst_path, capsys):
        assert cli.main(["opt", inst_path, "--lower-bound", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["lower_bound"] == 14.0
        assert "parts" in doc


EXP_CONFIG = {
    "jobs": [
        {"policy": "replan-baseline",
         "stream": {"kind": "star", "n": 1, "delta": 1}, "label": "a"},
        {"policy": "line-switch",
         "stream": {"kind": "span-chase", "left": 3.0, "right": 7.0,
                    "locality": 3.0, "seed": 2}, "label": "b"},
    ],
}


class TestExperiment:
    def _config(self, tmp_path, **extra):
        doc = dict(EXP_CONFIG, **extra)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_csv_and_summary(self, tmp_path, capsys):
        csv_path = tmp_path / "runs.csv"
        cfg = self._config(tmp_path)
        assert cli.main(["experiment", cfg, "--out", str(csv_path)]) == 0
        out = capsys.readouterr().out
        assert f"wrote 2 rows to {csv_path}" in out
        assert "line-switch|" in out
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "#schema=1"
        assert len(lines) == 4

    def test_plot_directory(self, tmp_path, capsys):
        cfg = self._config(tmp_path, plots=["ratio-vs-delta"])
        plot_dir = tmp_path / "plots"
        assert cli.main(["experiment", cfg, "--plot", str(plot_dir)]) == 0
        data = (plot_dir / "ratio-vs-delta.dat").read_text()
        assert data.startswith("# plot: ratio-vs-delta")

    def test_no_outputs_prints_rows(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert cli.main(["experiment", cfg]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()
                if line.startswith("{")]
        assert [r["label"] for r in rows] == ["a", "b"]

    def test_config_given_twice(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert cli.main(["experiment", cfg, "--config", cfg]) == 1
        assert "config file once" in capsys.readouterr().err


class TestAdversaryStar:
    def test_json_report(self, capsys):
        assert cli.main(["adversary", "star", "--n", "2", "--delta", "2",
                         "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["online"] == 20.0
        assert doc["witness"] == 14.0
        assert doc["ratio"] == pytest.approx(20 / 14)
        assert doc["audit_ok"] is True

    def test_text_report(self, capsys):
        assert cli.main(["adversary", "star", "--n", "2", "--delta", "2"]) == 0
        out = capsys.readouterr().out
        assert "online      20" in out
        assert "witness     14" in out

    def test_instance_out_validates(self, tmp_path, capsys):
        inst_out = str(tmp_path / "star.json")
        assert cli.main(["adversary", "star", "--n", "2", "--delta", "2",
                         "--instance-out", inst_out]) == 0
        capsys.readouterr()
        assert cli.main(["validate", inst_out]) == 0
        assert "instance ok (tsp, homing, k=1, m=4)" in capsys.readouterr().out


class TestValidate:
    def test_instance(self, inst_path, capsys):
        assert cli.main(["validate", inst_path]) == 0
        assert "instance ok" in capsys.readouterr().out

    def test_stream(self, stream_path, capsys):
        assert cli.main(["validate", stream_path]) == 0
        assert "stream ok" in capsys.readouterr().out

    def test_trace_checks_listed(self, inst_path, tmp_path, capsys):
        trace_path = str(tmp_path / "t.jsonl")
        cli.main(["run", inst_path, "--policy", "replan-baseline",
                  "--trace", trace_path])
        capsys.readouterr()
        assert cli.main(["validate", trace_path]) == 0
        out = capsys.readouterr().out
        assert "speed-law" in out
        assert "trace ok" in out

    def test_tampered_trace_fails(self, inst_path, tmp_path, capsys):
        trace_path = tmp_path / "t.jsonl"
        cli.main(["run", inst_path, "--policy", "replan-baseline",
                  "--trace", str(trace_path)])
        capsys.readouterr()
        text = trace_path.read_text().replace('"makespan": 14.0',
                                              '"makespan": 13.0')
        assert text != trace_path.read_text()
        trace_path.write_text(text)
        assert cli.main(["validate", str(trace_path)]) == 1
        out = capsys.readouterr().out
        assert "makespan-consistent    FAILED" in out
        assert "INVALID" in out

    def test_unreadable(self, tmp_path, capsys):
        bad = tmp_path / "junk.json"
        bad.write_text("{nope")
        assert cli.main(["validate", str(bad)]) == 1
        assert "unreadable" in capsys.readouterr().err


def test_console_script_smoke(inst_path):
    proc = subprocess.run(["onroute", "opt", inst_path],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "optimum     14" in proc.stdout


def test_module_entry_matches(inst_path):
    proc = subprocess.run([sys.executable, "-m", "onroute.cli", "opt", inst_path],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "optimum     14" in proc.stdout
