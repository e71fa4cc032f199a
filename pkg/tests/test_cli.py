import subprocess
import sys

import pytest

from distdualprox.cli import main, run_experiment
from distdualprox.lasso import ExperimentConfig, dump_config
from distdualprox.simnet import read_trace_csv


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if not p.name.startswith("timing")}


def test_sync_run_writes_monotone_trace(tmp_path):
    assert main(["--mode", "sync", "--out", str(tmp_path)]) == 0
    rows = read_trace_csv(tmp_path / "trace_sync_seed0.csv")
    err = [float(r["dual_cost_error"]) for r in rows]
    assert err[-1] <= 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(err, err[1:]))
    summary = (tmp_path / "summary_sync.txt").read_text()
    assert "truncated: false" in summary and "x_9:" in summary and "final_consensus_error" in summary
    assert (tmp_path / "timing_sync.txt").exists()


def test_batch_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["--mode", "async_node", "--seeds", "3", "--out", str(out), "--primal-trace"]) == 0
    assert _files(a) == _files(b)
    names = set(_files(a))
    assert {f"trace_async_node_seed{s}.csv" for s in range(3)} <= names
    assert {f"primal_async_node_seed{s}.csv" for s in range(3)} <= names
    assert "median_awake_per_node" in (a / "summary_async_node.txt").read_text()


def test_primal_trace_columns(tmp_path):
    main(["--mode", "async_edge", "--out", str(tmp_path), "--primal-trace"])
    header = (tmp_path / "primal_async_edge_seed0.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["t", "sim_time"] and header[-1] == "x_9_2"
    trace_header = (tmp_path / "trace_async_edge_seed0.csv").read_text().splitlines()[0]
    assert trace_header == "t,sim_time,activated,dual_cost_error,consensus_error"


def test_nesterov_fewer_iterations_than_sync(tmp_path):
    cfg = ExperimentConfig(threshold=1e-4)
    plain = run_experiment(cfg.with_overrides(mode="sync"), [0], tmp_path)
    fast = run_experiment(cfg.with_overrides(mode="sync_nesterov"), [0], tmp_path)
    assert fast.iterations[0] < plain.iterations[0]


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(dump_config(ExperimentConfig(mode="sync", nesterov=True, threshold=1e-3)))
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "summary_sync_nesterov.txt").exists()
    assert main(["--config", str(cfg), "--mode", "async_edge", "--mapping", "box-in-g",
                 "--step-scale", "0.5", "--out", str(tmp_path / "p")]) == 0
    text = (tmp_path / "p" / "summary_async_edge.txt").read_text()
    assert "mapping: box-in-g" in text


def test_truncated_run_exit_code(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(dump_config(ExperimentConfig(mode="sync", max_iterations=3)))
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "truncated: true" in (tmp_path / "summary_sync.txt").read_text()


def test_bad_config_diagnostic(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(dump_config(ExperimentConfig()).replace("p = 0.2", "p = lots"))
    assert main(["--config", str(cfg)]) == 2
    assert "field graph.p" in capsys.readouterr().err


def test_bad_seed_arguments():
    assert main(["--seeds", "0"]) == 2


def test_unknown_mode_rejected():
    with pytest.raises(SystemExit):
        main(["--mode", "gossip"])


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "distdualprox", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--step-scale" in out.stdout
