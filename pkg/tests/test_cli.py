"""Command-line surface: subcommands, exit codes, file outputs, determinism."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from gridsynth.cli import run
from gridsynth.params import params_from_json
from gridsynth.topology import observed_to_dict, topology_to_dict

from conftest import (
    observed_network,
    random_radial_topology,
    single_load,
    three_load,
)


@pytest.fixture
def workspace(tmp_path):
    """Observed network + target topology files for CLI runs."""
    topology = random_radial_topology(seed=50, n_buses=30, n_loads=12)
    buses = topology.loads
    loads = []
    for i, bus in enumerate(buses):
        if i % 4 == 0:
            loads.append(three_load(bus, 0.5, 0.4, 0.3))
        else:
            loads.append(single_load(bus, "ABC"[i % 3], 0.4 + 0.01 * i))
    obs = observed_network(topology, loads)

    target = random_radial_topology(seed=51, n_buses=25, n_loads=10)
    obs_path = tmp_path / "obs.json"
    topo_path = tmp_path / "topo.json"
    obs_path.write_text(json.dumps(observed_to_dict(obs)), encoding="utf-8")
    topo_path.write_text(json.dumps(topology_to_dict(target)), encoding="utf-8")
    return tmp_path, obs_path, topo_path


def test_version_exits_zero(capsys):
    assert run(["--version"]) == 0
    assert "gridsynth" in capsys.readouterr().out


def test_missing_required_argument_is_usage_error(capsys):
    assert run(["generate", "--params", "x.json"]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error():
    assert run(["frobnicate"]) == 2


def test_missing_file_is_runtime_failure(tmp_path, capsys):
    code = run(["fit", "--input", str(tmp_path / "nope.json"), "--out", str(tmp_path / "p.json")])
    assert code == 1
    assert "gridsynth:" in capsys.readouterr().err


def test_fit_writes_parseable_parameters(workspace):
    tmp_path, obs_path, _ = workspace
    out = tmp_path / "params.json"
    assert run(["fit", "--input", str(obs_path), "--bins", "5", "--out", str(out)]) == 0
    params = params_from_json(out.read_text(encoding="utf-8"))
    assert params.curve.n_bins == 5
    assert abs(sum(params.phase_choice.as_tuple()) - 1.0) <= 1e-12


def test_generate_writes_sample_files(workspace):
    tmp_path, obs_path, topo_path = workspace
    params = tmp_path / "params.json"
    samples = tmp_path / "samples"
    run(["fit", "--input", str(obs_path), "--out", str(params)])
    code = run(
        [
            "generate",
            "--topology", str(topo_path),
            "--params", str(params),
            "--samples", "4",
            "--seed", "9",
            "--out-dir", str(samples),
        ]
    )
    assert code == 0
    files = sorted(samples.glob("sample_*.json"))
    assert [f.name for f in files] == [f"sample_{i}.json" for i in range(4)]
    doc = json.loads(files[0].read_text(encoding="utf-8"))
    assert set(doc) == {"buses", "lines", "feeder", "loads", "observed_loads"}


def test_generated_samples_pass_check(workspace):
    tmp_path, obs_path, topo_path = workspace
    params = tmp_path / "params.json"
    samples = tmp_path / "samples"
    run(["fit", "--input", str(obs_path), "--out", str(params)])
    run(
        [
            "generate", "--topology", str(topo_path), "--params", str(params),
            "--samples", "3", "--seed", "4", "--out-dir", str(samples),
        ]
    )
    for sample in sorted(samples.glob("sample_*.json")):
        assert run(["check", "--sample", str(sample)]) == 0


def violating_sample(tmp_path):
    doc = {
        "buses": [{"id": "f"}, {"id": "n1"}, {"id": "n2"}],
        "lines": [
            {"from": "f", "to": "n1", "length_m": 100.0},
            {"from": "n1", "to": "n2", "length_m": 100.0},
        ],
        "feeder": {"source_bus": "f", "base_kv": 0.416},
        "loads": [{"bus": "n1"}, {"bus": "n2"}],
        "observed_loads": [
            {"bus": "n1", "phases": ["B"], "p_kw": {"A": 0, "B": 1.0, "C": 0}, "q_kvar": {"A": 0, "B": 0, "C": 0}},
            {"bus": "n2", "phases": ["A"], "p_kw": {"A": 1.0, "B": 0, "C": 0}, "q_kvar": {"A": 0, "B": 0, "C": 0}},
        ],
    }
    path = tmp_path / "violating.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_check_reports_violations(tmp_path, capsys):
    path = violating_sample(tmp_path)
    assert run(["check", "--sample", str(path)]) == 1
    out = capsys.readouterr().out
    assert "n2" in out and "n1" in out


def test_enforce_produces_consistent_sample(tmp_path):
    path = violating_sample(tmp_path)
    out = tmp_path / "repaired.json"
    assert run(["enforce", "--sample", str(path), "--out", str(out)]) == 0
    assert run(["check", "--sample", str(out)]) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    phases = {load["bus"]: load["phases"] for load in doc["observed_loads"]}
    assert set(phases["n1"]) >= {"A", "B"}
    # demands untouched by the repair
    assert doc["observed_loads"][0]["p_kw"] == {"A": 0, "B": 1.0, "C": 0}


def test_powerflow_writes_band_csv(workspace):
    tmp_path, obs_path, _ = workspace
    report = tmp_path / "pf.csv"
    code = run(
        [
            "powerflow", "--sample", str(obs_path),
            "--r-ohm-km", "0.4", "--x-ohm-km", "0.3",
            "--tol", "1e-8", "--band", "0.95:1.04",
            "--report", str(report),
        ]
    )
    assert code == 0
    lines = report.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "bus,phase,v_pu,in_band"
    assert all(line.endswith(",true") for line in lines[1:])


def test_powerflow_bad_band_is_usage_error(workspace, capsys):
    tmp_path, obs_path, _ = workspace
    code = run(
        ["powerflow", "--sample", str(obs_path), "--band", "1.04:0.95",
         "--report", str(tmp_path / "pf.csv")]
    )
    assert code == 2
    assert "lo < hi" in capsys.readouterr().err


def test_report_writes_csv_json_and_figures(workspace):
    tmp_path, obs_path, topo_path = workspace
    params = tmp_path / "params.json"
    samples = tmp_path / "samples"
    hist = tmp_path / "hist"
    out = tmp_path / "report.csv"
    run(["fit", "--input", str(obs_path), "--out", str(params)])
    run(
        ["generate", "--topology", str(topo_path), "--params", str(params),
         "--samples", "3", "--seed", "4", "--out-dir", str(samples)]
    )
    code = run(
        ["report", "--real", str(obs_path), "--synthetic-dir", str(samples),
         "--out", str(out), "--histograms", str(hist)]
    )
    assert code == 0
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "phase,mean_kw_real,mean_kw_synth,mape_percent"
    assert len(lines) == 4
    twin = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert {"mape_mode", "phases", "parameters", "histograms"} <= set(twin)
    assert (hist / "p_kw_A_real.csv").exists()
    for phase in "ABC":
        assert (hist / f"active_power_{phase}.png").exists()


def test_scenario_file_override(workspace):
    tmp_path, obs_path, topo_path = workspace
    params = tmp_path / "params.json"
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({"A": 0.7, "B": 0.2, "C": 0.1}), encoding="utf-8")
    samples = tmp_path / "samples"
    run(["fit", "--input", str(obs_path), "--out", str(params)])
    code = run(
        ["generate", "--topology", str(topo_path), "--params", str(params),
         "--samples", "2", "--seed", "1", "--out-dir", str(samples),
         "--scenario", str(scenario)]
    )
    assert code == 0


def tree_bytes(root: Path) -> dict:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


def test_pipeline_writes_all_artifacts(workspace):
    tmp_path, obs_path, topo_path = workspace
    out_dir = tmp_path / "run"
    code = run(
        ["pipeline", "--observed", str(obs_path), "--topology", str(topo_path),
         "--samples", "3", "--seed", "2", "--out-dir", str(out_dir)]
    )
    assert code == 0
    assert (out_dir / "params.json").exists()
    assert len(list((out_dir / "samples").glob("sample_*.json"))) == 3
    assert (out_dir / "powerflow" / "pf_summary.csv").exists()
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "report.json").exists()
    assert (out_dir / "hist" / "active_power_A.png").exists()


def test_pipeline_matches_stage_composition(workspace):
    tmp_path, obs_path, topo_path = workspace
    pipe_dir = tmp_path / "pipe"
    run(
        ["pipeline", "--observed", str(obs_path), "--topology", str(topo_path),
         "--samples", "3", "--seed", "6", "--out-dir", str(pipe_dir)]
    )

    manual = tmp_path / "manual"
    manual.mkdir()
    run(["fit", "--input", str(obs_path), "--out", str(manual / "params.json")])
    run(
        ["generate", "--topology", str(topo_path), "--params", str(manual / "params.json"),
         "--samples", "3", "--seed", "6", "--out-dir", str(manual / "samples")]
    )
    run(
        ["report", "--real", str(obs_path), "--synthetic-dir", str(manual / "samples"),
         "--out", str(manual / "report.csv"), "--histograms", str(manual / "hist")]
    )

    assert (pipe_dir / "params.json").read_bytes() == (manual / "params.json").read_bytes()
    for i in range(3):
        assert (
            (pipe_dir / "samples" / f"sample_{i}.json").read_bytes()
            == (manual / "samples" / f"sample_{i}.json").read_bytes()
        )
    assert (pipe_dir / "report.csv").read_bytes() == (manual / "report.csv").read_bytes()
    assert (pipe_dir / "report.json").read_bytes() == (manual / "report.json").read_bytes()


def test_separate_processes_produce_identical_samples(workspace):
    # guards against per-process state (hash seeds, env) leaking into output
    import subprocess
    import sys

    tmp_path, obs_path, topo_path = workspace
    params = tmp_path / "params.json"
    run(["fit", "--input", str(obs_path), "--out", str(params)])
    outputs = []
    for name in ("proc_a", "proc_b"):
        out_dir = tmp_path / name
        result = subprocess.run(
            [
                sys.executable, "-m", "gridsynth.cli",
                "generate", "--topology", str(topo_path), "--params", str(params),
                "--samples", "3", "--seed", "17", "--out-dir", str(out_dir),
            ],
            capture_output=True,
            cwd=str(Path(__file__).resolve().parent.parent),
            env={"PYTHONPATH": "src", "PATH": "/usr/bin:/bin"},
        )
        assert result.returncode == 0, result.stderr.decode()
        outputs.append(tree_bytes(out_dir))
    assert outputs[0] == outputs[1]


def test_pipeline_is_deterministic_across_jobs(workspace):
    tmp_path, obs_path, topo_path = workspace
    trees = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "3")):
        out_dir = tmp_path / name
        run(
            ["pipeline", "--observed", str(obs_path), "--topology", str(topo_path),
             "--samples", "4", "--seed", "5", "--jobs", jobs, "--out-dir", str(out_dir)]
        )
        trees.append(tree_bytes(out_dir))
    assert trees[0] == trees[1] == trees[2]
