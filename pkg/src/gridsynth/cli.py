"""gridsynth command-line interface.

Subcommands: fit, generate, check, enforce, powerflow, report, pipeline.
Exit codes: 0 success, 1 validation/consistency failure, 2 usage error.
Configuration is captured entirely by argv (no environment variables); the
default seed is a fixed constant, so unseeded runs are reproducible.  Data
goes to files or standard output, progress and timing lines to standard
error, and every output file is written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .consistency import assignment_from_loads, check_consistency
from .estimator import DEFAULT_N_BINS, fit
from .metrics import build_report, report_to_dict
from .params import (
    ModelParameters,
    params_from_json,
    params_to_json,
    with_ratio_mean,
)
from .plots import render_phase_histograms
from .powerflow import (
    DEFAULT_MAX_ITER,
    DEFAULT_R_OHM_PER_KM,
    DEFAULT_TOL,
    DEFAULT_X_OHM_PER_KM,
    LineImpedance,
    PowerFlowError,
    run_power_flow,
    voltage_band_report,
)
from .sampler import generate, sample_from_observed
from .topology import (
    PHASES,
    SchemaError,
    ValidationError,
    load_observed_network,
    load_topology,
    observed_to_dict,
)

DEFAULT_SEED = 42
DEFAULT_SAMPLES = 1000
DEFAULT_BAND = (0.95, 1.04)

SCENARIO_RATIO_MEANS = {
    "balanced": (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    "unbalanced": (0.1, 0.6, 0.3),
}


@dataclass
class RunConfig:
    subcommand: str
    input: Path | None = None
    topology: Path | None = None
    params: Path | None = None
    sample: Path | None = None
    observed: Path | None = None
    real: Path | None = None
    synthetic_dir: Path | None = None
    out: Path | None = None
    out_dir: Path | None = None
    histograms: Path | None = None
    report: Path | None = None
    seed: int = DEFAULT_SEED
    n_samples: int = DEFAULT_SAMPLES
    n_bins: int = DEFAULT_N_BINS
    scenario: str | None = None
    r_ohm_km: float = DEFAULT_R_OHM_PER_KM
    x_ohm_km: float = DEFAULT_X_OHM_PER_KM
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    band: tuple[float, float] = DEFAULT_BAND
    jobs: int | None = None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridsynth",
        description="Fit, sample, repair, solve and compare synthetic three-phase load data.",
    )
    parser.add_argument("--version", action="version", version=f"gridsynth {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit model parameters from an observed network")
    p_fit.add_argument("--input", required=True, type=Path, help="observed network JSON")
    p_fit.add_argument("--bins", type=int, default=DEFAULT_N_BINS, help="distance bins")
    p_fit.add_argument("--out", required=True, type=Path, help="parameters JSON to write")

    p_gen = sub.add_parser("generate", help="sample synthetic networks onto a topology")
    p_gen.add_argument("--topology", required=True, type=Path, help="topology JSON")
    p_gen.add_argument("--params", required=True, type=Path, help="parameters JSON")
    p_gen.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p_gen.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_gen.add_argument("--out-dir", required=True, type=Path)
    p_gen.add_argument(
        "--scenario",
        help="ratio-mean override: 'balanced', 'unbalanced', or a JSON file path",
    )
    p_gen.add_argument("--jobs", type=int, default=None, help="worker threads (default: cores)")

    p_check = sub.add_parser("check", help="report phase-consistency violations in a sample")
    p_check.add_argument("--sample", required=True, type=Path)

    p_enf = sub.add_parser("enforce", help="repair a sample's phase assignment")
    p_enf.add_argument("--sample", required=True, type=Path)
    p_enf.add_argument("--out", required=True, type=Path)

    p_pf = sub.add_parser("powerflow", help="run the radial sweep and the voltage-band check")
    p_pf.add_argument("--sample", required=True, type=Path)
    p_pf.add_argument("--r-ohm-km", type=float, default=DEFAULT_R_OHM_PER_KM)
    p_pf.add_argument("--x-ohm-km", type=float, default=DEFAULT_X_OHM_PER_KM)
    p_pf.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_pf.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p_pf.add_argument("--band", type=_parse_band, default=DEFAULT_BAND, help="voltage band as lo:hi")
    p_pf.add_argument("--report", required=True, type=Path, help="per-bus CSV to write")

    p_rep = sub.add_parser("report", help="compare a real network against generated samples")
    p_rep.add_argument("--real", required=True, type=Path)
    p_rep.add_argument("--synthetic-dir", required=True, type=Path)
    p_rep.add_argument("--out", required=True, type=Path, help="mean-table CSV to write")
    p_rep.add_argument("--histograms", type=Path, help="directory for histogram data and figures")

    p_pipe = sub.add_parser("pipeline", help="fit, generate, solve and report in one run")
    p_pipe.add_argument("--observed", required=True, type=Path)
    p_pipe.add_argument("--topology", required=True, type=Path)
    p_pipe.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p_pipe.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_pipe.add_argument("--bins", type=int, default=DEFAULT_N_BINS)
    p_pipe.add_argument("--out-dir", type=Path, default=Path("gridsynth_out"))
    p_pipe.add_argument("--scenario")
    p_pipe.add_argument("--jobs", type=int, default=None)
    p_pipe.add_argument("--r-ohm-km", type=float, default=DEFAULT_R_OHM_PER_KM)
    p_pipe.add_argument("--x-ohm-km", type=float, default=DEFAULT_X_OHM_PER_KM)
    p_pipe.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_pipe.add_argument("--band", type=_parse_band, default=DEFAULT_BAND)
    return parser


def _parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must be 'lo:hi', got {text!r}") from None
    if lo >= hi:
        raise argparse.ArgumentTypeError(f"band must satisfy lo < hi, got {text!r}")
    return lo, hi


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=args.subcommand)
    for name in (
        "input", "topology", "params", "sample", "observed", "real", "synthetic_dir",
        "out", "out_dir", "histograms", "report", "scenario", "jobs",
    ):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "bins"):
        cfg.n_bins = args.bins
    if hasattr(args, "samples"):
        cfg.n_samples = args.samples
    if hasattr(args, "seed"):
        cfg.seed = args.seed
    if hasattr(args, "r_ohm_km"):
        cfg.r_ohm_km = args.r_ohm_km
    if hasattr(args, "x_ohm_km"):
        cfg.x_ohm_km = args.x_ohm_km
    if hasattr(args, "tol"):
        cfg.tol = args.tol
    if hasattr(args, "max_iter"):
        cfg.max_iter = args.max_iter
    if hasattr(args, "band"):
        cfg.band = args.band
    return cfg


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _log(message: str) -> None:
    print(f"[gridsynth] {message}", file=sys.stderr)


class _Stage:
    """Times one pipeline stage, logging wall-clock to stderr."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self._start
        _log(f"{self.name}: {elapsed:.2f} s")
        return False


def _apply_scenario(params: ModelParameters, scenario: str | None) -> ModelParameters:
    if scenario is None:
        return params
    if scenario in SCENARIO_RATIO_MEANS:
        return with_ratio_mean(params, SCENARIO_RATIO_MEANS[scenario])
    try:
        doc = json.loads(Path(scenario).read_text(encoding="utf-8"))
        mean = tuple(float(doc[phase.value]) for phase in PHASES)
        concentration = float(doc["concentration"]) if "concentration" in doc else None
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"cannot read scenario {scenario!r}: {exc}") from exc
    return with_ratio_mean(params, mean, concentration)


def _cmd_fit(cfg: RunConfig) -> int:
    with _Stage("fit"):
        obs = load_observed_network(cfg.input.read_bytes())
        params = fit(obs, cfg.n_bins)
        _write_atomic(cfg.out, params_to_json(params) + "\n")
    return 0


def _cmd_generate(cfg: RunConfig) -> int:
    topology = load_topology(cfg.topology.read_bytes())
    params = _apply_scenario(params_from_json(cfg.params.read_text(encoding="utf-8")), cfg.scenario)
    jobs = cfg.jobs if cfg.jobs is not None else os.cpu_count()
    with _Stage(f"generate {cfg.n_samples} samples"):
        samples = generate(topology, params, cfg.n_samples, cfg.seed, jobs=jobs)
        for sample in samples:
            doc = observed_to_dict(sample.to_observed())
            _write_atomic(
                cfg.out_dir / f"sample_{sample.sample_index}.json",
                json.dumps(doc, indent=2) + "\n",
            )
    return 0


def _cmd_check(cfg: RunConfig) -> int:
    obs = load_observed_network(cfg.sample.read_bytes())
    load_phases: dict[str, frozenset] = {}
    for load in obs.observed_loads:
        load_phases[load.bus] = load_phases.get(load.bus, frozenset()) | load.phases
    assignment = assignment_from_loads(obs.topology, load_phases)
    violations = check_consistency(obs.topology, assignment)
    for bus, ancestor in violations:
        print(f"violation: phases at {bus} are not contained at upstream bus {ancestor}")
    _log(f"check: {len(violations)} violation(s)")
    return 1 if violations else 0


def _cmd_enforce(cfg: RunConfig) -> int:
    obs = load_observed_network(cfg.sample.read_bytes())
    sample = sample_from_observed(obs)
    _write_atomic(cfg.out, json.dumps(observed_to_dict(sample.to_observed()), indent=2) + "\n")
    return 0


def _solve_sample(obs, cfg: RunConfig):
    sample = sample_from_observed(obs)
    impedance = LineImpedance(cfg.r_ohm_km, cfg.x_ohm_km, allow_zero=True)
    return sample, run_power_flow(
        obs.topology, sample, impedance=impedance, tol=cfg.tol, max_iter=cfg.max_iter
    )


def _cmd_powerflow(cfg: RunConfig) -> int:
    obs = load_observed_network(cfg.sample.read_bytes())
    with _Stage("powerflow"):
        _, solution = _solve_sample(obs, cfg)
    lo, hi = cfg.band
    out_of_band = {(v.bus, v.phase) for v in voltage_band_report(solution, lo, hi)}
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["bus", "phase", "v_pu", "in_band"])
    for row, bus in enumerate(solution.bus_ids):
        for k, phase in enumerate(PHASES):
            if phase not in solution.energized[bus]:
                continue
            writer.writerow(
                [
                    bus,
                    phase.value,
                    f"{solution.magnitudes[row, k]:.8f}",
                    str((bus, phase) not in out_of_band).lower(),
                ]
            )
    _write_atomic(cfg.report, buffer.getvalue())
    _log(
        f"powerflow: {solution.iterations} iteration(s), "
        f"mismatch {solution.max_mismatch:.2e} p.u., {len(out_of_band)} out of band"
    )
    return 1 if out_of_band else 0


def _read_sample_dir(directory: Path):
    paths = sorted(directory.glob("sample_*.json"), key=lambda p: p.name)
    if not paths:
        raise ValidationError(f"no sample_*.json files in {directory}")
    return [load_observed_network(path.read_bytes()) for path in paths]


def _write_report_files(report, cfg: RunConfig) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["phase", "mean_kw_real", "mean_kw_synth", "mape_percent"])
    for row in report.phase_rows:
        writer.writerow(
            [
                row.phase.value,
                f"{row.mean_kw_real:.6f}",
                f"{row.mean_kw_synth:.6f}",
                f"{row.mape_percent:.6f}",
            ]
        )
    _write_atomic(cfg.out, buffer.getvalue())
    _write_atomic(
        cfg.out.with_suffix(".json"), json.dumps(report_to_dict(report), indent=2) + "\n"
    )
    if cfg.histograms is not None:
        for name, payload in sorted(report.histograms.items()):
            hist_buffer = io.StringIO()
            hist_writer = csv.writer(hist_buffer)
            hist_writer.writerow(["bin_lower", "bin_upper", "count"])
            for lower, upper, count in payload:
                hist_writer.writerow([f"{lower:.9g}", f"{upper:.9g}", count])
            _write_atomic(cfg.histograms / f"{name}.csv", hist_buffer.getvalue())
        render_phase_histograms(report, cfg.histograms)


def _cmd_report(cfg: RunConfig) -> int:
    with _Stage("report"):
        real = load_observed_network(cfg.real.read_bytes())
        synthetic = _read_sample_dir(cfg.synthetic_dir)
        report = build_report(real, synthetic)
        _write_report_files(report, cfg)
    return 0


def _cmd_pipeline(cfg: RunConfig) -> int:
    out_dir = cfg.out_dir
    observed = load_observed_network(cfg.observed.read_bytes())
    topology = load_topology(cfg.topology.read_bytes())

    with _Stage("fit"):
        params = _apply_scenario(fit(observed, cfg.n_bins), cfg.scenario)
        _write_atomic(out_dir / "params.json", params_to_json(params) + "\n")

    jobs = cfg.jobs if cfg.jobs is not None else os.cpu_count()
    with _Stage(f"generate {cfg.n_samples} samples"):
        samples = generate(topology, params, cfg.n_samples, cfg.seed, jobs=jobs)
        sample_obs = []
        for sample in samples:
            obs = sample.to_observed()
            sample_obs.append(obs)
            _write_atomic(
                out_dir / "samples" / f"sample_{sample.sample_index}.json",
                json.dumps(observed_to_dict(obs), indent=2) + "\n",
            )

    lo, hi = cfg.band
    impedance = LineImpedance(cfg.r_ohm_km, cfg.x_ohm_km, allow_zero=True)
    any_out_of_band = False
    with _Stage("powerflow"):
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(
            ["sample", "iterations", "max_mismatch", "min_v_pu", "max_v_pu", "out_of_band"]
        )
        for sample in samples:
            solution = run_power_flow(
                topology, sample, impedance=impedance, tol=cfg.tol, max_iter=cfg.max_iter
            )
            violations = voltage_band_report(solution, lo, hi)
            any_out_of_band = any_out_of_band or bool(violations)
            energized_mags = [
                solution.magnitudes[row, k]
                for row, bus in enumerate(solution.bus_ids)
                for k, phase in enumerate(PHASES)
                if phase in solution.energized[bus]
            ]
            writer.writerow(
                [
                    sample.sample_index,
                    solution.iterations,
                    f"{solution.max_mismatch:.3e}",
                    f"{min(energized_mags):.8f}",
                    f"{max(energized_mags):.8f}",
                    len(violations),
                ]
            )
        _write_atomic(out_dir / "powerflow" / "pf_summary.csv", buffer.getvalue())

    with _Stage("report"):
        report = build_report(observed, sample_obs)
        report_cfg = RunConfig(
            subcommand="report",
            out=out_dir / "report.csv",
            histograms=out_dir / "hist",
        )
        _write_report_files(report, report_cfg)

    return 1 if any_out_of_band else 0


_HANDLERS = {
    "fit": _cmd_fit,
    "generate": _cmd_generate,
    "check": _cmd_check,
    "enforce": _cmd_enforce,
    "powerflow": _cmd_powerflow,
    "report": _cmd_report,
    "pipeline": _cmd_pipeline,
}


def run(argv: list[str] | None = None) -> int:
    """Parse argv and execute one subcommand, returning the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    cfg = _config_from_args(args)
    try:
        return _HANDLERS[cfg.subcommand](cfg)
    except (ValueError, PowerFlowError, OSError) as exc:
        print(f"gridsynth: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
