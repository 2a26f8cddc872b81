"""Real-vs-synthetic comparison: MAPE, parameter tables, histogram payloads."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .estimator import classify_load
from .topology import PHASES, ObservedNetwork, Phase


def mape(reference: Sequence[float], estimate: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent: (100/n) * sum(|r-e| / |r|)."""
    if len(reference) != len(estimate):
        raise ValueError(
            f"length mismatch: {len(reference)} reference vs {len(estimate)} estimate"
        )
    if len(reference) == 0:
        raise ValueError("mape requires at least one pair")
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if np.any(ref == 0):
        raise ValueError("reference contains a zero entry; MAPE is undefined")
    return float(100.0 * np.mean(np.abs(ref - est) / np.abs(ref)))


def histogram(
    values: Sequence[float], n_bins: int, lo: float, hi: float
) -> tuple[tuple[float, float, int], ...]:
    """Uniform-bin histogram payload as (bin_lower, bin_upper, count) rows.

    Values outside [lo, hi] are clamped into the end bins, so counts always
    sum to ``len(values)``.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if lo >= hi:
        raise ValueError(f"range must satisfy lo < hi, got [{lo}, {hi}]")
    edges = np.linspace(lo, hi, n_bins + 1)
    counts = np.zeros(n_bins, dtype=int)
    if len(values) > 0:
        arr = np.asarray(values, dtype=float)
        bins = np.clip(((arr - lo) / (hi - lo) * n_bins).astype(int), 0, n_bins - 1)
        np.add.at(counts, bins, 1)
    return tuple(
        (float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(n_bins)
    )


@dataclass(frozen=True)
class ParameterSummary:
    """Dataset-level quantities compared between real and synthetic data."""

    p3_fraction: float
    phase_choice: tuple[float, float, float]
    mean_kw: tuple[float, float, float]

    @classmethod
    def from_observed(cls, networks: Sequence[ObservedNetwork]) -> "ParameterSummary":
        """Pool every load of the given networks into one summary.

        The per-phase mean is taken over loads carrying positive power on
        that phase; the phase-choice probabilities use the same smoothed
        estimate as fitting.
        """
        loads = [load for net in networks for load in net.observed_loads]
        if not loads:
            raise ValueError("no loads to summarize")
        n_three = sum(1 for load in loads if classify_load(load) == "three")
        counts = {phase: 0 for phase in PHASES}
        for load in loads:
            cls_ = classify_load(load)
            if isinstance(cls_, Phase):
                counts[cls_] += 1
        n_single = sum(counts.values())
        choice = tuple((counts[phase] + 1) / (n_single + 3) for phase in PHASES)
        means = []
        for k in range(3):
            values = [load.demand.p_kw[k] for load in loads if load.demand.p_kw[k] > 0]
            means.append(float(np.mean(values)) if values else 0.0)
        return cls(
            p3_fraction=n_three / len(loads),
            phase_choice=choice,  # type: ignore[arg-type]
            mean_kw=tuple(means),  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class ParameterRow:
    name: str
    real: float
    synthetic: float


def compare_parameters(
    real: ParameterSummary, synthetic: ParameterSummary
) -> list[ParameterRow]:
    """Rows for the three-phase fraction and the per-phase allocation probabilities."""
    rows = [ParameterRow("p_3phase", real.p3_fraction, synthetic.p3_fraction)]
    for i, phase in enumerate(PHASES):
        rows.append(
            ParameterRow(f"p_phase_{phase.value}", real.phase_choice[i], synthetic.phase_choice[i])
        )
    return rows


@dataclass(frozen=True)
class PhaseMeansRow:
    phase: Phase
    mean_kw_real: float
    mean_kw_synth: float
    mape_percent: float


@dataclass(frozen=True)
class ComparisonReport:
    phase_rows: tuple[PhaseMeansRow, ...]
    parameter_rows: tuple[ParameterRow, ...]
    histograms: dict
    mape_mode: str


def build_report(
    real: ObservedNetwork,
    synthetic: Sequence[ObservedNetwork],
    n_hist_bins: int = 30,
) -> ComparisonReport:
    """Compare one real network against a pool of synthetic samples.

    The per-phase MAPE pairs individual load values when real and synthetic
    datasets happen to have equally many loads on the phase, and otherwise
    falls back to the single pair of per-phase means; the mode used is
    recorded on the report.
    """
    real_summary = ParameterSummary.from_observed([real])
    synth_summary = ParameterSummary.from_observed(synthetic)

    real_values = _per_phase_values([real])
    synth_values = _per_phase_values(synthetic)
    paired = all(
        len(real_values[k]) == len(synth_values[k]) and len(real_values[k]) > 0
        for k in range(3)
    )
    mode = "paired_loads" if paired else "mean_pair"

    phase_rows = []
    for k, phase in enumerate(PHASES):
        mean_real = real_summary.mean_kw[k]
        mean_synth = synth_summary.mean_kw[k]
        if paired:
            error = mape(sorted(real_values[k]), sorted(synth_values[k]))
        else:
            error = mape([mean_real], [mean_synth]) if mean_real != 0 else 0.0
        phase_rows.append(
            PhaseMeansRow(
                phase=phase,
                mean_kw_real=mean_real,
                mean_kw_synth=mean_synth,
                mape_percent=error,
            )
        )

    hi = max(
        [v for values in real_values for v in values]
        + [v for values in synth_values for v in values]
        + [1e-9]
    )
    histograms = {}
    for k, phase in enumerate(PHASES):
        histograms[f"p_kw_{phase.value}_real"] = histogram(real_values[k], n_hist_bins, 0.0, hi)
        histograms[f"p_kw_{phase.value}_synthetic"] = histogram(
            synth_values[k], n_hist_bins, 0.0, hi
        )

    return ComparisonReport(
        phase_rows=tuple(phase_rows),
        parameter_rows=tuple(compare_parameters(real_summary, synth_summary)),
        histograms=histograms,
        mape_mode=mode,
    )


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "mape_mode": report.mape_mode,
        "phases": [
            {
                "phase": row.phase.value,
                "mean_kw_real": row.mean_kw_real,
                "mean_kw_synth": row.mean_kw_synth,
                "mape_percent": row.mape_percent,
            }
            for row in report.phase_rows
        ],
        "parameters": [
            {"name": row.name, "real": row.real, "synthetic": row.synthetic}
            for row in report.parameter_rows
        ],
        "histograms": {
            name: [list(row) for row in payload]
            for name, payload in sorted(report.histograms.items())
        },
    }


def _per_phase_values(networks: Sequence[ObservedNetwork]) -> list[list[float]]:
    values: list[list[float]] = [[], [], []]
    for net in networks:
        for load in net.observed_loads:
            for k in range(3):
                if load.demand.p_kw[k] > 0:
                    values[k].append(load.demand.p_kw[k])
    return values
