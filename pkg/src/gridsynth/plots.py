"""Render report histograms to PNG files.

Figures are a presentation layer over the histogram payloads; the delimited
data files remain the canonical output.  Rendering is deterministic (Agg
backend, fixed dpi, no autogenerated metadata) so repeated runs produce
byte-identical images.
"""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import ComparisonReport
from .topology import PHASES

_DPI = 120
_PNG_METADATA = {"Software": None}


def _save_atomic(fig, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format="png", dpi=_DPI, metadata=_PNG_METADATA)
    os.replace(tmp, path)


def _bars(ax, payload, color, label):
    lefts = [row[0] for row in payload]
    widths = [row[1] - row[0] for row in payload]
    counts = [row[2] for row in payload]
    ax.bar(lefts, counts, width=widths, align="edge", color=color, alpha=0.6, label=label)


def render_phase_histograms(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    """One real-vs-synthetic active-power histogram figure per phase."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for phase in PHASES:
        real = report.histograms[f"p_kw_{phase.value}_real"]
        synth = report.histograms[f"p_kw_{phase.value}_synthetic"]
        fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharex=True)
        _bars(axes[0], real, "tab:blue", "real")
        _bars(axes[1], synth, "tab:orange", "synthetic")
        axes[0].set_title(f"Phase {phase.value} - real")
        axes[1].set_title(f"Phase {phase.value} - synthetic")
        for ax in axes:
            ax.set_xlabel("active power (kW)")
            ax.set_ylabel("loads")
        fig.tight_layout()
        path = out_dir / f"active_power_{phase.value}.png"
        _save_atomic(fig, path)
        plt.close(fig)
        written.append(path)
    return written


def render_histogram(payload, path: str | Path, title: str, xlabel: str) -> Path:
    """Render one histogram payload to a PNG file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3))
    _bars(ax, payload, "tab:blue", None)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)
    return path
