"""Fitted model parameters: probability curve, phase probabilities, demand moments,
ratio parameters, power-factor table, and their JSON document format."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .topology import PHASES, Phase, SchemaError

SIMPLEX_TOL = 1e-12
CONCENTRATION_MIN = 1.0
CONCENTRATION_MAX = 10000.0
#: Used for user-supplied ratio means that come without a fitted concentration.
DEFAULT_CONCENTRATION = 100.0


@dataclass(frozen=True)
class DistanceBinCurve:
    """Probability of a load being three-phase, binned by normalized feeder distance.

    ``conditional_p3`` holds the per-bin smoothed conditional probability used
    for sampling; ``joint_mass`` holds the per-bin three-phase count divided by
    the total load count (so it sums to the overall three-phase fraction);
    ``counts`` holds the raw (three-phase, total) pairs per bin.  Curves built
    from data satisfy ``conditional_p3[k] == (n3[k]+1) / (n[k]+2)``; curves
    specified directly (scenario input) may carry zero counts and any
    probabilities in [0, 1].
    """

    bin_edges: tuple[float, ...]
    conditional_p3: tuple[float, ...]
    joint_mass: tuple[float, ...]
    counts: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        k = len(self.conditional_p3)
        if k < 1:
            raise ValueError("curve needs at least one bin")
        if len(self.bin_edges) != k + 1:
            raise ValueError("bin_edges must have one more entry than there are bins")
        if len(self.joint_mass) != k or len(self.counts) != k:
            raise ValueError("conditional_p3, joint_mass and counts must have equal length")
        edges = self.bin_edges
        if abs(edges[0]) > SIMPLEX_TOL or abs(edges[-1] - 1.0) > SIMPLEX_TOL:
            raise ValueError("bin edges must cover [0, 1]")
        if any(edges[i] >= edges[i + 1] for i in range(k)):
            raise ValueError("bin edges must be strictly increasing")
        if any(p < 0 or p > 1 for p in self.conditional_p3):
            raise ValueError("conditional probabilities must lie in [0, 1]")
        if any(m < 0 for m in self.joint_mass):
            raise ValueError("joint_mass entries must be non-negative")
        n_total = sum(n for _, n in self.counts)
        if n_total > 0:
            n3_total = sum(n3 for n3, _ in self.counts)
            if abs(sum(self.joint_mass) - n3_total / n_total) > SIMPLEX_TOL:
                raise ValueError("joint_mass must sum to the three-phase fraction")
            # empty bins may carry the prior or an interpolated value instead
            for (n3, n), p in zip(self.counts, self.conditional_p3):
                if n > 0 and abs(p - (n3 + 1) / (n + 2)) > SIMPLEX_TOL:
                    raise ValueError("conditional_p3 inconsistent with smoothed counts")

    @property
    def n_bins(self) -> int:
        return len(self.conditional_p3)

    def bin_index(self, d: float) -> int:
        if d < 0 or d > 1:
            raise ValueError(f"normalized distance must lie in [0, 1], got {d}")
        return min(int(d * self.n_bins), self.n_bins - 1)

    def p3_at(self, d: float) -> float:
        return self.conditional_p3[self.bin_index(d)]

    @classmethod
    def from_probabilities(cls, conditional_p3) -> "DistanceBinCurve":
        """Uniform-bin curve from explicit per-bin probabilities (no fitted counts)."""
        probs = tuple(float(p) for p in conditional_p3)
        k = len(probs)
        edges = tuple(i / k for i in range(k + 1))
        return cls(
            bin_edges=edges,
            conditional_p3=probs,
            joint_mass=(0.0,) * k,
            counts=((0, 0),) * k,
        )


@dataclass(frozen=True)
class PhaseChoiceProbs:
    """Probability that a single-phase load lands on phase A / B / C."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        values = (self.a, self.b, self.c)
        if any(v < 0 or v > 1 for v in values):
            raise ValueError(f"phase probabilities must lie in [0, 1]: {values}")
        if abs(sum(values) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"phase probabilities must sum to 1: {values}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)

    def for_phase(self, phase: Phase) -> float:
        return self.as_tuple()[PHASES.index(phase)]


@dataclass(frozen=True)
class Moment:
    """Mean (kW, > 0) and standard deviation (kW, >= 0) of one demand slot."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class DemandMoments:
    """Demand moments: one slot per phase for single-phase loads, one for
    three-phase totals."""

    three_phase: Moment
    per_phase: tuple[Moment, Moment, Moment]

    def for_phase(self, phase: Phase) -> Moment:
        return self.per_phase[PHASES.index(phase)]


@dataclass(frozen=True)
class RatioParams:
    """Mean phase-ratio vector (on the 3-simplex) and Dirichlet concentration."""

    mean: tuple[float, float, float]
    concentration: float

    def __post_init__(self) -> None:
        if any(m < 0 for m in self.mean):
            raise ValueError(f"ratio means must be non-negative: {self.mean}")
        if abs(sum(self.mean) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"ratio means must sum to 1: {self.mean}")
        if self.concentration <= 0:
            raise ValueError(f"concentration must be > 0, got {self.concentration}")


@dataclass(frozen=True)
class PowerFactorTable:
    """Threshold table mapping one uniform draw to a network power factor."""

    entries: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("power-factor table must have at least one entry")
        thresholds = [t for t, _ in self.entries]
        if any(t <= 0 or t > 1 for t in thresholds):
            raise ValueError("thresholds must lie in (0, 1]")
        if any(thresholds[i] >= thresholds[i + 1] for i in range(len(thresholds) - 1)):
            raise ValueError("thresholds must be strictly increasing")
        if thresholds[-1] != 1.0:
            raise ValueError("final threshold must be 1.0")
        if any(pf <= 0 or pf > 1 for _, pf in self.entries):
            raise ValueError("power factors must lie in (0, 1]")

    def pf_for_uniform(self, u):
        """Power factor for uniform draw(s) ``u``: the first entry with u <= threshold."""
        thresholds = np.array([t for t, _ in self.entries])
        pfs = np.array([pf for _, pf in self.entries])
        index = np.searchsorted(thresholds, u, side="left")
        result = pfs[np.minimum(index, len(pfs) - 1)]
        return float(result) if np.isscalar(u) else result


#: The three-way table of the sampling rule: 0.85 up to 0.1649, 0.90 up to 0.27, else 0.95.
DEFAULT_PF_TABLE = PowerFactorTable(((0.1649, 0.85), (0.27, 0.90), (1.0, 0.95)))


@dataclass(frozen=True)
class ModelParameters:
    curve: DistanceBinCurve
    phase_choice: PhaseChoiceProbs
    demand: DemandMoments
    ratios: RatioParams
    pf_table: PowerFactorTable = DEFAULT_PF_TABLE


def with_ratio_mean(
    params: ModelParameters,
    mean: tuple[float, float, float],
    concentration: float | None = None,
) -> ModelParameters:
    """Override the ratio layer, e.g. for balanced/unbalanced scenario runs."""
    kappa = DEFAULT_CONCENTRATION if concentration is None else concentration
    return replace(params, ratios=RatioParams(mean=mean, concentration=kappa))


# -- JSON document -------------------------------------------------------

def params_to_dict(params: ModelParameters) -> dict:
    return {
        "curve": {
            "bin_edges": list(params.curve.bin_edges),
            "conditional_p3": list(params.curve.conditional_p3),
            "joint_mass": list(params.curve.joint_mass),
            "counts": [list(pair) for pair in params.curve.counts],
        },
        "phase_choice": {
            "A": params.phase_choice.a,
            "B": params.phase_choice.b,
            "C": params.phase_choice.c,
        },
        "demand": {
            "three_phase": {"mu": params.demand.three_phase.mu, "sigma": params.demand.three_phase.sigma},
            "per_phase": {
                phase.value: {"mu": m.mu, "sigma": m.sigma}
                for phase, m in zip(PHASES, params.demand.per_phase)
            },
        },
        "ratios": {
            "mean": {phase.value: params.ratios.mean[i] for i, phase in enumerate(PHASES)},
            "concentration": params.ratios.concentration,
        },
        "pf_table": [{"threshold": t, "pf": pf} for t, pf in params.pf_table.entries],
    }


def params_from_dict(doc: dict) -> ModelParameters:
    try:
        curve = DistanceBinCurve(
            bin_edges=tuple(doc["curve"]["bin_edges"]),
            conditional_p3=tuple(doc["curve"]["conditional_p3"]),
            joint_mass=tuple(doc["curve"]["joint_mass"]),
            counts=tuple((int(n3), int(n)) for n3, n in doc["curve"]["counts"]),
        )
        choice = PhaseChoiceProbs(
            a=float(doc["phase_choice"]["A"]),
            b=float(doc["phase_choice"]["B"]),
            c=float(doc["phase_choice"]["C"]),
        )
        demand = DemandMoments(
            three_phase=Moment(**doc["demand"]["three_phase"]),
            per_phase=tuple(Moment(**doc["demand"]["per_phase"][p.value]) for p in PHASES),
        )
        ratios = RatioParams(
            mean=tuple(float(doc["ratios"]["mean"][p.value]) for p in PHASES),
            concentration=float(doc["ratios"].get("concentration", DEFAULT_CONCENTRATION)),
        )
        pf_table = PowerFactorTable(
            entries=tuple((float(e["threshold"]), float(e["pf"])) for e in doc["pf_table"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid parameters document: {exc}") from exc
    return ModelParameters(
        curve=curve, phase_choice=choice, demand=demand, ratios=ratios, pf_table=pf_table
    )


def params_to_json(params: ModelParameters) -> str:
    return json.dumps(params_to_dict(params), indent=2)


def params_from_json(text: str | bytes) -> ModelParameters:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON document: {exc}") from exc
    return params_from_dict(doc)
