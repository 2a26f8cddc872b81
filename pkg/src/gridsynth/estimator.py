"""Fit model parameters from an observed network.

Loads are classified by the support of their active-power vector: strictly
positive demand on all three phases means three-phase, on exactly one phase
single-phase.  Two-phase or all-zero loads contribute to totals (bin counts,
all-load demand pools) but to neither class-specific estimate.  Count-based
probabilities use add-one smoothing, playing the role of a posterior mean
under a uniform prior and keeping every probability strictly inside (0, 1).
All estimators are pure functions of immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

import numpy as np

from .params import (
    CONCENTRATION_MAX,
    CONCENTRATION_MIN,
    DEFAULT_PF_TABLE,
    DemandMoments,
    DistanceBinCurve,
    ModelParameters,
    Moment,
    PhaseChoiceProbs,
    RatioParams,
)
from .topology import PHASES, ObservedLoad, ObservedNetwork, Phase, normalized_distance

DEFAULT_N_BINS = 20


class EstimationError(ValueError):
    """The observed data cannot support the requested estimate."""


def classify_load(load: ObservedLoad) -> Phase | str | None:
    """'three' for three-phase support, the Phase for single-phase support,
    None otherwise."""
    support = load.demand.support()
    if len(support) == 3:
        return "three"
    if len(support) == 1:
        return next(iter(support))
    return None


def estimate_p3_curve(
    obs: ObservedNetwork, n_bins: int = DEFAULT_N_BINS, interpolate_empty: bool = False
) -> DistanceBinCurve:
    """Bin loads by normalized feeder distance and estimate the per-bin
    probability of being three-phase.

    ``joint_mass`` divides per-bin three-phase counts by the total load count
    (so the curve sums to the overall three-phase fraction); ``conditional_p3``
    is the smoothed per-bin ratio ``(n3+1)/(n+2)`` actually used for sampling.
    With ``interpolate_empty``, bins holding no loads take linearly
    interpolated probabilities from their nearest populated neighbours instead
    of the smoothed prior value 0.5.
    """
    if n_bins < 1:
        raise EstimationError(f"n_bins must be >= 1, got {n_bins}")
    loads = obs.observed_loads
    if not loads:
        raise EstimationError("observed network has no loads")

    n3 = [0] * n_bins
    n_total = [0] * n_bins
    for load in loads:
        d = normalized_distance(obs.topology, load.bus)
        k = min(int(d * n_bins), n_bins - 1)
        n_total[k] += 1
        if classify_load(load) == "three":
            n3[k] += 1

    conditional = [(n3[k] + 1) / (n_total[k] + 2) for k in range(n_bins)]
    if interpolate_empty:
        conditional = _interpolate_empty_bins(conditional, n_total)
    joint = [n3[k] / len(loads) for k in range(n_bins)]
    return DistanceBinCurve(
        bin_edges=tuple(i / n_bins for i in range(n_bins + 1)),
        conditional_p3=tuple(conditional),
        joint_mass=tuple(joint),
        counts=tuple(zip(n3, n_total)),
    )


def _interpolate_empty_bins(conditional: list[float], n_total: list[int]) -> list[float]:
    populated = [k for k, n in enumerate(n_total) if n > 0]
    if not populated:
        return conditional
    xs = np.array(populated, dtype=float)
    ys = np.array([conditional[k] for k in populated])
    out = list(conditional)
    for k, n in enumerate(n_total):
        if n == 0:
            out[k] = float(np.interp(k, xs, ys))
    return out


def estimate_phase_choice(obs: ObservedNetwork) -> PhaseChoiceProbs:
    """Smoothed single-phase allocation probabilities: (count+1) / (n_single+3)."""
    counts = {phase: 0 for phase in PHASES}
    for load in obs.observed_loads:
        cls = classify_load(load)
        if isinstance(cls, Phase):
            counts[cls] += 1
    n_single = sum(counts.values())
    return PhaseChoiceProbs(
        a=(counts[Phase.A] + 1) / (n_single + 3),
        b=(counts[Phase.B] + 1) / (n_single + 3),
        c=(counts[Phase.C] + 1) / (n_single + 3),
    )


def _moment(values: list[float]) -> Moment:
    mu = float(np.mean(values))
    sigma = float(np.std(values, ddof=1)) if len(values) >= 2 else 0.0
    if mu <= 0:
        raise EstimationError("demand mean is not positive; data is degenerate")
    return Moment(mu=mu, sigma=sigma)


def estimate_demand_moments(obs: ObservedNetwork) -> DemandMoments:
    """Sample moments of total active power: over three-phase loads for the
    three-phase slot, over single-phase loads per phase otherwise.

    A slot with no loads of its class falls back to the moments of total
    demand across all loads.
    """
    all_totals = [load.demand.total_kw() for load in obs.observed_loads]
    three_totals: list[float] = []
    per_phase: dict[Phase, list[float]] = {phase: [] for phase in PHASES}
    for load in obs.observed_loads:
        cls = classify_load(load)
        if cls == "three":
            three_totals.append(load.demand.total_kw())
        elif isinstance(cls, Phase):
            per_phase[cls].append(load.demand.total_kw())

    fallback = _moment(all_totals)
    return DemandMoments(
        three_phase=_moment(three_totals) if three_totals else fallback,
        per_phase=tuple(
            _moment(per_phase[phase]) if per_phase[phase] else fallback for phase in PHASES
        ),
    )


def estimate_ratio_params(obs: ObservedNetwork) -> RatioParams:
    """Mean phase-ratio vector of three-phase loads, with the Dirichlet
    concentration fitted by method of moments from the first coordinate's
    sample variance and clamped to [1, 10000]."""
    ratios = []
    for load in obs.observed_loads:
        if classify_load(load) == "three":
            total = load.demand.total_kw()
            ratios.append([p / total for p in load.demand.p_kw])
    if not ratios:
        raise EstimationError(
            "no three-phase loads observed; supply RatioParams (mean, concentration) manually"
        )
    arr = np.array(ratios)
    mean = arr.mean(axis=0)
    mean = mean / mean.sum()
    var_a = float(arr[:, 0].var(ddof=1)) if len(ratios) >= 2 else 0.0
    if var_a > 0:
        kappa = float(mean[0] * (1.0 - mean[0]) / var_a - 1.0)
    else:
        kappa = CONCENTRATION_MAX
    kappa = min(max(kappa, CONCENTRATION_MIN), CONCENTRATION_MAX)
    return RatioParams(mean=tuple(float(m) for m in mean), concentration=kappa)


def fit(obs: ObservedNetwork, n_bins: int = DEFAULT_N_BINS) -> ModelParameters:
    """Estimate the full parameter set from one observed network."""
    return ModelParameters(
        curve=estimate_p3_curve(obs, n_bins),
        phase_choice=estimate_phase_choice(obs),
        demand=estimate_demand_moments(obs),
        ratios=estimate_ratio_params(obs),
        pf_table=DEFAULT_PF_TABLE,
    )


def pool_observed(networks: list[ObservedNetwork]) -> ObservedNetwork:
    """Concatenate the loads of several observations that share one topology,
    e.g. to refit a batch of generated samples as a single dataset."""
    if not networks:
        raise EstimationError("no observed networks to pool")
    topology = networks[0].topology
    for net in networks[1:]:
        if net.topology.bus_ids != topology.bus_ids:
            raise EstimationError("pooled networks must share a topology")
    loads = tuple(load for net in networks for load in net.observed_loads)
    return ObservedNetwork(topology=topology, observed_loads=loads)
