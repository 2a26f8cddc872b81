"""The generative model: draw load type, phase choice, phase ratios, total demand
and power factor, then allocate per-phase active/reactive power onto a topology.

Every draw comes from a substream keyed by (seed, sample index, lane, load
index), so samples are bit-exact reproducible and independent of execution
order; generating in parallel and serially yields identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .consistency import assignment_from_loads, enforce_consistency
from .params import (
    DistanceBinCurve,
    ModelParameters,
    Moment,
    PhaseChoiceProbs,
    PowerFactorTable,
    RatioParams,
)
from .rng import RngStream
from .topology import (
    ALL_PHASES,
    PHASES,
    LoadDemand,
    NetworkTopology,
    ObservedLoad,
    ObservedNetwork,
    Phase,
    normalized_distance,
)

# substream lanes under one sample's stream
_LANE_SAMPLE = 0  # network-wide draws (power factor)
_LANE_LOAD = 1    # per-load draws

# gamma shapes must stay positive even for degenerate ratio means like (1, 0, 0)
_MIN_GAMMA_SHAPE = 1e-6
_TINY_KW = float(np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class PhaseDraw:
    """Outcome of the per-load hierarchy before power allocation."""

    is_three_phase: bool
    total_kw: float
    single_phase: Phase | None = None
    ratios: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.is_three_phase == (self.ratios is None):
            raise ValueError("three-phase draws carry ratios; single-phase draws a phase")
        if self.is_three_phase == (self.single_phase is not None):
            raise ValueError("exactly one of single_phase / ratios must be present")
        if self.total_kw <= 0:
            raise ValueError(f"total_kw must be > 0, got {self.total_kw}")
        if self.ratios is not None and abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1: {self.ratios}")


@dataclass(frozen=True)
class SampleLoad:
    bus: str
    phases: frozenset
    demand: LoadDemand


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    """One generated network instance: per-load phases and demands plus the
    repaired bus-level phase assignment."""

    topology: NetworkTopology
    loads: tuple[SampleLoad, ...]
    bus_phases: dict
    pf: float
    seed: int
    sample_index: int

    def to_observed(self) -> ObservedNetwork:
        """Serializable view: each load reports its bus's repaired phase set,
        demands untouched, so emitted samples are phase-consistent and still
        refittable (estimation classifies by demand support)."""
        observed = tuple(
            ObservedLoad(
                bus=load.bus,
                phases=self.bus_phases.get(load.bus, load.phases),
                demand=load.demand,
            )
            for load in self.loads
        )
        return ObservedNetwork(topology=self.topology, observed_loads=observed)


def sample_phase_count(d: float, curve: DistanceBinCurve, rng: RngStream) -> bool:
    """True (three-phase) with the curve's conditional probability at ``d``'s bin."""
    return bool(rng.uniform() < curve.p3_at(d))


def sample_phase_choice(probs: PhaseChoiceProbs, rng: RngStream) -> Phase:
    """Inverse-CDF draw of A/B/C from one uniform."""
    u = rng.uniform()
    if u < probs.a:
        return Phase.A
    if u < probs.a + probs.b:
        return Phase.B
    return Phase.C


def sample_phase_ratios(ratios: RatioParams, rng: RngStream, size: int | None = None):
    """Dirichlet draw(s) with concentration ``kappa * mean``: three unit-scale
    gamma draws normalized by their sum.  Returns a triple, or an (n, 3) array
    when ``size`` is given."""
    alphas = np.maximum(np.array(ratios.mean) * ratios.concentration, _MIN_GAMMA_SHAPE)
    if size is None:
        draws = rng.standard_gamma(alphas)
        total = draws.sum()
        if total <= 0:
            return tuple(ratios.mean)
        return tuple(float(v) for v in draws / total)
    draws = rng.standard_gamma(np.broadcast_to(alphas, (size, 3)))
    totals = draws.sum(axis=1, keepdims=True)
    degenerate = totals[:, 0] <= 0
    if degenerate.any():
        draws[degenerate] = alphas
        totals = draws.sum(axis=1, keepdims=True)
    return draws / totals


def sample_total_demand(moment: Moment, rng: RngStream, size: int | None = None):
    """Draw from Normal(mu, sigma) truncated to (0, inf) by inverse CDF.

    ``sigma == 0`` returns mu exactly.  One uniform is consumed per draw, so
    the stream advances by a fixed amount regardless of the outcome.
    """
    if moment.sigma == 0:
        return moment.mu if size is None else np.full(size, moment.mu)
    lower = ndtr(-moment.mu / moment.sigma)  # CDF mass below the zero bound
    u = rng.uniform(size)
    x = moment.mu + moment.sigma * ndtri(lower + (1.0 - lower) * u)
    # u == 0 maps to the truncation boundary; keep draws strictly positive
    x = np.maximum(x, _TINY_KW)
    return float(x) if size is None else x


def sample_power_factor(table: PowerFactorTable, rng: RngStream) -> float:
    """One uniform draw mapped through the threshold table."""
    return table.pf_for_uniform(float(rng.uniform()))


def split_three_phase(total_kw: float, ratios: tuple[float, float, float]) -> tuple[float, float, float]:
    """Allocate a three-phase total across A/B/C by the drawn ratios."""
    return (ratios[0] * total_kw, ratios[1] * total_kw, ratios[2] * total_kw)


def reactive_from_active(p_kw: tuple[float, float, float], pf: float) -> tuple[float, float, float]:
    """Q = P * tan(arccos(PF)), elementwise."""
    factor = math.tan(math.acos(pf))
    return (p_kw[0] * factor, p_kw[1] * factor, p_kw[2] * factor)


def draw_load(
    d: float, params: ModelParameters, rng: RngStream
) -> PhaseDraw:
    """Run the per-load hierarchy: load type, then phase/ratios, then total demand.

    Three-phase loads draw their total from the three-phase moment slot and
    split it by ratios; single-phase loads draw from the chosen phase's slot.
    """
    if sample_phase_count(d, params.curve, rng):
        ratios = sample_phase_ratios(params.ratios, rng)
        total = sample_total_demand(params.demand.three_phase, rng)
        return PhaseDraw(is_three_phase=True, total_kw=total, ratios=ratios)
    phase = sample_phase_choice(params.phase_choice, rng)
    total = sample_total_demand(params.demand.for_phase(phase), rng)
    return PhaseDraw(is_three_phase=False, total_kw=total, single_phase=phase)


def allocate_loads(
    topology: NetworkTopology,
    params: ModelParameters,
    rng: RngStream,
    per_load_pf: bool = False,
) -> SyntheticSample:
    """Draw phases and demands for every load of ``topology`` and repair the
    bus-level assignment for phase consistency.

    ``rng`` is the sample-level stream (seed plus sample index); per-load
    substreams branch off it, so the result only depends on (seed, sample
    index, parameters, topology).  By default one power factor is drawn for
    the whole network; ``per_load_pf`` draws one per load instead (the
    sample's ``pf`` is then NaN).
    """
    pf = sample_power_factor(params.pf_table, rng.substream(_LANE_SAMPLE, 0))
    ordered = sorted(range(len(topology.loads)), key=lambda i: (topology.loads[i], i))

    loads: list[SampleLoad] = []
    for j, load_index in enumerate(ordered):
        bus = topology.loads[load_index]
        load_rng = rng.substream(_LANE_LOAD, j)
        draw = draw_load(normalized_distance(topology, bus), params, load_rng)
        if draw.is_three_phase:
            p = split_three_phase(draw.total_kw, draw.ratios)
            phases = ALL_PHASES
        else:
            p = tuple(
                draw.total_kw if phase is draw.single_phase else 0.0 for phase in PHASES
            )
            phases = frozenset({draw.single_phase})
        load_pf = sample_power_factor(params.pf_table, load_rng) if per_load_pf else pf
        demand = LoadDemand(p_kw=p, q_kvar=reactive_from_active(p, load_pf))
        loads.append(SampleLoad(bus=bus, phases=phases, demand=demand))

    drawn: dict[str, frozenset] = {}
    for load in loads:
        drawn[load.bus] = drawn.get(load.bus, frozenset()) | load.phases
    bus_phases = enforce_consistency(topology, assignment_from_loads(topology, drawn))

    sample_index = rng.path[0] if rng.path else 0
    return SyntheticSample(
        topology=topology,
        loads=tuple(loads),
        bus_phases=bus_phases,
        pf=float("nan") if per_load_pf else pf,
        seed=rng.seed,
        sample_index=sample_index,
    )


def generate_one(
    topology: NetworkTopology,
    params: ModelParameters,
    seed: int,
    sample_index: int,
    per_load_pf: bool = False,
) -> SyntheticSample:
    return allocate_loads(topology, params, RngStream(seed, (sample_index,)), per_load_pf)


def generate(
    topology: NetworkTopology,
    params: ModelParameters,
    n_samples: int,
    seed: int,
    jobs: int | None = None,
    per_load_pf: bool = False,
) -> list[SyntheticSample]:
    """Generate ``n_samples`` phase-consistent samples.

    Sample ``i`` uses the substream derived from (seed, i); results are
    identical whether produced serially or with ``jobs`` worker threads.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    indices = range(n_samples)
    if jobs is None or jobs <= 1 or n_samples == 1:
        return [generate_one(topology, params, seed, i, per_load_pf) for i in indices]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(
            pool.map(lambda i: generate_one(topology, params, seed, i, per_load_pf), indices)
        )


def sample_from_observed(obs: ObservedNetwork) -> SyntheticSample:
    """View an observed network as a sample (for power flow and consistency
    tooling on files): bus phases are the repaired load-level assignment."""
    load_phases: dict[str, frozenset] = {}
    for load in obs.observed_loads:
        load_phases[load.bus] = load_phases.get(load.bus, frozenset()) | load.phases
    bus_phases = enforce_consistency(
        obs.topology, assignment_from_loads(obs.topology, load_phases)
    )
    loads = tuple(
        SampleLoad(bus=load.bus, phases=load.phases, demand=load.demand)
        for load in obs.observed_loads
    )
    return SyntheticSample(
        topology=obs.topology,
        loads=loads,
        bus_phases=bus_phases,
        pf=float("nan"),
        seed=0,
        sample_index=0,
    )
