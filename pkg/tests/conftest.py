"""Shared builders for topologies, observed networks and model parameters."""

from __future__ import annotations

import numpy as np
import pytest

from gridsynth.params import (
    DemandMoments,
    DistanceBinCurve,
    ModelParameters,
    Moment,
    PhaseChoiceProbs,
    RatioParams,
)
from gridsynth.topology import (
    PHASES,
    Bus,
    Feeder,
    Line,
    LoadDemand,
    NetworkTopology,
    ObservedLoad,
    ObservedNetwork,
    Phase,
    parse_phase_set,
)


def chain_topology(lengths, base_kv=0.416, loads=None):
    """f - n1 - n2 - ... with the given line lengths in meters."""
    names = ["f"] + [f"n{i}" for i in range(1, len(lengths) + 1)]
    buses = tuple(Bus(name) for name in names)
    lines = tuple(
        Line(names[i], names[i + 1], float(length)) for i, length in enumerate(lengths)
    )
    return NetworkTopology(
        buses=buses,
        lines=lines,
        feeder=Feeder("f", base_kv),
        loads=tuple(loads) if loads is not None else (names[-1],),
    )


def star_topology(n_spokes=4, length=50.0):
    names = [f"n{i}" for i in range(1, n_spokes + 1)]
    return NetworkTopology(
        buses=tuple(Bus(b) for b in ["f"] + names),
        lines=tuple(Line("f", name, length) for name in names),
        feeder=Feeder("f", 0.416),
        loads=tuple(names),
    )


def random_radial_topology(seed, n_buses, n_loads=None, min_len=10.0, max_len=100.0, base_kv=0.416):
    """Random tree grown by attaching each new bus to a uniformly random earlier bus."""
    rng = np.random.default_rng(seed)
    width = len(str(n_buses))
    names = [f"b{i:0{width}d}" for i in range(n_buses)]
    lines = []
    for i in range(1, n_buses):
        attach = int(rng.integers(0, i))
        length = float(rng.uniform(min_len, max_len))
        lines.append(Line(names[attach], names[i], length))
    if n_loads is None:
        n_loads = max(1, n_buses // 5)
    load_buses = rng.choice(names[1:], size=min(n_loads, n_buses - 1), replace=False)
    return NetworkTopology(
        buses=tuple(Bus(name) for name in names),
        lines=tuple(lines),
        feeder=Feeder(names[0], base_kv),
        loads=tuple(sorted(str(b) for b in load_buses)),
    )


def single_load(bus, phase, kw, kvar=0.0):
    """Observed single-phase load carrying kw (and kvar) on the given phase."""
    phase = Phase(phase) if isinstance(phase, str) else phase
    index = PHASES.index(phase)
    p = [0.0, 0.0, 0.0]
    q = [0.0, 0.0, 0.0]
    p[index] = float(kw)
    q[index] = float(kvar)
    return ObservedLoad(
        bus=bus, phases=frozenset({phase}), demand=LoadDemand(tuple(p), tuple(q))
    )


def three_load(bus, pa, pb, pc, qa=0.0, qb=0.0, qc=0.0):
    return ObservedLoad(
        bus=bus,
        phases=parse_phase_set(["A", "B", "C"]),
        demand=LoadDemand((float(pa), float(pb), float(pc)), (float(qa), float(qb), float(qc))),
    )


def observed_network(topology, loads):
    return ObservedNetwork(topology=topology, observed_loads=tuple(loads))


def make_params(
    p3=0.5,
    n_bins=4,
    choice=(1 / 3, 1 / 3, 1 / 3),
    ratio_mean=(1 / 3, 1 / 3, 1 / 3),
    concentration=100.0,
    mu=0.45,
    sigma=0.15,
):
    if np.isscalar(p3):
        conditional = [float(p3)] * n_bins
    else:
        conditional = list(p3)
    return ModelParameters(
        curve=DistanceBinCurve.from_probabilities(conditional),
        phase_choice=PhaseChoiceProbs(*choice),
        demand=DemandMoments(
            three_phase=Moment(mu, sigma),
            per_phase=(Moment(mu, sigma), Moment(mu, sigma), Moment(mu, sigma)),
        ),
        ratios=RatioParams(tuple(ratio_mean), concentration),
    )


@pytest.fixture
def chain3():
    """f -(100m)- n1 -(200m)- n2, loads at n1 and n2."""
    return chain_topology([100.0, 200.0], loads=("n1", "n2"))
