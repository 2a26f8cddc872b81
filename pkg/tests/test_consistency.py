"""Phase-containment checking and the leaf-to-feeder repair sweep."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsynth.consistency import (
    assignment_from_loads,
    check_consistency,
    enforce_consistency,
)
from gridsynth.topology import ALL_PHASES, Phase, shortest_path

from conftest import chain_topology, random_radial_topology

A, B, C = Phase.A, Phase.B, Phase.C


def phases(*letters):
    return frozenset(Phase(letter) for letter in letters)


def random_assignment(topology, seed, coverage=0.7):
    """Random phase sets on a random subset of buses (source always ABC)."""
    rng = np.random.default_rng(seed)
    options = [
        phases("A"), phases("B"), phases("C"),
        phases("A", "B"), phases("B", "C"), phases("A", "C"),
        phases("A", "B", "C"),
    ]
    assignment = {topology.source: ALL_PHASES}
    for bus in topology.bus_ids:
        if bus != topology.source and rng.random() < coverage:
            assignment[bus] = options[int(rng.integers(0, len(options)))]
    return assignment


def brute_force_violations(topology, assignment):
    """All-pairs path-subset oracle."""
    found = set()
    for bus in assignment:
        for edge in shortest_path(topology, topology.source, bus):
            ancestor = edge[0]
            if ancestor in assignment and not assignment[bus] <= assignment[ancestor]:
                found.add((bus, ancestor))
    return found


class TestCheck:
    def test_all_abc_is_consistent(self, chain3):
        assignment = {bus: ALL_PHASES for bus in chain3.bus_ids}
        assert check_consistency(chain3, assignment) == []

    def test_direct_subset_failure(self, chain3):
        assignment = {"f": ALL_PHASES, "n1": phases("B"), "n2": phases("A")}
        assert ("n2", "n1") in check_consistency(chain3, assignment)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_brute_force_oracle(self, seed):
        topology = random_radial_topology(seed, n_buses=5 + seed % 45)
        assignment = random_assignment(topology, seed + 1)
        assert set(check_consistency(topology, assignment)) == brute_force_violations(
            topology, assignment
        )


class TestEnforce:
    def test_equal_cardinality_branch_unions(self, chain3):
        assignment = {"f": ALL_PHASES, "n1": phases("B"), "n2": phases("A")}
        repaired = enforce_consistency(chain3, assignment)
        assert repaired["n1"] == phases("A", "B")
        assert repaired["n2"] == phases("A")

    def test_wider_downstream_widens_whole_path(self):
        topology = chain_topology([10.0, 10.0, 10.0], loads=("n3",))
        assignment = {"n2": phases("A"), "n3": phases("A", "B", "C")}
        repaired = enforce_consistency(topology, assignment)
        for bus in ("f", "n1", "n2", "n3"):
            assert repaired[bus] >= ALL_PHASES

    def test_consistent_assignment_unchanged(self, chain3):
        assignment = {
            "f": ALL_PHASES,
            "n1": phases("A", "B"),
            "n2": phases("A"),
        }
        repaired = enforce_consistency(chain3, assignment)
        for bus, p in assignment.items():
            assert repaired[bus] == p

    def test_unassigned_buses_default_to_children_union(self):
        topology = chain_topology([10.0, 10.0], loads=("n2",))
        repaired = enforce_consistency(topology, {"n2": phases("B")})
        assert repaired["n1"] == phases("B")
        assert repaired["f"] == ALL_PHASES

    def test_childless_unassigned_bus_gets_phase_a(self):
        topology = chain_topology([10.0, 10.0], loads=())
        repaired = enforce_consistency(topology, {})
        assert repaired["n2"] == phases("A")

    @pytest.mark.parametrize("seed", range(30))
    def test_properties_on_random_instances(self, seed):
        topology = random_radial_topology(seed * 13 + 1, n_buses=4 + seed % 47)
        assignment = random_assignment(topology, seed)
        repaired = enforce_consistency(topology, assignment)

        assert check_consistency(topology, repaired) == []
        for bus, p in assignment.items():
            assert repaired[bus] >= p, "a phase was removed"
        assert enforce_consistency(topology, repaired) == repaired, "not idempotent"

        # never exceeds the subtree-union upper bound
        upper = upper_bound(topology, assignment)
        for bus, p in repaired.items():
            assert p <= upper[bus]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_full_coverage_and_nonempty(self, seed):
        topology = random_radial_topology(seed % 991, n_buses=3 + seed % 30)
        repaired = enforce_consistency(topology, random_assignment(topology, seed, 0.4))
        assert set(repaired) == set(topology.bus_ids)
        assert all(repaired.values())


def upper_bound(topology, assignment):
    """Every bus takes the union of all input sets in its subtree, plus the
    childless default {A} and ABC at the source."""
    base = {
        bus: assignment.get(bus, frozenset()) | phases("A") for bus in topology.bus_ids
    }
    base[topology.source] |= ALL_PHASES
    out = dict(base)
    for bus in reversed(topology.bfs_order):
        for child in topology.children_of(bus):
            out[bus] = out[bus] | out[child]
    return out


def test_assignment_from_loads_unions_per_bus(chain3):
    load_phases = {"n1": phases("A"), "n2": phases("B")}
    assignment = assignment_from_loads(chain3, load_phases)
    assert assignment["f"] == ALL_PHASES
    assert assignment["n1"] == phases("A")
