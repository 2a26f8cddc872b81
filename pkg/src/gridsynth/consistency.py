"""Upstream phase-containment checking and rule-based repair.

A phase assignment maps bus ids to phase sets.  It is consistent when every
phase present at a bus is also present at every bus on the path back to the
feeder source.  ``enforce_consistency`` repairs an inconsistent assignment by
widening sets only (a fixpoint of leaf-to-feeder sweeps), so it terminates in
at most ``3 * |buses|`` passes and never removes a phase.
"""

from __future__ import annotations

from .topology import ALL_PHASES, NetworkTopology, Phase

PhaseAssignment = dict[str, frozenset]


def check_consistency(
    topology: NetworkTopology, assignment: PhaseAssignment
) -> list[tuple[str, str]]:
    """All (downstream bus, upstream bus) pairs whose phase sets violate containment.

    Only buses present in the assignment are compared; an empty result means
    the assignment is consistent.
    """
    violations: list[tuple[str, str]] = []
    for bus in sorted(assignment):
        topology._require(bus)
        phases = assignment[bus]
        ancestor = topology.parent_of(bus)
        while ancestor is not None:
            if ancestor in assignment and not phases <= assignment[ancestor]:
                violations.append((bus, ancestor))
            ancestor = topology.parent_of(ancestor)
    return violations


def enforce_consistency(
    topology: NetworkTopology, assignment: PhaseAssignment
) -> PhaseAssignment:
    """Repair an assignment so downstream phase sets are contained upstream.

    Returns a new assignment covering every bus: assigned buses keep at least
    their input phases, the feeder source carries all three phases, and buses
    absent from the input default to the union of their children's sets
    (minimum ``{A}`` when that union is empty).
    """
    working: dict[str, set[Phase]] = {}
    for bus, phases in assignment.items():
        topology._require(bus)
        working[bus] = set(phases)
    source = topology.source
    working.setdefault(source, set()).update(ALL_PHASES)

    # children-first so each default sees its children already defaulted
    for bus in reversed(topology.bfs_order):
        if bus in working:
            continue
        merged: set[Phase] = set()
        for child in topology.children_of(bus):
            merged |= working.get(child, set())
        working[bus] = merged if merged else {Phase.A}

    leaves = sorted(
        bus for bus in topology.bus_ids if bus != source and topology.degree(bus) == 1
    )
    paths = {leaf: _path_nodes(topology, leaf) for leaf in leaves}

    max_sweeps = 3 * len(topology.buses)
    for _ in range(max_sweeps):
        changed = False
        for leaf in leaves:
            nodes = paths[leaf]
            # walk each edge from the leaf toward the feeder: (child, parent)
            for i in range(len(nodes) - 1, 0, -1):
                child, parent = nodes[i], nodes[i - 1]
                down, up = working[child], working[parent]
                if down <= up:
                    continue
                if len(up) >= len(down):
                    up |= down
                else:
                    widened = up | down
                    for node in nodes[:i]:
                        working[node] |= widened
                changed = True
        if not changed:
            break

    return {bus: frozenset(phases) for bus, phases in working.items()}


def assignment_from_loads(
    topology: NetworkTopology, load_phases: dict[str, frozenset]
) -> PhaseAssignment:
    """Bus-level assignment induced by per-load phase sets (union per bus),
    with the feeder source carrying all three phases."""
    assignment: dict[str, frozenset] = {}
    for bus, phases in load_phases.items():
        topology._require(bus)
        assignment[bus] = assignment.get(bus, frozenset()) | phases
    assignment[topology.source] = assignment.get(topology.source, frozenset()) | ALL_PHASES
    return assignment


def _path_nodes(topology: NetworkTopology, leaf: str) -> list[str]:
    nodes = [leaf]
    parent = topology.parent_of(leaf)
    while parent is not None:
        nodes.append(parent)
        parent = topology.parent_of(parent)
    nodes.reverse()
    return nodes
