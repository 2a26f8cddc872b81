"""Radial feeder topology model, graph queries, and network document I/O.

A network document is a single JSON object with keys ``buses``, ``lines``,
``feeder``, ``loads`` and optionally ``observed_loads``.  All types in this
module are immutable after construction and safe to share across threads;
graph caches (parents, depths, distances) are built once in ``__post_init__``.
"""

from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Union


class SchemaError(ValueError):
    """The document is malformed or violates the network schema."""


class ValidationError(ValueError):
    """A structurally well-formed network violates a topology invariant."""


@enum.unique
class Phase(enum.Enum):
    A = "A"
    B = "B"
    C = "C"

    def __lt__(self, other: "Phase") -> bool:
        if not isinstance(other, Phase):
            return NotImplemented
        return self.value < other.value

    def __repr__(self) -> str:  # Phase.A prints as <Phase.A>, terser than default
        return f"<Phase.{self.value}>"


#: Canonical phase order used for every per-phase triple (index 0=A, 1=B, 2=C).
PHASES: tuple[Phase, Phase, Phase] = (Phase.A, Phase.B, Phase.C)
PHASE_INDEX = {phase: i for i, phase in enumerate(PHASES)}
ALL_PHASES: frozenset[Phase] = frozenset(PHASES)

PhaseSet = frozenset  # subset of {A, B, C}; non-empty once assigned


def parse_phase_set(values: Iterable[str]) -> frozenset[Phase]:
    """Build a PhaseSet from strings like ["A", "C"], rejecting junk and duplicates."""
    seen: set[Phase] = set()
    for value in values:
        try:
            phase = Phase(value)
        except ValueError:
            raise SchemaError(f"unknown phase {value!r} (expected 'A', 'B' or 'C')") from None
        if phase in seen:
            raise SchemaError(f"duplicate phase {value!r} in phase set")
        seen.add(phase)
    if not seen:
        raise SchemaError("phase set must not be empty")
    return frozenset(seen)


def format_phase_set(phases: frozenset[Phase]) -> list[str]:
    """Canonical serialized form: sorted A < B < C."""
    return [phase.value for phase in sorted(phases)]


@dataclass(frozen=True)
class Bus:
    id: str
    x: float | None = None
    y: float | None = None


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    length_m: float


@dataclass(frozen=True)
class Feeder:
    source_bus: str
    base_kv: float


@dataclass(frozen=True)
class LoadDemand:
    """Per-phase active (kW) and reactive (kvar) power of one load, indexed A/B/C."""

    p_kw: tuple[float, float, float]
    q_kvar: tuple[float, float, float]

    def __post_init__(self) -> None:
        for name, triple in (("p_kw", self.p_kw), ("q_kvar", self.q_kvar)):
            if len(triple) != 3:
                raise ValidationError(f"{name} must have exactly three entries")
            if any(v < 0 or not math.isfinite(v) for v in triple):
                raise ValidationError(f"{name} entries must be finite and non-negative: {triple}")

    def total_kw(self) -> float:
        return sum(self.p_kw)

    def support(self) -> frozenset[Phase]:
        """Phases carrying strictly positive active power."""
        return frozenset(phase for phase, p in zip(PHASES, self.p_kw) if p > 0)


def check_demand_phases(demand: LoadDemand, phases: frozenset[Phase]) -> None:
    """Demand must be zero on every phase outside the load's phase set."""
    for phase, p, q in zip(PHASES, demand.p_kw, demand.q_kvar):
        if phase not in phases and (p != 0 or q != 0):
            raise ValidationError(
                f"load carries power on phase {phase.value} outside its phase set"
            )


@dataclass(frozen=True)
class NetworkTopology:
    """A validated radial feeder graph.

    Invariants enforced at construction: the graph is connected and radial
    (``len(lines) == len(buses) - 1``, no cycles), every line endpoint and
    load bus exists, and the feeder source exists.  Derived graph structure
    (adjacency, BFS order from the source, parents, metric depths) is
    precomputed so path and distance queries are cheap.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    feeder: Feeder
    loads: tuple[str, ...]

    _parent: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)
    _hops: dict = field(init=False, repr=False, compare=False)
    _depth_m: dict = field(init=False, repr=False, compare=False)
    _bfs_order: tuple = field(init=False, repr=False, compare=False)
    _feeder_depth_m: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.buses:
            raise ValidationError("topology has no buses")
        ids = [bus.id for bus in self.buses]
        id_set = set(ids)
        if len(id_set) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValidationError(f"duplicate bus id {dup!r}")
        if self.feeder.base_kv <= 0:
            raise ValidationError(f"base_kv must be > 0, got {self.feeder.base_kv}")
        source = self.feeder.source_bus
        if source not in id_set:
            raise ValidationError(f"feeder source bus {source!r} is not a defined bus")
        for line in self.lines:
            for endpoint in (line.from_bus, line.to_bus):
                if endpoint not in id_set:
                    raise ValidationError(f"line references unknown bus {endpoint!r}")
            if line.from_bus == line.to_bus:
                raise ValidationError(f"cycle detected: line {line.from_bus!r} loops onto itself")
            if line.length_m < 0 or not math.isfinite(line.length_m):
                raise ValidationError(
                    f"line {line.from_bus!r}-{line.to_bus!r} has invalid length {line.length_m}"
                )
        if len(self.lines) >= len(self.buses):
            raise ValidationError(
                f"cycle detected: {len(self.lines)} lines for {len(self.buses)} buses"
            )
        if len(self.lines) != len(self.buses) - 1:
            missing = len(self.buses) - 1 - len(self.lines)
            raise ValidationError(f"network is disconnected: {missing} line(s) short of radial")
        for bus_id in self.loads:
            if bus_id not in id_set:
                raise ValidationError(f"load references unknown bus {bus_id!r}")

        adjacency: dict[str, list[tuple[str, float]]] = {i: [] for i in ids}
        for line in self.lines:
            adjacency[line.from_bus].append((line.to_bus, line.length_m))
            adjacency[line.to_bus].append((line.from_bus, line.length_m))
        # deterministic traversal regardless of document order
        for neighbors in adjacency.values():
            neighbors.sort()

        parent: dict[str, str | None] = {source: None}
        children: dict[str, list[str]] = {i: [] for i in ids}
        hops: dict[str, int] = {source: 0}
        depth_m: dict[str, float] = {source: 0.0}
        order: list[str] = []
        queue = deque([source])
        while queue:
            bus = queue.popleft()
            order.append(bus)
            for neighbor, length in adjacency[bus]:
                if neighbor in parent:
                    continue
                parent[neighbor] = bus
                children[bus].append(neighbor)
                hops[neighbor] = hops[bus] + 1
                depth_m[neighbor] = depth_m[bus] + length
                queue.append(neighbor)
        if len(order) != len(ids):
            unreachable = min(id_set - set(order))
            raise ValidationError(
                f"network is disconnected: bus {unreachable!r} unreachable from source {source!r}"
            )

        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_hops", hops)
        object.__setattr__(self, "_depth_m", depth_m)
        object.__setattr__(self, "_bfs_order", tuple(order))
        object.__setattr__(self, "_feeder_depth_m", max(depth_m.values()))

    # -- graph queries -------------------------------------------------

    @property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(bus.id for bus in self.buses)

    @property
    def source(self) -> str:
        return self.feeder.source_bus

    @property
    def bfs_order(self) -> tuple[str, ...]:
        """All bus ids in breadth-first order from the feeder source."""
        return self._bfs_order

    def parent_of(self, bus_id: str) -> str | None:
        self._require(bus_id)
        return self._parent[bus_id]

    def children_of(self, bus_id: str) -> tuple[str, ...]:
        self._require(bus_id)
        return tuple(self._children[bus_id])

    def distance_from_source_m(self, bus_id: str) -> float:
        self._require(bus_id)
        return self._depth_m[bus_id]

    @property
    def feeder_depth_m(self) -> float:
        """Maximum over leaves of the metric path length from the source."""
        return self._feeder_depth_m

    def degree(self, bus_id: str) -> int:
        self._require(bus_id)
        parent = self._parent[bus_id]
        return len(self._children[bus_id]) + (0 if parent is None else 1)

    def _require(self, bus_id: str) -> None:
        if bus_id not in self._parent:
            raise ValidationError(f"unknown bus id {bus_id!r}")


def leaf_nodes(topology: NetworkTopology) -> frozenset[str]:
    """All buses of degree 1, excluding the feeder source."""
    return frozenset(
        bus.id
        for bus in topology.buses
        if bus.id != topology.source and topology.degree(bus.id) == 1
    )


def shortest_path(topology: NetworkTopology, a: str, b: str) -> tuple[tuple[str, str], ...]:
    """The unique tree path from ``a`` to ``b`` as ordered (nearer-a, nearer-b) edges."""
    topology._require(a)
    topology._require(b)
    if a == b:
        return ()
    hops = topology._hops
    parent = topology._parent
    # climb both ends to their lowest common ancestor
    up_from_a: list[str] = [a]
    up_from_b: list[str] = [b]
    na, nb = a, b
    while hops[na] > hops[nb]:
        na = parent[na]
        up_from_a.append(na)
    while hops[nb] > hops[na]:
        nb = parent[nb]
        up_from_b.append(nb)
    while na != nb:
        na = parent[na]
        nb = parent[nb]
        up_from_a.append(na)
        up_from_b.append(nb)
    nodes = up_from_a + up_from_b[-2::-1]  # drop the duplicated ancestor
    return tuple((nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1))


def normalized_distance(topology: NetworkTopology, load_bus: str) -> float:
    """Metric distance from the feeder source divided by the feeder depth, in [0, 1]."""
    topology._require(load_bus)
    depth = topology.feeder_depth_m
    if depth <= 0:
        raise ValidationError(
            "degenerate feeder: zero depth (no lines, or every line length is zero)"
        )
    d = topology.distance_from_source_m(load_bus) / depth
    return min(max(d, 0.0), 1.0)


@dataclass(frozen=True)
class ObservedLoad:
    bus: str
    phases: frozenset[Phase]
    demand: LoadDemand

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValidationError(f"observed load at {self.bus!r} has an empty phase set")
        check_demand_phases(self.demand, self.phases)


@dataclass(frozen=True)
class ObservedNetwork:
    """A topology plus per-load phase sets and per-phase power measurements."""

    topology: NetworkTopology
    observed_loads: tuple[ObservedLoad, ...]

    def __post_init__(self) -> None:
        if not self.observed_loads:
            raise ValidationError("observed network must contain at least one load")
        for load in self.observed_loads:
            self.topology._require(load.bus)


# -- document parsing ----------------------------------------------------

Source = Union[str, bytes, IO]


def _read_document(source: Source) -> dict:
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = source
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("document root must be a JSON object")
    return doc


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"unknown key {min(unknown)!r} in {where}")


def _require_keys(obj: dict, required: set[str], where: str) -> None:
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"missing key {min(missing)!r} in {where}")


def _number(obj: dict, key: str, where: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _string(obj: dict, key: str, where: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{where}.{key} must be a string, got {value!r}")
    return value


def _phase_triple(obj: dict, key: str, where: str) -> tuple[float, float, float]:
    entry = obj.get(key)
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}.{key} must be an object with keys A, B, C")
    _reject_unknown(entry, {"A", "B", "C"}, f"{where}.{key}")
    _require_keys(entry, {"A", "B", "C"}, f"{where}.{key}")
    return tuple(_number(entry, phase.value, f"{where}.{key}") for phase in PHASES)  # type: ignore[return-value]


def _parse_topology(doc: dict) -> NetworkTopology:
    _reject_unknown(doc, {"buses", "lines", "feeder", "loads", "observed_loads"}, "document")
    _require_keys(doc, {"buses", "lines", "feeder", "loads"}, "document")

    buses = []
    raw_buses = doc["buses"]
    if not isinstance(raw_buses, list):
        raise SchemaError("'buses' must be an array")
    for i, entry in enumerate(raw_buses):
        where = f"buses[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where} must be an object")
        _reject_unknown(entry, {"id", "x", "y"}, where)
        _require_keys(entry, {"id"}, where)
        x = _number(entry, "x", where) if "x" in entry else None
        y = _number(entry, "y", where) if "y" in entry else None
        buses.append(Bus(id=_string(entry, "id", where), x=x, y=y))
    coords = {bus.id: (bus.x, bus.y) for bus in buses}

    lines = []
    raw_lines = doc["lines"]
    if not isinstance(raw_lines, list):
        raise SchemaError("'lines' must be an array")
    for i, entry in enumerate(raw_lines):
        where = f"lines[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where} must be an object")
        _reject_unknown(entry, {"from", "to", "length_m"}, where)
        _require_keys(entry, {"from", "to"}, where)
        from_bus = _string(entry, "from", where)
        to_bus = _string(entry, "to", where)
        if "length_m" in entry:
            length = _number(entry, "length_m", where)
        else:
            length = _euclidean_length(coords, from_bus, to_bus, where)
        lines.append(Line(from_bus=from_bus, to_bus=to_bus, length_m=length))

    raw_feeder = doc["feeder"]
    if not isinstance(raw_feeder, dict):
        raise SchemaError("'feeder' must be an object")
    _reject_unknown(raw_feeder, {"source_bus", "base_kv"}, "feeder")
    _require_keys(raw_feeder, {"source_bus", "base_kv"}, "feeder")
    feeder = Feeder(
        source_bus=_string(raw_feeder, "source_bus", "feeder"),
        base_kv=_number(raw_feeder, "base_kv", "feeder"),
    )

    loads = []
    raw_loads = doc["loads"]
    if not isinstance(raw_loads, list):
        raise SchemaError("'loads' must be an array")
    for i, entry in enumerate(raw_loads):
        where = f"loads[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where} must be an object")
        _reject_unknown(entry, {"bus"}, where)
        _require_keys(entry, {"bus"}, where)
        loads.append(_string(entry, "bus", where))

    return NetworkTopology(buses=tuple(buses), lines=tuple(lines), feeder=feeder, loads=tuple(loads))


def _euclidean_length(coords: dict, from_bus: str, to_bus: str, where: str) -> float:
    for endpoint in (from_bus, to_bus):
        if endpoint not in coords:
            raise ValidationError(f"line references unknown bus {endpoint!r}")
        if coords[endpoint][0] is None or coords[endpoint][1] is None:
            raise SchemaError(
                f"{where} has no length_m and bus {endpoint!r} has no coordinates to derive one"
            )
    (x1, y1), (x2, y2) = coords[from_bus], coords[to_bus]
    return math.hypot(x2 - x1, y2 - y1)


def load_topology(source: Source, format: str = "json") -> NetworkTopology:
    """Parse and validate a network document, returning its topology."""
    if format != "json":
        raise SchemaError(f"unsupported format {format!r}")
    return _parse_topology(_read_document(source))


def load_observed_network(source: Source) -> ObservedNetwork:
    """Parse a network document that carries observed per-load power data."""
    doc = _read_document(source)
    topology = _parse_topology(doc)
    if "observed_loads" not in doc:
        raise SchemaError("document has no 'observed_loads'")
    raw = doc["observed_loads"]
    if not isinstance(raw, list):
        raise SchemaError("'observed_loads' must be an array")
    observed = []
    for i, entry in enumerate(raw):
        where = f"observed_loads[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where} must be an object")
        _reject_unknown(entry, {"bus", "phases", "p_kw", "q_kvar"}, where)
        _require_keys(entry, {"bus", "phases", "p_kw", "q_kvar"}, where)
        raw_phases = entry["phases"]
        if not isinstance(raw_phases, list):
            raise SchemaError(f"{where}.phases must be an array")
        observed.append(
            ObservedLoad(
                bus=_string(entry, "bus", where),
                phases=parse_phase_set(raw_phases),
                demand=LoadDemand(
                    p_kw=_phase_triple(entry, "p_kw", where),
                    q_kvar=_phase_triple(entry, "q_kvar", where),
                ),
            )
        )
    return ObservedNetwork(topology=topology, observed_loads=tuple(observed))


# -- serialization -------------------------------------------------------

def topology_to_dict(topology: NetworkTopology) -> dict:
    buses = []
    for bus in topology.buses:
        entry: dict = {"id": bus.id}
        if bus.x is not None:
            entry["x"] = bus.x
        if bus.y is not None:
            entry["y"] = bus.y
        buses.append(entry)
    return {
        "buses": buses,
        "lines": [
            {"from": line.from_bus, "to": line.to_bus, "length_m": line.length_m}
            for line in topology.lines
        ],
        "feeder": {"source_bus": topology.feeder.source_bus, "base_kv": topology.feeder.base_kv},
        "loads": [{"bus": bus_id} for bus_id in topology.loads],
    }


def observed_to_dict(network: ObservedNetwork) -> dict:
    doc = topology_to_dict(network.topology)
    doc["observed_loads"] = [
        {
            "bus": load.bus,
            "phases": format_phase_set(load.phases),
            "p_kw": {phase.value: load.demand.p_kw[i] for i, phase in enumerate(PHASES)},
            "q_kvar": {phase.value: load.demand.q_kvar[i] for i, phase in enumerate(PHASES)},
        }
        for load in network.observed_loads
    ]
    return doc


def topology_to_json(topology: NetworkTopology) -> str:
    return json.dumps(topology_to_dict(topology), indent=2)


def observed_to_json(network: ObservedNetwork) -> str:
    return json.dumps(observed_to_dict(network), indent=2)
