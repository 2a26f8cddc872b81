"""Validation-grade unbalanced radial power flow (per-phase backward/forward sweep).

The line model is per-phase self-impedance only (no mutual coupling, no
shunts), loads are constant power, and the three phases decouple; the solver
exists to reproduce the voltage-band check on generated samples, not to
replace a full network solver.  The feeder source is held at 1.0 p.u. with
balanced 120-degree displacement; reported magnitudes are per phase relative
to the source magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import SyntheticSample
from .topology import ALL_PHASES, PHASES, NetworkTopology, Phase, ValidationError

#: Typical LV cable order of magnitude, used when a topology carries no electrical data.
DEFAULT_R_OHM_PER_KM = 0.4
DEFAULT_X_OHM_PER_KM = 0.3
DEFAULT_S_BASE_KVA = 100.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100


class PowerFlowError(RuntimeError):
    """The sweep failed to converge; carries the final mismatch in p.u."""

    def __init__(self, message: str, mismatch: float):
        super().__init__(message)
        self.mismatch = mismatch


@dataclass(frozen=True)
class LineImpedance:
    r_ohm_per_km: float
    x_ohm_per_km: float
    allow_zero: bool = False

    def __post_init__(self) -> None:
        if self.r_ohm_per_km < 0 or self.x_ohm_per_km < 0:
            raise ValueError("impedance components must be non-negative")
        if self.r_ohm_per_km == 0 and self.x_ohm_per_km == 0 and not self.allow_zero:
            raise ValueError("zero impedance requires allow_zero=True")


DEFAULT_IMPEDANCE = LineImpedance(DEFAULT_R_OHM_PER_KM, DEFAULT_X_OHM_PER_KM)


@dataclass(frozen=True, eq=False)
class VoltageSolution:
    bus_ids: tuple[str, ...]
    voltages: np.ndarray  # (n_buses, 3) complex per-unit, phases A/B/C
    magnitudes: np.ndarray  # (n_buses, 3) |V| per phase relative to the source
    iterations: int
    max_mismatch: float
    energized: dict

    def magnitude(self, bus: str, phase: Phase) -> float:
        row = self.bus_ids.index(bus)
        return float(self.magnitudes[row, PHASES.index(phase)])


@dataclass(frozen=True)
class BandViolation:
    bus: str
    phase: Phase
    v_pu: float


def run_power_flow(
    topology: NetworkTopology,
    sample: SyntheticSample,
    impedance: LineImpedance = DEFAULT_IMPEDANCE,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    s_base_kva: float = DEFAULT_S_BASE_KVA,
) -> VoltageSolution:
    """Backward/forward sweep until the per-phase power mismatch falls below ``tol``.

    The per-unit system uses the feeder base_kv as the line-to-neutral voltage
    base and ``s_base_kva`` per phase as the power base.  Raises
    PowerFlowError (with the final mismatch) when ``max_iter`` sweeps do not
    converge.
    """
    if topology.feeder.base_kv <= 0:
        raise ValidationError(f"base voltage must be > 0, got {topology.feeder.base_kv}")
    if set(sample.topology.bus_ids) != set(topology.bus_ids):
        raise ValidationError("sample was generated for a different topology")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    order = topology.bfs_order
    index = {bus: i for i, bus in enumerate(order)}
    n = len(order)
    z_base_ohm = (topology.feeder.base_kv**2) * 1000.0 / s_base_kva
    z_line = complex(impedance.r_ohm_per_km, impedance.x_ohm_per_km) / 1000.0  # ohm per m

    parent = np.full(n, -1, dtype=np.int64)
    z_pu = np.zeros(n, dtype=np.complex128)
    for i, bus in enumerate(order[1:], start=1):
        parent_bus = topology.parent_of(bus)
        parent[i] = index[parent_bus]
        length_m = topology.distance_from_source_m(bus) - topology.distance_from_source_m(
            parent_bus
        )
        z_pu[i] = z_line * length_m / z_base_ohm

    s_pu = np.zeros((n, 3), dtype=np.complex128)
    for load in sample.loads:
        row = index[load.bus]
        for k in range(3):
            s_pu[row, k] += complex(load.demand.p_kw[k], load.demand.q_kvar[k]) / s_base_kva

    rotation = np.exp(1j * np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0]))
    v = np.tile(rotation, (n, 1))
    reverse = range(n - 1, 0, -1)

    iterations = 0
    mismatch = np.inf
    while iterations < max_iter:
        iterations += 1
        i_load = np.conj(s_pu / v)
        i_branch = i_load.copy()
        for i in reverse:  # children precede parents in reversed BFS order
            i_branch[parent[i]] += i_branch[i]
        v_new = np.empty_like(v)
        v_new[0] = rotation
        for i in range(1, n):
            v_new[i] = v_new[parent[i]] - z_pu[i] * i_branch[i]
        mismatch = float(np.abs(v_new * np.conj(i_load) - s_pu).max())
        v = v_new
        if mismatch <= tol:
            break
    else:
        raise PowerFlowError(
            f"power flow did not converge after {max_iter} iterations "
            f"(mismatch {mismatch:.3e} p.u.)",
            mismatch=mismatch,
        )

    source_mag = np.abs(rotation)
    magnitudes = np.abs(v) / source_mag
    energized = {bus: sample.bus_phases.get(bus, ALL_PHASES) for bus in order}
    return VoltageSolution(
        bus_ids=order,
        voltages=v,
        magnitudes=magnitudes,
        iterations=iterations,
        max_mismatch=mismatch,
        energized=energized,
    )


def voltage_band_report(
    solution: VoltageSolution, lo: float, hi: float
) -> list[BandViolation]:
    """Every energized (bus, phase) whose magnitude falls outside [lo, hi]."""
    if lo >= hi:
        raise ValueError(f"band bounds must satisfy lo < hi, got [{lo}, {hi}]")
    out: list[BandViolation] = []
    for row, bus in enumerate(solution.bus_ids):
        for k, phase in enumerate(PHASES):
            if phase not in solution.energized.get(bus, ALL_PHASES):
                continue
            magnitude = float(solution.magnitudes[row, k])
            if magnitude < lo or magnitude > hi:
                out.append(BandViolation(bus=bus, phase=phase, v_pu=magnitude))
    return out
