"""gridsynth: learn three-phase load statistics from an observed distribution
network and sample synthetic, phase-consistent demand data onto new topologies."""

__version__ = "0.1.0"

from .consistency import PhaseAssignment, check_consistency, enforce_consistency
from .estimator import (
    EstimationError,
    estimate_demand_moments,
    estimate_p3_curve,
    estimate_phase_choice,
    estimate_ratio_params,
    fit,
    pool_observed,
)
from .metrics import ComparisonReport, build_report, compare_parameters, histogram, mape
from .params import (
    DEFAULT_PF_TABLE,
    DemandMoments,
    DistanceBinCurve,
    ModelParameters,
    Moment,
    PhaseChoiceProbs,
    PowerFactorTable,
    RatioParams,
    params_from_json,
    params_to_json,
    with_ratio_mean,
)
from .powerflow import (
    LineImpedance,
    PowerFlowError,
    VoltageSolution,
    run_power_flow,
    voltage_band_report,
)
from .rng import RngStream
from .sampler import (
    PhaseDraw,
    SyntheticSample,
    allocate_loads,
    generate,
    generate_one,
    sample_from_observed,
    sample_phase_choice,
    sample_phase_count,
    sample_phase_ratios,
    sample_power_factor,
    sample_total_demand,
)
from .topology import (
    LoadDemand,
    NetworkTopology,
    ObservedLoad,
    ObservedNetwork,
    Phase,
    SchemaError,
    ValidationError,
    leaf_nodes,
    load_observed_network,
    load_topology,
    normalized_distance,
    observed_to_json,
    shortest_path,
    topology_to_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]
