"""Position error bounds and power allocation for sensing-localization networks.

The library models networks of anchors (known positions), radars (unknown
positions, optionally unsynchronized clocks) and passive targets over one
or two transmission slots. It assembles Fisher information matrices from
ranging and echo links, evaluates position error bounds, and optimizes the
power and energy deployment under per-node caps and a total budget.
"""

from .channel import (
    SLOT_DURATION,
    SPEED_OF_LIGHT,
    ChannelParams,
    db_to_linear,
    dbm_per_hz_to_watt_per_hz,
    default_params,
    rii_localization,
    rii_sensing,
)
from .errors import (
    ConfigError,
    GeometryError,
    InfeasibleError,
    IsalError,
    ModeError,
    NonIdentifiableError,
    NumericError,
    ValidationError,
)
from .fim import (
    FimMatrix,
    LinkSet,
    assemble_dual_slot_fim,
    assemble_single_slot_fim,
    efim,
    enumerate_links,
    fim_to_text,
    jacobian_clocks,
    jacobian_positions,
    single_slot_components,
    speb,
    sym_inverse,
    sym_solve,
    target_speb,
    temporal_prior,
    trace_of_inverse_block,
)
from .model import (
    NetworkScene,
    NodeId,
    NodeKind,
    ParamEntry,
    ParameterLayout,
    ParamRole,
    Position2D,
    RADAR_POSITION_ROLES,
    SlotState,
    SyncMode,
    TARGET_POSITION_ROLES,
    angle,
    build_layout,
    distance,
)
from .optimizer import (
    AllocationProblem,
    AllocationSolution,
    PowerAllocation,
    grid_oracle,
    objective_and_gradient,
    project_capped_box,
    single_slot_problem,
    solve_allocation,
)
from .rlm_owr import (
    ClockModel,
    DriftEstimate,
    ExchangeRecord,
    drift_variance_estimate,
    estimate_drift,
    simulate_exchange,
)
from .scenarios import (
    Regime,
    ScenarioFixture,
    builtin_fixtures,
    classify_regime,
    fixture_by_name,
    to_config,
    with_sync_mode,
)
from .schemes import (
    INTEGRATED,
    STEPWISE,
    AllocationReport,
    SplitResult,
    ordering_heuristic,
    run_integrated_dual_slot,
    run_integrated_single_slot,
    run_scheme,
    run_stepwise_dual_slot,
    run_stepwise_single_slot,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationProblem",
    "AllocationReport",
    "AllocationSolution",
    "ChannelParams",
    "ClockModel",
    "ConfigError",
    "DriftEstimate",
    "ExchangeRecord",
    "FimMatrix",
    "GeometryError",
    "INTEGRATED",
    "InfeasibleError",
    "IsalError",
    "LinkSet",
    "ModeError",
    "NetworkScene",
    "NodeId",
    "NodeKind",
    "NonIdentifiableError",
    "NumericError",
    "ParamEntry",
    "ParamRole",
    "ParameterLayout",
    "Position2D",
    "PowerAllocation",
    "RADAR_POSITION_ROLES",
    "Regime",
    "SLOT_DURATION",
    "SPEED_OF_LIGHT",
    "STEPWISE",
    "ScenarioFixture",
    "SlotState",
    "SplitResult",
    "SyncMode",
    "TARGET_POSITION_ROLES",
    "ValidationError",
    "angle",
    "assemble_dual_slot_fim",
    "assemble_single_slot_fim",
    "build_layout",
    "builtin_fixtures",
    "classify_regime",
    "db_to_linear",
    "dbm_per_hz_to_watt_per_hz",
    "default_params",
    "distance",
    "drift_variance_estimate",
    "efim",
    "enumerate_links",
    "estimate_drift",
    "fim_to_text",
    "fixture_by_name",
    "grid_oracle",
    "jacobian_clocks",
    "jacobian_positions",
    "objective_and_gradient",
    "ordering_heuristic",
    "project_capped_box",
    "rii_localization",
    "rii_sensing",
    "run_integrated_dual_slot",
    "run_integrated_single_slot",
    "run_scheme",
    "run_stepwise_dual_slot",
    "run_stepwise_single_slot",
    "simulate_exchange",
    "single_slot_components",
    "single_slot_problem",
    "solve_allocation",
    "speb",
    "sym_inverse",
    "sym_solve",
    "target_speb",
    "temporal_prior",
    "to_config",
    "trace_of_inverse_block",
    "with_sync_mode",
]
