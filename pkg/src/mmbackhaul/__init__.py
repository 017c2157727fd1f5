"""Subframe-level simulator of a distributed scheduler for tree-topology mmWave backhaul."""

from .capacity import capacity_bps, capacity_estimate
from .checker import ValidationReport, Violation, check_schedule, validate_schedule_log, validate_schedules
from .config import PRESETS, ScenarioConfig, apply_preset
from .engine import Engine, PipelineViolation, SubframeClock, assign_sub_slots, target_subframe
from .errors import (
    BackhaulError,
    ConfigError,
    InconsistentInputError,
    InfeasibleError,
    MalformedTopologyError,
    OracleOverflowError,
    PlacementError,
    UndefinedFairnessError,
)
from .metrics import MetricsRecord, jain_index, tracking_latency, window_average
from .node import (
    BaseStation,
    FinalSchedule,
    LinkAllocation,
    ReportingFilter,
    compute_final_schedule,
    compute_local_schedule,
    fill_packets,
    place_slots,
    split_directions,
)
from .optimizer import LinkEntry, ParentReservation, ScheduleProblem, oracle_enumerate, solve_max_scale, solve_max_slots
from .runner import run_scenario, run_sweep, simulate
from .topology import MACRO, TreeTopology, compute_heights, generate_tree
from .traffic import ArrivalModel, DemandProfile

__version__ = "0.1.0"
