"""Multi-objective unrelated parallel machine scheduling laboratory."""

from .problem import (
    IDLE,
    InfeasibleScheduleError,
    ObjectiveValues,
    ProblemInstance,
    Schedule,
    compute_objectives,
    decode_sequences,
    instance_from_dict,
    instance_to_dict,
    read_instance,
    scalarize,
    validate_instance,
    validate_schedule,
    write_instance,
)
from .generate import GenParams, due_date_bounds, generate_instance, generate_suite
from .env import (
    Action,
    ActionSet,
    Assign,
    EnvState,
    Episode,
    StepResult,
    WAIT,
    Wait,
    feasible_actions,
    reset,
    reward,
    rollout,
    schedule_from_state,
    step,
)
from .graph import HeteroGraph, build_graph, global_features, parse_graph, serialize_graph

__version__ = "0.1.0"
