"""rnav: sense-while-acting robot navigation.

A 2D simulator with injected actuation noise and detector false negatives,
a micro ordered-clause logic engine running the target-search decision rules,
the line protocol joining the two, and an experiment harness with scenarios,
JSONL traces, batch statistics, reports and a live operator endpoint.
"""

from .actions import (ActionCommand, ActionParams, ActionResult, StuckError,
                      act_forward, act_looking, act_none, act_search)
from .decision import DecisionState, decide_action, builtin_program
from .geometry import (GeometryError, MotionParams, Obstacle, Pose, World,
                       bearing_to, normalize_angle, ray_clear, step_robot)
from .harness import (RunReport, Scenario, ScenarioError, apply_event, batch,
                      load_scenario, load_trace, run, write_trace)
from .sensors import (LookOutcome, PerceptionRecord, SensorParams,
                      detect_target, read_odometry, sense_obstacle)

__version__ = "0.1.0"

__all__ = [
    "ActionCommand", "ActionParams", "ActionResult", "StuckError",
    "act_forward", "act_looking", "act_none", "act_search",
    "DecisionState", "decide_action", "builtin_program",
    "GeometryError", "MotionParams", "Obstacle", "Pose", "World",
    "bearing_to", "normalize_angle", "ray_clear", "step_robot",
    "RunReport", "Scenario", "ScenarioError", "apply_event", "batch",
    "load_scenario", "load_trace", "run", "write_trace",
    "LookOutcome", "PerceptionRecord", "SensorParams",
    "detect_target", "read_odometry", "sense_obstacle",
    "__version__",
]
