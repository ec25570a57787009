"""The sense-while-acting primitives: look around, go forward, search for a
clear direction, and the no-op.

Each action is a bounded loop over sim ticks that senses every tick and
terminates on its own condition; none has a timeout.  Documented tick bounds
(defaults):

* looking: at most 9 ticks (one per gaze sample).
* forward: rotation ceil(180/4.5) = 40 ticks plus translation with a noise
  margin of 2, 2 * ceil(1.0 / 0.02) = 100, so 140 total.
* search:  25 candidate scans + 40 rotation + 2 * ceil(0.5 / 0.02) = 115.

An optional ``on_tick`` hook runs after every consumed tick; the live harness
uses it to apply queued operator commands at tick boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .geometry import (MotionParams, World, angle_diff, first_hit_in_cone,
                       normalize_angle, ray_clear, step_robot)
from .sensors import LookOutcome, SensorParams, detect_target, sense_obstacle


class StuckError(RuntimeError):
    """Raised when the full 360 degree scan finds no clear direction; the
    architecture assumes a free direction always exists, so this surfaces a
    violated assumption instead of looping forever."""


@dataclass(frozen=True)
class ActionCommand:
    """What the decision side can ask for: none, looking, search(dir),
    forward(dir)."""

    kind: str  # "none" | "looking" | "search" | "forward"
    direction: Optional[float] = None

    KINDS = ("none", "looking", "search", "forward")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown command kind: {self.kind!r}")
        if self.kind in ("search", "forward"):
            if self.direction is None:
                raise ValueError(f"{self.kind} needs a direction")
            object.__setattr__(self, "direction", normalize_angle(self.direction))
        elif self.direction is not None:
            raise ValueError(f"{self.kind} takes no direction")

    @classmethod
    def none(cls) -> "ActionCommand":
        return cls("none")

    @classmethod
    def looking(cls) -> "ActionCommand":
        return cls("looking")

    @classmethod
    def search(cls, direction: float) -> "ActionCommand":
        return cls("search", direction)

    @classmethod
    def forward(cls, direction: float) -> "ActionCommand":
        return cls("forward", direction)


@dataclass(frozen=True)
class ActionResult:
    ticks: int
    look: Optional[LookOutcome] = None      # looking
    stop_reason: Optional[str] = None       # forward: "completed" | "obstacle"
    chosen_direction: Optional[float] = None  # search


@dataclass(frozen=True)
class ActionParams:
    head_sweep_half_angle: float = 60.0
    head_step: float = 15.0
    forward_distance: float = 1.0
    heading_tolerance: float = 2.0
    clearance_required: float = 1.2
    search_step: float = 15.0
    search_burst: float = 0.5

    def __post_init__(self) -> None:
        for name in ("head_sweep_half_angle", "head_step", "forward_distance",
                     "heading_tolerance", "clearance_required", "search_step",
                     "search_burst"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if (self.head_sweep_half_angle / self.head_step) % 1 != 0:
            raise ValueError("head_step must divide head_sweep_half_angle")


TickHook = Optional[Callable[[World], None]]


def _tick(world: World, hook: TickHook) -> None:
    world.clock += 1
    if hook is not None:
        hook(world)


def _motion_tick(world: World, linear: float, angular: float,
                 motion: MotionParams, hook: TickHook) -> None:
    step_robot(world, linear, angular, motion)
    if hook is not None:
        hook(world)


def looking_bounds(params: ActionParams) -> int:
    return 2 * int(params.head_sweep_half_angle / params.head_step) + 1


def forward_bounds(params: ActionParams, motion: MotionParams) -> int:
    rotation = math.ceil(180.0 / (motion.angular_speed * motion.tick))
    translation = math.ceil(params.forward_distance / (motion.linear_speed * motion.tick))
    return rotation + 2 * translation


def search_bounds(params: ActionParams, motion: MotionParams) -> int:
    candidates = 2 * int(round(180.0 / params.search_step)) + 1
    rotation = math.ceil(180.0 / (motion.angular_speed * motion.tick))
    burst = math.ceil(params.search_burst / (motion.linear_speed * motion.tick))
    return candidates + rotation + 2 * burst


def _sweep_offsets(params: ActionParams) -> list[float]:
    """Gaze offsets 0, +s, -s, +2s, -2s, ... out to the sweep edge."""
    offsets = [0.0]
    steps = int(params.head_sweep_half_angle / params.head_step)
    for k in range(1, steps + 1):
        offsets.append(k * params.head_step)
        offsets.append(-k * params.head_step)
    return offsets


def act_looking(world: World, action_params: ActionParams,
                sensor_params: SensorParams, on_tick: TickHook = None) -> ActionResult:
    """Sweep the head across the gaze offsets, one tick per sample, stopping
    at the first detection.  The base never moves."""
    heading = world.robot.heading
    ticks = 0
    for offset in _sweep_offsets(action_params):
        outcome = detect_target(world, normalize_angle(heading + offset), sensor_params)
        ticks += 1
        _tick(world, on_tick)
        if outcome.found:
            return ActionResult(ticks=ticks, look=outcome)
    return ActionResult(ticks=ticks, look=LookOutcome(found=False))


def _rotate_to(world: World, direction: float, tolerance: float,
               motion: MotionParams, hook: TickHook) -> int:
    """Rotate in place until the heading error is within tolerance."""
    ticks = 0
    while True:
        err = angle_diff(direction, world.robot.heading)
        if abs(err) <= tolerance:
            return ticks
        angular = max(-motion.angular_speed, min(motion.angular_speed, err / motion.tick))
        _motion_tick(world, 0.0, angular, motion, hook)
        ticks += 1


def _advance(world: World, distance: float, motion: MotionParams,
             sensors: SensorParams, hook: TickHook) -> tuple[int, str]:
    """Translate along the current heading until the commanded distance is
    covered, checking the obstacle sensor before every tick.  A contact stop
    (bump cancelling the tick's motion) also counts as an obstacle."""
    ticks = 0
    commanded = 0.0
    per_tick = motion.linear_speed * motion.tick
    while commanded < distance - 1e-9:
        if sense_obstacle(world, sensors):
            return ticks, "obstacle"
        before_x, before_y = world.robot.x, world.robot.y
        _motion_tick(world, motion.linear_speed, 0.0, motion, hook)
        ticks += 1
        commanded += per_tick
        if world.robot.x == before_x and world.robot.y == before_y:
            return ticks, "obstacle"
    return ticks, "completed"


def act_forward(world: World, direction: float, action_params: ActionParams,
                motion: MotionParams, sensors: SensorParams,
                on_tick: TickHook = None) -> ActionResult:
    """Turn toward ``direction``, then move ahead the fixed distance until an
    obstacle is sensed."""
    direction = normalize_angle(direction)
    ticks = _rotate_to(world, direction, action_params.heading_tolerance, motion, on_tick)
    moved, reason = _advance(world, action_params.forward_distance, motion, sensors, on_tick)
    return ActionResult(ticks=ticks + moved, stop_reason=reason)


def _search_candidates(direction: float, step: float) -> list[float]:
    """Candidate headings direction + k*step for k = 0, +1, -1, ... to +/-180."""
    half = int(round(180.0 / step))
    candidates = [direction]
    for k in range(1, half + 1):
        candidates.append(normalize_angle(direction + k * step))
        candidates.append(normalize_angle(direction - k * step))
    return candidates


def _candidate_clear(world: World, candidate: float, action_params: ActionParams,
                     sensors: SensorParams) -> bool:
    """A candidate heading counts as obstacle-free when its ray is clear out
    to the required distance and the front obstacle cone would not fire
    immediately (otherwise the burst could never start and the search would
    pick the same heading forever).  The cone is widened by the heading
    tolerance so the guarantee covers every heading the rotation phase can
    settle on."""
    clearance = ray_clear(world, world.robot.x, world.robot.y, candidate,
                          action_params.clearance_required)
    if clearance < action_params.clearance_required:
        return False
    cone_hit = first_hit_in_cone(
        world, world.robot.x, world.robot.y, candidate,
        sensors.obstacle_cone_half_angle + action_params.heading_tolerance)
    return cone_hit > sensors.obstacle_threshold


def act_search(world: World, direction: float, action_params: ActionParams,
               motion: MotionParams, sensors: SensorParams,
               on_tick: TickHook = None) -> ActionResult:
    """Scan for the clear heading closest to ``direction`` (one tick per
    candidate), rotate to it and advance a short burst."""
    direction = normalize_angle(direction)
    ticks = 0
    chosen: Optional[float] = None
    for candidate in _search_candidates(direction, action_params.search_step):
        ok = _candidate_clear(world, candidate, action_params, sensors)
        ticks += 1
        _tick(world, on_tick)
        if ok:
            chosen = candidate
            break
    if chosen is None:
        raise StuckError(
            f"no clear direction within {action_params.clearance_required} m "
            f"after a full scan around {direction:.1f} deg")
    ticks += _rotate_to(world, chosen, action_params.heading_tolerance, motion, on_tick)
    moved, _ = _advance(world, action_params.search_burst, motion, sensors, on_tick)
    return ActionResult(ticks=ticks + moved, chosen_direction=chosen)


def act_none(world: World) -> ActionResult:
    """Do nothing; the world is untouched and no ticks pass."""
    return ActionResult(ticks=0)
