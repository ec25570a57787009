"""Scenario loading, the run loop, trigger-driven environment events, JSONL
tracing, metrics, and batch statistics.

A run is one executor session over a scenario: each cycle emits a sensor
line, lets the decision side pick a command (with an optional looking
sub-exchange), executes it, evaluates event triggers, and checks the reach
condition.  The trace is an append-only list of JSON records; identical
(scenario, seed, mode) always yields byte-identical trace lines.

Trace records (schema_version 1):

* run      scenario identity, seed, start pose, target, initial obstacles
* cycle    perception, look outcome, executed command, ticks, pose after
* event    an obstacle insertion, accepted or rejected
* terminal reached flag, cycles used, path length, stop reason
"""

from __future__ import annotations

import json
import math
import socket
import threading
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Optional

from .actions import (ActionCommand, ActionParams, StuckError, act_forward,
                      act_looking, act_none, act_search)
from .decision import DecisionState
from .geometry import MotionParams, Obstacle, Pose, World, bearing_to
from .protocol import (CommandLine, LookReply, SensorLine, SocketStream,
                       pipe_pair, requantize, run_decision_client,
                       run_executor_session)
from .sensors import LookOutcome, PerceptionRecord, SensorParams, read_odometry, sense_obstacle

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scenario model


@dataclass(frozen=True)
class EventTrigger:
    kind: str  # "at_cycle" | "on_first_detection" | "manual"
    cycle: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("at_cycle", "on_first_detection", "manual"):
            raise ScenarioError(f"unknown trigger type {self.kind!r}")
        if self.kind == "at_cycle" and (self.cycle is None or self.cycle < 0):
            raise ScenarioError("at_cycle trigger needs a cycle >= 0")


@dataclass(frozen=True)
class AddObstacle:
    radius: float
    tall: bool
    x: Optional[float] = None
    y: Optional[float] = None
    placement: Optional[str] = None  # "segment_midpoint" resolves at fire time

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ScenarioError("event obstacle radius must be > 0")
        if self.placement is None:
            if self.x is None or self.y is None:
                raise ScenarioError("add_obstacle needs x,y or a placement")
        elif self.placement != "segment_midpoint":
            raise ScenarioError(f"unknown placement {self.placement!r}")


@dataclass(frozen=True)
class ScenarioEvent:
    trigger: EventTrigger
    action: AddObstacle


@dataclass
class Scenario:
    name: str
    start_pose: Pose
    target: tuple[float, float]
    reach_radius: float = 0.4
    obstacles: list[Obstacle] = field(default_factory=list)
    events: list[ScenarioEvent] = field(default_factory=list)
    motion: MotionParams = field(default_factory=MotionParams)
    sensors: SensorParams = field(default_factory=SensorParams)
    actions: ActionParams = field(default_factory=ActionParams)
    max_cycles: int = 200

    def __post_init__(self) -> None:
        for ob in self.obstacles:
            self._check_clear(ob)

    def _check_clear(self, ob: Obstacle) -> None:
        if ob.contains(self.start_pose.x, self.start_pose.y):
            raise ScenarioError(f"obstacle at ({ob.x}, {ob.y}) overlaps the start pose")
        if math.hypot(ob.x - self.target[0], ob.y - self.target[1]) < ob.radius + self.reach_radius:
            raise ScenarioError(f"obstacle at ({ob.x}, {ob.y}) overlaps the target disk")

    def make_world(self, seed: int) -> World:
        return World.create(self.start_pose, self.obstacles, self.target,
                            reach_radius=self.reach_radius, seed=seed)


def _params_from(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown {where} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except ValueError as err:
        raise ScenarioError(f"bad {where}: {err}") from err


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    for required in ("start_pose", "target"):
        if required not in data:
            raise ScenarioError(f"scenario is missing required field {required!r}")
    sp = data["start_pose"]
    tg = data["target"]
    try:
        start = Pose(float(sp["x"]), float(sp["y"]), float(sp.get("heading", 0.0)))
        target = (float(tg["x"]), float(tg["y"]))
    except (KeyError, TypeError) as err:
        raise ScenarioError(f"bad start_pose/target: {err}") from err
    obstacles = [Obstacle(float(o["x"]), float(o["y"]), float(o["radius"]),
                          bool(o.get("tall", False)))
                 for o in data.get("obstacles", [])]
    events = []
    for ev in data.get("events", []):
        trig = dict(ev.get("trigger", {}))
        act = dict(ev.get("action", {}))
        if act.pop("type", "add_obstacle") != "add_obstacle":
            raise ScenarioError("only add_obstacle event actions are supported")
        events.append(ScenarioEvent(
            trigger=EventTrigger(kind=trig.pop("type", "manual"), **trig),
            action=AddObstacle(**act)))
    return Scenario(
        name=str(data.get("name", name)),
        start_pose=start,
        target=target,
        reach_radius=float(tg.get("reach_radius", 0.4)),
        obstacles=obstacles,
        events=events,
        motion=_params_from(MotionParams, data.get("motion", {}), "motion params"),
        sensors=_params_from(SensorParams, data.get("sensors", {}), "sensor params"),
        actions=_params_from(ActionParams, data.get("actions", {}), "action params"),
        max_cycles=int(data.get("max_cycles", 200)),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(data, name=path.stem)


def apply_event(world: World, action: AddObstacle) -> World:
    """Append the event's obstacle.  The obstacle must not swallow the robot;
    callers turn the ScenarioError into a rejected event record."""
    if action.x is None or action.y is None:
        raise ScenarioError("event placement was not resolved to coordinates")
    ob = Obstacle(action.x, action.y, action.radius, action.tall)
    if ob.contains(world.robot.x, world.robot.y):
        raise ScenarioError("event obstacle would swallow the robot")
    world.obstacles.append(ob)
    return world


# ---------------------------------------------------------------------------
# Trace helpers


def trace_dumps(record: dict) -> str:
    """Canonical one-line JSON for a trace record."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_trace(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(trace_dumps(rec) + "\n")


def load_trace(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="ascii") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def trace_bytes(records: Iterable[dict]) -> bytes:
    return "".join(trace_dumps(rec) + "\n" for rec in records).encode("ascii")


@dataclass
class RunReport:
    reached: bool
    cycles_used: int
    path_length_m: float
    detect_loss_recoveries: int
    reason: str


# ---------------------------------------------------------------------------
# The executor host: owns the world, executes commands, accumulates the trace


class _RunHost:
    def __init__(self, scenario: Scenario, seed: int,
                 sink: Optional[Callable[[dict], None]] = None,
                 on_tick: Optional[Callable[[World], None]] = None):
        self.scenario = scenario
        self.world = scenario.make_world(seed)
        self.trace: list[dict] = []
        self.cycle = 0
        self._sink = sink
        self._on_tick = on_tick
        self._pending: Optional[dict] = None
        self._events = [{"event": ev, "fired": False} for ev in scenario.events]
        self._emit({
            "type": "run", "schema_version": SCHEMA_VERSION,
            "scenario": scenario.name, "seed": seed,
            "start": {"x": scenario.start_pose.x, "y": scenario.start_pose.y,
                      "heading": scenario.start_pose.heading},
            "target": {"x": scenario.target[0], "y": scenario.target[1]},
            "reach_radius": scenario.reach_radius,
            "obstacles": [asdict(ob) for ob in scenario.obstacles],
        })

    def _emit(self, record: dict) -> None:
        self.trace.append(record)
        if self._sink is not None:
            self._sink(record)

    # -- executor-session host interface --------------------------------------

    def poll(self) -> Optional[str]:
        if self.world.target_reached():
            return "reached"
        if self.cycle >= self.scenario.max_cycles:
            return "cycle-budget"
        return None

    def perception(self) -> PerceptionRecord:
        d, x, y = read_odometry(self.world)
        record = PerceptionRecord(direction=d, x=x, y=y,
                                  obstacle_flag=sense_obstacle(self.world, self.scenario.sensors))
        self._pending = {
            "type": "cycle", "cycle": self.cycle,
            "perception": {"d": record.direction, "x": record.x, "y": record.y,
                           "obj": record.obstacle_flag},
            "look": None, "command": None, "chosen_direction": None,
            "ticks": 0, "pose": None, "stop_reason": None,
        }
        return record

    def looking(self) -> LookOutcome:
        result = act_looking(self.world, self.scenario.actions, self.scenario.sensors,
                             on_tick=self._on_tick)
        assert self._pending is not None
        self._pending["look"] = {"found": result.look.found, "bearing": result.look.bearing}
        self._pending["ticks"] += result.ticks
        return result.look

    def execute(self, command: ActionCommand) -> None:
        assert self._pending is not None
        if command.kind == "none":
            result = act_none(self.world)
        elif command.kind == "forward":
            result = act_forward(self.world, command.direction, self.scenario.actions,
                                 self.scenario.motion, self.scenario.sensors,
                                 on_tick=self._on_tick)
        elif command.kind == "search":
            result = act_search(self.world, command.direction, self.scenario.actions,
                                self.scenario.motion, self.scenario.sensors,
                                on_tick=self._on_tick)
        else:
            raise ScenarioError(f"executor cannot run command {command.kind!r} directly")
        pending = self._pending
        pending["command"] = {"kind": command.kind, "direction": command.direction}
        pending["chosen_direction"] = result.chosen_direction
        pending["ticks"] += result.ticks
        pending["stop_reason"] = result.stop_reason
        pose = self.world.robot
        pending["pose"] = {"x": pose.x, "y": pose.y, "heading": pose.heading}
        self._emit(pending)
        self._pending = None
        self._evaluate_triggers()
        self.cycle += 1

    # -- events ----------------------------------------------------------------

    def _evaluate_triggers(self) -> None:
        for slot in self._events:
            if slot["fired"]:
                continue
            trigger: EventTrigger = slot["event"].trigger
            if trigger.kind == "at_cycle" and self.cycle == trigger.cycle:
                pass
            elif trigger.kind == "on_first_detection" and self._look_found_now():
                pass
            else:
                continue
            slot["fired"] = True
            self.fire_event(slot["event"].action, trigger.kind)

    def _look_found_now(self) -> bool:
        last = self.trace[-1]
        return (last.get("type") == "cycle" and last.get("look") is not None
                and last["look"]["found"])

    def fire_event(self, action: AddObstacle, trigger_kind: str) -> dict:
        resolved = self._resolve_placement(action)
        record = {
            "type": "event", "cycle": self.cycle, "trigger": trigger_kind,
            "event": {"action": "add_obstacle", "x": resolved.x, "y": resolved.y,
                      "radius": resolved.radius, "tall": resolved.tall},
            "accepted": True, "reject_reason": None,
        }
        try:
            apply_event(self.world, resolved)
        except (ScenarioError, ValueError) as err:
            record["accepted"] = False
            record["reject_reason"] = str(err)
        self._emit(record)
        return record

    def _resolve_placement(self, action: AddObstacle) -> AddObstacle:
        if action.placement == "segment_midpoint":
            pose = self.world.robot
            return replace(action,
                           x=(pose.x + self.world.target_x) / 2.0,
                           y=(pose.y + self.world.target_y) / 2.0,
                           placement=None)
        return action

    # -- wrap-up -----------------------------------------------------------------

    def finish(self, reason: str) -> RunReport:
        recoveries = detect_loss_recoveries(self.trace)
        report = RunReport(
            reached=(reason == "reached"),
            cycles_used=self.cycle,
            path_length_m=self.world.odometer,
            detect_loss_recoveries=recoveries,
            reason=reason,
        )
        self._emit({
            "type": "terminal", "reached": report.reached,
            "cycles_used": report.cycles_used,
            "path_length_m": report.path_length_m,
            "detect_loss_recoveries": recoveries,
            "reason": reason,
        })
        return report


# ---------------------------------------------------------------------------
# Run drivers


def _drive_in_process(host: _RunHost, state: DecisionState) -> str:
    """Direct composition of executor and decision sides.  Every value still
    makes one encode/decode round trip so the traces match the stream modes
    byte for byte."""
    try:
        while True:
            reason = host.poll()
            if reason is not None:
                return reason
            record = requantize(SensorLine(host.perception())).record

            def look() -> LookOutcome:
                return requantize(LookReply(host.looking())).outcome

            command = state.step(record, look)
            host.execute(requantize(CommandLine(command)).command)
    except StuckError:
        return "stuck"


def _drive_pair(host: _RunHost, state: DecisionState) -> str:
    """Executor and client state machines over an in-memory line pipe."""
    exec_end, client_end = pipe_pair()
    box: list = []
    thread = threading.Thread(
        target=lambda: box.append(run_decision_client(state, client_end)),
        daemon=True)
    thread.start()
    report = run_executor_session(host, exec_end)
    thread.join()
    return report.reason


def _drive_socket(host: _RunHost, state: DecisionState, port: int) -> str:
    """Executor serves on a loopback socket; the client connects to it."""
    server = socket.create_server(("127.0.0.1", port))
    box: list = []

    def serve() -> None:
        conn, _ = server.accept()
        box.append(run_executor_session(host, SocketStream(conn)))

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    client = socket.create_connection(server.getsockname())
    run_decision_client(state, SocketStream(client))
    thread.join()
    server.close()
    return box[0].reason


def run(scenario: Scenario, seed: int, mode: str = "in-process",
        trace_path: Optional[str | Path] = None,
        rules_text: Optional[str] = None, backend: str = "rules",
        port: int = 0) -> tuple[RunReport, list[dict]]:
    """Execute one run and return (report, trace records).

    mode is "in-process" (direct composition), "pair" (both protocol state
    machines over an in-memory pipe) or "socket" (loopback TCP).  All three
    produce identical traces for the same scenario and seed.
    """
    host = _RunHost(scenario, seed)
    state = DecisionState(rules_text=rules_text, backend=backend)
    if mode == "in-process":
        reason = _drive_in_process(host, state)
    elif mode == "pair":
        reason = _drive_pair(host, state)
    elif mode == "socket":
        reason = _drive_socket(host, state, port)
    else:
        raise ValueError(f"unknown run mode {mode!r}")
    report = host.finish(reason)
    if trace_path is not None:
        write_trace(host.trace, trace_path)
    return report, host.trace


# ---------------------------------------------------------------------------
# Trace metrics


def cycle_records(trace: list[dict]) -> list[dict]:
    return [rec for rec in trace if rec.get("type") == "cycle"]


def terminal_record(trace: list[dict]) -> dict:
    for rec in trace:
        if rec.get("type") == "terminal":
            return rec
    raise ValueError("trace has no terminal record")


def look_sequence(trace: list[dict]) -> list[bool]:
    """Found flags of the cycles that performed a look."""
    return [rec["look"]["found"] for rec in cycle_records(trace) if rec["look"] is not None]


def detect_loss_recoveries(trace: list[dict]) -> int:
    """Number of found -> lost -> found transitions."""
    count = 0
    seen_found = False
    lost_since_found = False
    for found in look_sequence(trace):
        if found:
            if seen_found and lost_since_found:
                count += 1
            seen_found = True
            lost_since_found = False
        elif seen_found:
            lost_since_found = True
    return count


def has_recovery_subsequence(trace: list[dict]) -> bool:
    return detect_loss_recoveries(trace) >= 1


def initial_wire_direction(trace: list[dict]) -> float:
    """The initial direction exactly as the decision side stored it (first
    sensor line after its wire trip)."""
    first = cycle_records(trace)[0]
    p = first["perception"]
    record = PerceptionRecord(direction=p["d"], x=p["x"], y=p["y"],
                              obstacle_flag=p["obj"])
    return requantize(SensorLine(record)).record.direction


def not_found_commands_follow_initial(trace: list[dict]) -> bool:
    """True when every command emitted in a not-found cycle aims at the
    initial direction (the recovery mechanism)."""
    expected = initial_wire_direction(trace)
    for rec in cycle_records(trace):
        if rec["look"] is not None and not rec["look"]["found"]:
            direction = rec["command"]["direction"]
            if direction is None or direction != expected:
                return False
    return True


def fig_phase_indices(trace: list[dict]) -> Optional[dict]:
    """Cycle indices of the canonical run phases: target found, obstacle
    encountered, avoidance search, terminal reach.  None when the run does
    not exhibit them in order.  The obstacle may turn up in the same cycle
    the target is first seen."""
    cycles = cycle_records(trace)

    def first_at_or_after(start: int, pred) -> Optional[int]:
        for i in range(start, len(cycles)):
            if pred(cycles[i]):
                return i
        return None

    found = first_at_or_after(
        0, lambda r: r["look"] is not None and r["look"]["found"])
    if found is None:
        return None
    obstacle = first_at_or_after(
        found, lambda r: r["perception"]["obj"] == 1 or r["stop_reason"] == "obstacle")
    if obstacle is None:
        return None
    avoid = first_at_or_after(obstacle, lambda r: r["command"]["kind"] == "search")
    if avoid is None:
        return None
    if not terminal_record(trace)["reached"]:
        return None
    return {"found": found, "obstacle": obstacle, "avoid": avoid,
            "reached": len(cycles)}


# ---------------------------------------------------------------------------
# Batch statistics


def batch(scenario: Scenario, seeds: Iterable[int], mode: str = "in-process",
          rules_text: Optional[str] = None, backend: str = "rules") -> dict:
    """Run once per seed and aggregate."""
    rows = []
    for seed in seeds:
        report, trace = run(scenario, seed, mode=mode, rules_text=rules_text,
                            backend=backend)
        rows.append({
            "seed": seed, "reached": report.reached,
            "cycles": report.cycles_used,
            "path_length_m": report.path_length_m,
            "recoveries": report.detect_loss_recoveries,
            "reason": report.reason,
            "recovery_followed_initial": (
                has_recovery_subsequence(trace)
                and not_found_commands_follow_initial(trace)),
        })
    if not rows:
        raise ValueError("batch needs at least one seed")
    n = len(rows)
    successes = sum(1 for r in rows if r["reached"])
    return {
        "scenario": scenario.name,
        "runs": n,
        "successes": successes,
        "success_rate": successes / n,
        "mean_cycles": sum(r["cycles"] for r in rows) / n,
        "mean_path_length_m": sum(r["path_length_m"] for r in rows) / n,
        "rows": rows,
    }
