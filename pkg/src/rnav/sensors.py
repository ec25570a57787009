"""The three perception channels: odometry tuple, front obstacle flag, and a
noisy, occludable target detector.

Odometry is exact; all disturbance lives on the actuation side (motion noise)
and in the detector (Bernoulli false negatives standing in for an unreliable
image classifier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import World, angle_diff, bearing_to, first_hit_in_cone, segment_blocked


@dataclass(frozen=True)
class PerceptionRecord:
    """One sensor line: direction D, position X/Y, front obstacle flag Obj."""

    direction: float
    x: float
    y: float
    obstacle_flag: int  # 0 or 1


# Bearing reported when nothing was found; must be ignored downstream.
NOT_FOUND_BEARING = 0.0


@dataclass(frozen=True)
class LookOutcome:
    found: bool
    bearing: float = NOT_FOUND_BEARING  # world frame, meaningful only when found


@dataclass(frozen=True)
class SensorParams:
    fov_half_angle: float = 30.0
    detect_range: float = 5.0
    false_negative_rate: float = 0.1
    false_positive_rate: float = 0.0
    obstacle_threshold: float = 0.5
    obstacle_cone_half_angle: float = 30.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.false_negative_rate <= 1.0:
            raise ValueError("false_negative_rate must be in [0, 1]")
        if not 0.0 <= self.false_positive_rate <= 1.0:
            raise ValueError("false_positive_rate must be in [0, 1]")
        if self.fov_half_angle <= 0 or self.detect_range <= 0:
            raise ValueError("detector geometry must be positive")
        if self.obstacle_threshold <= 0 or self.obstacle_cone_half_angle <= 0:
            raise ValueError("obstacle sensor geometry must be positive")


def read_odometry(world: World) -> tuple[float, float, float]:
    """Exact (D, X, Y) of the robot."""
    pose = world.robot
    return pose.heading, pose.x, pose.y


def sense_obstacle(world: World, params: SensorParams) -> int:
    """1 iff some obstacle surface point is within obstacle_threshold of the
    robot and within the forward cone; equivalently, some ray in the cone
    first hits an obstacle within the threshold."""
    pose = world.robot
    hit = first_hit_in_cone(world, pose.x, pose.y, pose.heading,
                            params.obstacle_cone_half_angle)
    return 1 if hit <= params.obstacle_threshold else 0


def target_visible(world: World, absolute_gaze: float, params: SensorParams) -> bool:
    """Pure geometric predicate: target in range, inside the gaze FOV, and
    not hidden behind a tall obstacle."""
    pose = world.robot
    dist = pose.distance_to(world.target_x, world.target_y)
    if dist == 0.0 or dist > params.detect_range:
        # coincident robot/target has no bearing; treat as not visible
        return False
    bearing = bearing_to(pose.x, pose.y, world.target_x, world.target_y)
    if abs(angle_diff(bearing, absolute_gaze)) > params.fov_half_angle:
        return False
    for ob in world.obstacles:
        if ob.tall and segment_blocked(pose.x, pose.y, world.target_x, world.target_y, ob):
            return False
    return True


def detect_target(world: World, absolute_gaze: float, params: SensorParams) -> LookOutcome:
    """Stochastic detector: a geometric hit is reported with probability
    1 - false_negative_rate; with a nonzero false-positive rate a miss may be
    reported as found along the gaze direction."""
    if target_visible(world, absolute_gaze, params):
        u = world.rng.random()
        if u >= params.false_negative_rate:
            bearing = bearing_to(world.robot.x, world.robot.y,
                                 world.target_x, world.target_y)
            return LookOutcome(found=True, bearing=bearing)
        return LookOutcome(found=False)
    if params.false_positive_rate > 0.0:
        u = world.rng.random()
        if u < params.false_positive_rate:
            return LookOutcome(found=True, bearing=absolute_gaze)
    return LookOutcome(found=False)
