"""2D world model: unicycle kinematics with multiplicative actuation noise,
circular obstacles, and ray clearance queries.

Angles are degrees everywhere, normalized to (-180, 180] with +180 kept.
Distances are meters, time is simulation ticks of ``MotionParams.tick``
seconds.

Randomness: every world owns a single seeded generator.  Draw order is fixed
and documented so runs are reproducible:

* ``step_robot`` draws exactly two Gaussian factors per tick, linear first,
  then angular, regardless of the commanded values or ``noise_sigma``.
* the target detector (see :mod:`rnav.sensors`) draws one uniform per
  geometric hit, and one per miss only when the false-positive rate is > 0.

Nothing else consumes the generator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field


class GeometryError(ValueError):
    """Domain error: non-finite input, degenerate geometry, or a command
    outside the actuator envelope."""


def normalize_angle(a: float) -> float:
    """Map an angle in degrees onto (-180, 180], keeping +180."""
    if not math.isfinite(a):
        raise GeometryError(f"non-finite angle: {a!r}")
    r = math.fmod(a, 360.0)
    if r > 180.0:
        r -= 360.0
    elif r <= -180.0:
        r += 360.0
    return r


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from b to a, in (-180, 180]."""
    return normalize_angle(a - b)


def bearing_to(from_x: float, from_y: float, to_x: float, to_y: float) -> float:
    """World-frame bearing of (to_x, to_y) seen from (from_x, from_y)."""
    dx = to_x - from_x
    dy = to_y - from_y
    if dx == 0.0 and dy == 0.0:
        raise GeometryError("bearing undefined for coincident points")
    return normalize_angle(math.degrees(math.atan2(dy, dx)))


@dataclass
class Pose:
    x: float
    y: float
    heading: float  # degrees, (-180, 180]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError("non-finite pose position")
        self.heading = normalize_angle(self.heading)

    def copy(self) -> "Pose":
        return Pose(self.x, self.y, self.heading)

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(self.x - x, self.y - y)


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float
    tall: bool = False  # tall obstacles also occlude line of sight

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise GeometryError(f"obstacle radius must be > 0, got {self.radius}")

    def contains(self, px: float, py: float) -> bool:
        """Strict interior test."""
        return math.hypot(px - self.x, py - self.y) < self.radius


@dataclass(frozen=True)
class MotionParams:
    linear_speed: float = 0.2    # m/s
    angular_speed: float = 45.0  # deg/s
    tick: float = 0.1            # s
    noise_sigma: float = 0.02    # multiplicative std-dev per commanded component

    def __post_init__(self) -> None:
        if self.linear_speed <= 0 or self.angular_speed <= 0 or self.tick <= 0:
            raise GeometryError("motion params must be strictly positive")
        if self.noise_sigma < 0:
            raise GeometryError("noise_sigma must be >= 0")


@dataclass
class World:
    """Single source of truth for a run; mutated only by the sim loop."""

    robot: Pose
    obstacles: list[Obstacle]
    target_x: float
    target_y: float
    reach_radius: float = 0.4
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    clock: int = 0          # ticks elapsed
    odometer: float = 0.0   # meters of translation accumulated

    @classmethod
    def create(cls, robot: Pose, obstacles: list[Obstacle], target: tuple[float, float],
               reach_radius: float = 0.4, seed: int = 0) -> "World":
        return cls(robot=robot.copy(), obstacles=list(obstacles),
                   target_x=target[0], target_y=target[1],
                   reach_radius=reach_radius, rng=random.Random(seed))

    def copy(self) -> "World":
        rng = random.Random()
        rng.setstate(self.rng.getstate())
        return World(robot=self.robot.copy(), obstacles=list(self.obstacles),
                     target_x=self.target_x, target_y=self.target_y,
                     reach_radius=self.reach_radius, rng=rng,
                     clock=self.clock, odometer=self.odometer)

    def distance_to_target(self) -> float:
        return self.robot.distance_to(self.target_x, self.target_y)

    def target_reached(self) -> bool:
        return self.distance_to_target() <= self.reach_radius


def ray_clear(world: World, origin_x: float, origin_y: float, angle: float,
              max_dist: float) -> float:
    """Distance along the ray to the first obstacle circle, capped at max_dist.

    Returns 0.0 if the origin is inside an obstacle.  Both tall and short
    obstacles block motion, so both count here.
    """
    if not max_dist > 0.0:
        raise GeometryError("max_dist must be > 0")
    ux = math.cos(math.radians(angle))
    uy = math.sin(math.radians(angle))
    best = max_dist
    for ob in world.obstacles:
        fx = origin_x - ob.x
        fy = origin_y - ob.y
        c = fx * fx + fy * fy - ob.radius * ob.radius
        if c < 0.0:
            return 0.0
        # |f + t*u|^2 = r^2 with |u| = 1: t^2 + 2(f.u)t + c = 0
        b = fx * ux + fy * uy
        disc = b * b - c
        if disc < 0.0:
            continue
        t = -b - math.sqrt(disc)
        if 0.0 <= t < best:
            best = t
    return best


def first_hit_in_cone(world: World, px: float, py: float, heading: float,
                      cone_half_angle: float) -> float:
    """Shortest first-intersection distance over all ray directions within
    +/- cone_half_angle of heading, or inf when every direction misses.

    For a circle the hit distance grows monotonically with the angular offset
    from the straight-at-center direction, so the cone minimum is attained at
    the center bearing clamped into the cone.
    """
    best = math.inf
    for ob in world.obstacles:
        dx = ob.x - px
        dy = ob.y - py
        d = math.hypot(dx, dy)
        if d <= ob.radius:
            return 0.0
        center_bearing = math.degrees(math.atan2(dy, dx))
        off = abs(angle_diff(center_bearing, heading))
        gap = max(0.0, off - cone_half_angle)  # offset of nearest cone ray
        if gap >= 90.0:
            continue
        s = d * math.sin(math.radians(gap))
        if s >= ob.radius:
            continue
        hit = d * math.cos(math.radians(gap)) - math.sqrt(ob.radius * ob.radius - s * s)
        best = min(best, hit)
    return best


def segment_blocked(px: float, py: float, qx: float, qy: float, ob: Obstacle) -> bool:
    """True when the open segment p-q passes through the obstacle disk."""
    dx = qx - px
    dy = qy - py
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        return ob.contains(px, py)
    t = ((ob.x - px) * dx + (ob.y - py) * dy) / len2
    t = min(1.0, max(0.0, t))
    cx = px + t * dx
    cy = py + t * dy
    return math.hypot(cx - ob.x, cy - ob.y) < ob.radius


def step_robot(world: World, linear: float, angular: float, params: MotionParams) -> World:
    """Advance one tick of unicycle motion, in place.

    Each commanded component is scaled by an independent Gaussian factor
    N(1, noise_sigma^2); both factors are drawn every tick (linear first) so
    the draw sequence does not depend on the command.  Rotation applies
    first, then translation along the new heading.  A translation that would
    end strictly inside an obstacle is cancelled (contact stop): position is
    unchanged, the heading update stands.
    """
    eps = 1e-9
    if abs(linear) > params.linear_speed + eps:
        raise GeometryError(f"linear command {linear} exceeds {params.linear_speed}")
    if abs(angular) > params.angular_speed + eps:
        raise GeometryError(f"angular command {angular} exceeds {params.angular_speed}")

    lin_factor = world.rng.normalvariate(1.0, params.noise_sigma)
    ang_factor = world.rng.normalvariate(1.0, params.noise_sigma)

    pose = world.robot
    pose.heading = normalize_angle(pose.heading + angular * ang_factor * params.tick)
    dist = linear * lin_factor * params.tick
    if dist != 0.0:
        nx = pose.x + dist * math.cos(math.radians(pose.heading))
        ny = pose.y + dist * math.sin(math.radians(pose.heading))
        blocked = any(ob.contains(nx, ny) for ob in world.obstacles)
        if not blocked:
            world.odometer += math.hypot(nx - pose.x, ny - pose.y)
            pose.x = nx
            pose.y = ny
    world.clock += 1
    return world
