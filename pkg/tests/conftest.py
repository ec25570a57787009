"""Shared world builders and independent geometry oracles for the tests.

The oracles here are deliberately brute force (dense sampling, exhaustive
scans) so they stay independent of the analytic implementations they check.
"""

from __future__ import annotations

import math

import numpy as np

from rnav.geometry import Obstacle, Pose, World


def make_world(x=0.0, y=0.0, heading=0.0, obstacles=(), target=(10.0, 10.0),
               seed=0, reach_radius=0.4) -> World:
    return World.create(Pose(x, y, heading), list(obstacles), target,
                        reach_radius=reach_radius, seed=seed)


def oracle_ray_distance(obstacles, ox, oy, angle_deg, max_dist, step=0.001):
    """Brute-force sampling oracle: walk the ray in small steps and report
    the first sample at or inside any obstacle circle."""
    if not obstacles:
        return max_dist
    ts = np.arange(0.0, max_dist, step)
    px = ox + ts * math.cos(math.radians(angle_deg))
    py = oy + ts * math.sin(math.radians(angle_deg))
    inside = np.zeros(len(ts), dtype=bool)
    for ob in obstacles:
        inside |= (px - ob.x) ** 2 + (py - ob.y) ** 2 <= ob.radius ** 2
    hits = np.nonzero(inside)[0]
    return float(ts[hits[0]]) if len(hits) else max_dist


def oracle_surface_point_flag(obstacles, px, py, heading, threshold, cone_half,
                              samples=7200):
    """Brute-force obstacle flag: sample every obstacle's boundary and look
    for a surface point within the threshold and inside the heading cone."""
    psi = np.linspace(0.0, 360.0, samples, endpoint=False)
    cx = np.cos(np.radians(psi))
    sy = np.sin(np.radians(psi))
    for ob in obstacles:
        qx = ob.x + ob.radius * cx
        qy = ob.y + ob.radius * sy
        dist = np.hypot(qx - px, qy - py)
        bearing = np.degrees(np.arctan2(qy - py, qx - px))
        off = np.abs((bearing - heading + 180.0) % 360.0 - 180.0)
        if np.any((dist <= threshold) & (off <= cone_half)):
            return 1
    return 0


def oracle_target_visible(world: World, gaze, fov_half, detect_range,
                          step=0.001) -> bool:
    """Brute-force detector geometry: range and angle checks plus dense
    sampling of the sight segment against tall obstacles."""
    px, py = world.robot.x, world.robot.y
    tx, ty = world.target_x, world.target_y
    dist = math.hypot(tx - px, ty - py)
    if dist == 0.0 or dist > detect_range:
        return False
    bearing = math.degrees(math.atan2(ty - py, tx - px))
    off = abs((bearing - gaze + 180.0) % 360.0 - 180.0)
    if off > fov_half:
        return False
    talls = [ob for ob in world.obstacles if ob.tall]
    if talls:
        ts = np.arange(0.0, 1.0, step / dist)
        sx = px + ts * (tx - px)
        sy = py + ts * (ty - py)
        for ob in talls:
            if np.any((sx - ob.x) ** 2 + (sy - ob.y) ** 2 < ob.radius ** 2):
                return False
    return True


def oracle_cone_first_hit(obstacles, px, py, heading, cone_half,
                          max_dist=6.0, angle_step=0.25, ray_step=0.002):
    """Sampled version of the front-cone first-hit distance."""
    best = math.inf
    angles = np.arange(-cone_half, cone_half + 1e-9, angle_step)
    for off in angles:
        d = oracle_ray_distance(obstacles, px, py, heading + off, max_dist,
                                step=ray_step)
        if d < best:
            best = d
    return best if best < max_dist else math.inf


def oracle_quad_ray_hits(obstacles, px, py, angles_deg):
    """First-hit distance for many ray directions at once, straight from the
    line-circle quadratic (vectorized over directions and obstacles)."""
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    ux = np.cos(np.radians(angles))
    uy = np.sin(np.radians(angles))
    best = np.full(len(angles), np.inf)
    for ob in obstacles:
        fx, fy = px - ob.x, py - ob.y
        b = fx * ux + fy * uy
        c = fx * fx + fy * fy - ob.radius ** 2
        disc = b * b - c
        ok = disc >= 0
        t = np.where(ok, -b - np.sqrt(np.maximum(disc, 0.0)), np.inf)
        t = np.where(ok & (t >= 0), t, np.inf)
        if c < 0:
            t = np.zeros_like(t)
        best = np.minimum(best, t)
    return best


def oracle_cone_hit_quad(obstacles, px, py, heading, cone_half, angle_step=0.05):
    """Front-cone first hit as a dense scan of quadratic ray hits."""
    offs = np.arange(-cone_half, cone_half + angle_step / 2, angle_step)
    hits = oracle_quad_ray_hits(obstacles, px, py, heading + offs)
    return float(hits.min()) if len(hits) else math.inf


def oracle_search_choice(obstacles, px, py, direction, clearance=1.2,
                         threshold=0.5, widened_cone=32.0, step=15.0):
    """Exhaustive candidate scan: the first heading in the k = 0, +1, -1, ...
    order whose ray is clear and whose widened front cone stays beyond the
    obstacle threshold.  Returns (choice or None, min boundary margin)."""
    candidates = [direction]
    for k in range(1, 13):
        candidates.append(direction + k * step)
        candidates.append(direction - k * step)
    choice = None
    margin = math.inf
    for cand in candidates:
        ray = float(oracle_quad_ray_hits(obstacles, px, py, [cand])[0])
        cone = oracle_cone_hit_quad(obstacles, px, py, cand, widened_cone)
        margin = min(margin, abs(min(ray, clearance + 1.0) - clearance),
                     abs(min(cone, threshold + 1.0) - threshold))
        if ray >= clearance and cone > threshold and choice is None:
            choice = cand
    return choice, margin
