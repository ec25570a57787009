import math
import random

import pytest

from conftest import (make_world, oracle_surface_point_flag,
                      oracle_target_visible)
from rnav.geometry import MotionParams, Obstacle, bearing_to, step_robot
from rnav.sensors import (LookOutcome, SensorParams, detect_target,
                          read_odometry, sense_obstacle, target_visible)

DEFAULTS = SensorParams()
EXACT = SensorParams(false_negative_rate=0.0)


class TestReadOdometry:
    def test_reports_pose(self):
        w = make_world(x=1.25, y=-0.5, heading=45.0)
        assert read_odometry(w) == (45.0, 1.25, -0.5)

    def test_initial_pose_of_scenario(self):
        from rnav.harness import load_scenario
        sc = load_scenario("scenarios/exp1.json")
        w = sc.make_world(seed=1)
        assert read_odometry(w) == (sc.start_pose.heading, sc.start_pose.x,
                                    sc.start_pose.y)

    def test_tracks_noiseless_tick(self):
        w = make_world()
        step_robot(w, 0.2, 0.0, MotionParams(noise_sigma=0.0))
        d, x, y = read_odometry(w)
        assert (d, y) == (0.0, 0.0)
        assert x == pytest.approx(0.02, abs=1e-12)


class TestSenseObstacle:
    def test_surface_dead_ahead(self):
        # surface 0.3 m ahead: circle center 0.7, radius 0.4
        w = make_world(obstacles=[Obstacle(0.7, 0.0, 0.4)])
        assert sense_obstacle(w, DEFAULTS) == 1

    def test_same_obstacle_behind(self):
        w = make_world(obstacles=[Obstacle(-0.7, 0.0, 0.4)])
        assert sense_obstacle(w, DEFAULTS) == 0

    def test_empty_world(self):
        assert sense_obstacle(make_world(), DEFAULTS) == 0

    def test_against_surface_point_oracle(self):
        rng = random.Random(23)
        checked = 0
        while checked < 1000:
            obstacles = [Obstacle(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                  rng.uniform(0.1, 0.6))
                         for _ in range(rng.randint(1, 4))]
            if any(math.hypot(ob.x, ob.y) <= ob.radius + 1e-3 for ob in obstacles):
                continue
            heading = rng.uniform(-180, 180)
            w = make_world(heading=heading, obstacles=obstacles)
            got = sense_obstacle(w, DEFAULTS)
            want = oracle_surface_point_flag(obstacles, 0.0, 0.0, heading,
                                             DEFAULTS.obstacle_threshold,
                                             DEFAULTS.obstacle_cone_half_angle)
            if got != want:
                # boundary cases thinner than the oracle's sampling grid
                margin = abs(min(math.hypot(ob.x, ob.y) - ob.radius
                                 for ob in obstacles) - DEFAULTS.obstacle_threshold)
                assert margin < 5e-3, (obstacles, heading, got, want)
                continue
            checked += 1

    def test_rotation_symmetry(self):
        rng = random.Random(31)
        for _ in range(300):
            obstacles = [Obstacle(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                  rng.uniform(0.1, 0.5))
                         for _ in range(rng.randint(1, 3))]
            if any(math.hypot(ob.x, ob.y) <= ob.radius for ob in obstacles):
                continue
            heading = rng.uniform(-180, 180)
            phi = rng.uniform(-180, 180)
            base = sense_obstacle(make_world(heading=heading, obstacles=obstacles),
                                  DEFAULTS)
            c, s = math.cos(math.radians(phi)), math.sin(math.radians(phi))
            rotated = [Obstacle(ob.x * c - ob.y * s, ob.x * s + ob.y * c, ob.radius)
                       for ob in obstacles]
            turned = sense_obstacle(make_world(heading=heading + phi,
                                               obstacles=rotated), DEFAULTS)
            assert base == turned


class TestDetectTarget:
    def test_clean_hit_reports_exact_bearing(self):
        w = make_world(target=(2.0, 1.0))
        out = detect_target(w, 30.0, EXACT)
        assert out.found
        assert out.bearing == bearing_to(0, 0, 2.0, 1.0)

    def test_tall_obstacle_occludes(self):
        w = make_world(target=(3.0, 0.0),
                       obstacles=[Obstacle(1.5, 0.0, 0.3, tall=True)])
        assert not detect_target(w, 0.0, EXACT).found

    def test_short_obstacle_does_not_occlude(self):
        w = make_world(target=(3.0, 0.0),
                       obstacles=[Obstacle(1.5, 0.0, 0.3, tall=False)])
        assert detect_target(w, 0.0, EXACT).found

    def test_tall_obstacle_off_segment_ignored(self):
        w = make_world(target=(3.0, 0.0),
                       obstacles=[Obstacle(1.5, 1.0, 0.3, tall=True)])
        assert detect_target(w, 0.0, EXACT).found

    def test_always_blind_when_fn_is_one(self):
        params = SensorParams(false_negative_rate=1.0)
        w = make_world(target=(2.0, 0.0))
        for _ in range(50):
            assert not detect_target(w, 0.0, params).found

    def test_out_of_range(self):
        w = make_world(target=(6.0, 0.0))
        assert not detect_target(w, 0.0, EXACT).found

    def test_outside_fov(self):
        w = make_world(target=(2.0, 0.0))
        assert not detect_target(w, 40.0, EXACT).found
        assert detect_target(w, 25.0, EXACT).found

    def test_geometric_miss_never_found_for_any_fn(self):
        w = make_world(target=(2.0, 2.0))  # bearing 45, gaze 45+fov outside
        for fn in (0.0, 0.5, 1.0):
            params = SensorParams(false_negative_rate=fn, false_positive_rate=0.0)
            assert not detect_target(w, -60.0, params).found

    def test_false_positive_reports_gaze(self):
        params = SensorParams(false_negative_rate=0.0, false_positive_rate=1.0)
        w = make_world(target=(6.0, 0.0))  # out of range: geometric miss
        out = detect_target(w, 12.0, params)
        assert out.found and out.bearing == 12.0

    def test_matches_geometry_oracle(self):
        rng = random.Random(41)
        checked = 0
        while checked < 1000:
            obstacles = [Obstacle(rng.uniform(-3, 3), rng.uniform(-3, 3),
                                  rng.uniform(0.1, 0.6), tall=rng.random() < 0.6)
                         for _ in range(rng.randint(0, 4))]
            tx, ty = rng.uniform(-4, 4), rng.uniform(-4, 4)
            gaze = rng.uniform(-180, 180)
            if any(math.hypot(ob.x, ob.y) <= ob.radius for ob in obstacles):
                continue
            if math.hypot(tx, ty) < 1e-6:
                continue
            # skip boundary-width cases the sampling oracle cannot resolve
            dist = math.hypot(tx, ty)
            if abs(dist - DEFAULTS.detect_range) < 5e-3:
                continue
            bearing = math.degrees(math.atan2(ty, tx))
            off = abs((bearing - gaze + 180.0) % 360.0 - 180.0)
            if abs(off - DEFAULTS.fov_half_angle) < 1e-2:
                continue
            seg_margin = min((_segment_distance(0, 0, tx, ty, ob) - ob.radius
                              for ob in obstacles if ob.tall), default=1.0)
            if abs(seg_margin) < 5e-3:
                continue
            w = make_world(target=(tx, ty), obstacles=obstacles)
            got = detect_target(w, gaze, EXACT).found
            want = oracle_target_visible(w, gaze, DEFAULTS.fov_half_angle,
                                         DEFAULTS.detect_range)
            assert got == want, (obstacles, (tx, ty), gaze)
            checked += 1

    def test_visibility_predicate_matches_detector(self):
        w = make_world(target=(2.0, 0.0))
        assert target_visible(w, 0.0, DEFAULTS)
        assert detect_target(w, 0.0, EXACT) == LookOutcome(found=True, bearing=0.0)


def _segment_distance(px, py, qx, qy, ob) -> float:
    dx, dy = qx - px, qy - py
    t = ((ob.x - px) * dx + (ob.y - py) * dy) / (dx * dx + dy * dy)
    t = min(1.0, max(0.0, t))
    return math.hypot(px + t * dx - ob.x, py + t * dy - ob.y)
