import math
import random

import pytest

from conftest import make_world, oracle_search_choice
from rnav.actions import (ActionCommand, ActionParams, StuckError, act_forward,
                          act_looking, act_none, act_search, forward_bounds,
                          looking_bounds, search_bounds)
from rnav.geometry import MotionParams, Obstacle, bearing_to, normalize_angle
from rnav.sensors import SensorParams

AP = ActionParams()
MOTION = MotionParams()
QUIET = MotionParams(noise_sigma=0.0)
EXACT = SensorParams(false_negative_rate=0.0)
BLIND = SensorParams(false_negative_rate=1.0)


class TestActionCommand:
    def test_variants(self):
        assert ActionCommand.none().kind == "none"
        assert ActionCommand.looking().direction is None
        assert ActionCommand.search(370.0).direction == pytest.approx(10.0)
        assert ActionCommand.forward(-190.0).direction == pytest.approx(170.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ActionCommand("jump")
        with pytest.raises(ValueError):
            ActionCommand("forward")
        with pytest.raises(ValueError):
            ActionCommand("none", 10.0)


class TestLooking:
    def test_target_dead_ahead(self):
        w = make_world(target=(2.0, 0.0))
        result = act_looking(w, AP, EXACT)
        assert result.look.found
        assert result.ticks == 1
        assert result.look.bearing == bearing_to(0, 0, 2.0, 0.0)

    def test_full_sweep_when_nothing_found(self):
        w = make_world(target=(2.0, 0.0))
        result = act_looking(w, AP, BLIND)
        assert not result.look.found
        assert result.ticks == 9
        assert (w.robot.x, w.robot.y, w.robot.heading) == (0.0, 0.0, 0.0)
        assert w.clock == 9

    def test_target_outside_sweep(self):
        # relative bearing 150: beyond the +/-60 sweep plus 30 fov
        w = make_world(target=(2.0 * math.cos(math.radians(150)),
                               2.0 * math.sin(math.radians(150))))
        result = act_looking(w, AP, EXACT)
        assert not result.look.found
        assert result.ticks == 9

    def test_edge_of_sweep_found(self):
        # bearing 85: gaze +60 with fov 30 reaches it
        w = make_world(target=(2.0 * math.cos(math.radians(85)),
                               2.0 * math.sin(math.radians(85))))
        result = act_looking(w, AP, EXACT)
        assert result.look.found
        assert result.ticks == 8  # offsets 0,+15,-15,...,+60

    def test_positive_offset_tried_first(self):
        # target at +20: gaze +15 sees it (offset order 0, +15, -15)
        w = make_world(target=(2.0 * math.cos(math.radians(20)),
                               2.0 * math.sin(math.radians(20))))
        result = act_looking(w, AP, EXACT)
        assert result.look.found
        assert result.ticks == 2


class TestForward:
    def test_clean_run(self):
        w = make_world()
        result = act_forward(w, 0.0, AP, QUIET, EXACT)
        assert result.stop_reason == "completed"
        assert result.ticks == 50
        assert w.robot.x == pytest.approx(1.0, abs=1e-9)
        assert w.robot.y == 0.0

    def test_stops_at_obstacle(self):
        # surface 0.4 m ahead on the path
        w = make_world(obstacles=[Obstacle(0.9, 0.0, 0.5)])
        result = act_forward(w, 0.0, AP, QUIET, EXACT)
        assert result.stop_reason == "obstacle"
        assert result.ticks == 0
        assert w.robot.x < 0.4

    def test_stops_en_route(self):
        # surface 0.9 m ahead: advance ~0.4 then stop
        w = make_world(obstacles=[Obstacle(1.4, 0.0, 0.5)])
        result = act_forward(w, 0.0, AP, QUIET, EXACT)
        assert result.stop_reason == "obstacle"
        assert 0.3 < w.robot.x < 0.45

    def test_half_turn_rotation_ticks(self):
        w = make_world()
        result = act_forward(w, 180.0, AP, QUIET, EXACT)
        assert result.ticks == math.ceil(180.0 / 4.5) + 50
        assert w.robot.x == pytest.approx(-1.0, abs=1e-9)

    def test_obstacle_inserted_mid_action_stops_within_one_tick(self):
        w = make_world()
        inserted_at = []

        def insert(world):
            if world.clock == 10 and not inserted_at:
                # drop an obstacle right in front of the moving robot
                world.obstacles.append(
                    Obstacle(world.robot.x + 0.45, world.robot.y, 0.2))
                inserted_at.append(world.clock)

        result = act_forward(w, 0.0, AP, QUIET, EXACT, on_tick=insert)
        assert result.stop_reason == "obstacle"
        assert inserted_at == [10]
        assert result.ticks <= 11


class TestSearch:
    def test_empty_world_keeps_direction(self):
        w = make_world()
        result = act_search(w, 0.0, AP, QUIET, EXACT)
        assert result.chosen_direction == 0.0
        assert w.robot.x == pytest.approx(0.5, abs=1e-9)

    def test_sidesteps_blocked_direction(self):
        # ray at 0 hits at 0.8 < 1.2; +15 is clear by ray and cone
        w = make_world(obstacles=[Obstacle(1.0, 0.0, 0.2)])
        result = act_search(w, 0.0, AP, QUIET, EXACT)
        assert result.chosen_direction == pytest.approx(15.0)

    def test_enclosure_raises_stuck(self):
        ring = [Obstacle(0.8 * math.cos(math.radians(a)),
                         0.8 * math.sin(math.radians(a)), 0.25)
                for a in range(0, 360, 30)]
        w = make_world(obstacles=ring)
        with pytest.raises(StuckError):
            act_search(w, 0.0, AP, QUIET, EXACT)

    def test_matches_exhaustive_scan_oracle(self):
        rng = random.Random(57)
        checked = 0
        while checked < 60:
            obstacles = [Obstacle(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5),
                                  rng.uniform(0.15, 0.5))
                         for _ in range(rng.randint(1, 4))]
            if any(math.hypot(ob.x, ob.y) <= ob.radius + 0.05 for ob in obstacles):
                continue
            direction = normalize_angle(rng.uniform(-180, 180))
            want, margin = oracle_search_choice(obstacles, 0.0, 0.0, direction)
            if want is None or margin < 5e-3:
                continue  # enclosed, or too close to an acceptance boundary
            w = make_world(obstacles=obstacles)
            result = act_search(w, direction, AP, QUIET, EXACT)
            assert result.chosen_direction == pytest.approx(normalize_angle(want))
            checked += 1


class TestNone:
    def test_world_untouched(self):
        w = make_world(obstacles=[Obstacle(1.0, 1.0, 0.2)], seed=9)
        before = (w.robot.x, w.robot.y, w.robot.heading, w.clock,
                  tuple(w.obstacles), w.rng.getstate())
        result = act_none(w)
        assert result.ticks == 0
        assert before == (w.robot.x, w.robot.y, w.robot.heading, w.clock,
                          tuple(w.obstacles), w.rng.getstate())

    def test_idempotent(self):
        w = make_world()
        act_none(w)
        act_none(w)
        assert (w.robot.x, w.robot.y, w.robot.heading, w.clock) == (0, 0, 0, 0)


def _random_open_world(rng):
    """A world with obstacles that leave the robot an escape: everything is
    kept a little away from the robot and off at most one side."""
    obstacles = []
    for _ in range(rng.randint(0, 3)):
        d = rng.uniform(0.7, 3.0)
        b = rng.uniform(-120.0, 120.0)
        obstacles.append(Obstacle(d * math.cos(math.radians(b)),
                                  d * math.sin(math.radians(b)),
                                  rng.uniform(0.1, 0.35)))
    return make_world(heading=rng.uniform(-180, 180), obstacles=obstacles,
                      target=(rng.uniform(-4, 4), rng.uniform(-4, 4)),
                      seed=rng.randrange(2 ** 32))


class TestTerminationBounds:
    """Light version of the acceptance fuzz; the acceptance suite runs the
    full 1000 worlds per action."""

    N = 200

    def test_looking_bound(self):
        rng = random.Random(71)
        bound = looking_bounds(AP)
        for _ in range(self.N):
            w = _random_open_world(rng)
            result = act_looking(w, AP, SensorParams())
            assert result.ticks <= bound

    def test_forward_bound_and_no_penetration(self):
        rng = random.Random(72)
        bound = forward_bounds(AP, MOTION)
        for _ in range(self.N):
            w = _random_open_world(rng)
            result = act_forward(w, rng.uniform(-180, 180), AP, MOTION,
                                 SensorParams())
            assert result.ticks <= bound
            assert not any(ob.contains(w.robot.x, w.robot.y) for ob in w.obstacles)

    def test_search_bound_without_stuck(self):
        rng = random.Random(73)
        bound = search_bounds(AP, MOTION)
        for _ in range(self.N):
            w = _random_open_world(rng)
            result = act_search(w, rng.uniform(-180, 180), AP, MOTION,
                                SensorParams())
            assert result.ticks <= bound
            assert not any(ob.contains(w.robot.x, w.robot.y) for ob in w.obstacles)
