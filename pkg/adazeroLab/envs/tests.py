import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from rest_framework import serializers

from adazeroLab.exceptions import ContractViolation
from envs.density import VisitDensity, accumulate_density
from envs.grids import AGENT, Action, GridSpec, GridWorld, dark_chamber, four_rooms, shortest_path_length
from envs.mdp import TwoActionMDP
from envs.serializers import load_grid_spec


def walk(env, actions):
    results = []
    for action in actions:
        results.append(env.step(action))
        if results[-1].done:
            break
    return results


class DarkChamberTestCase(SimpleTestCase):
    """
    The 50x50 rewardless chamber.
    """

    def setUp(self):
        self.env = GridWorld(dark_chamber())

    def test_reset_places_agent_bottom_left(self):
        obs = self.env.reset(seed=0)
        self.assertEqual(self.env.position, (49, 0), "Testing: start is the bottom-left corner.")
        self.assertEqual(obs.shape, (50, 50, 1))
        self.assertEqual(obs[49, 0, 0], AGENT)

    def test_reset_is_deterministic(self):
        first = self.env.reset(seed=3)
        second = self.env.reset(seed=3)
        self.assertTrue(np.array_equal(first, second))

    def test_every_step_pays_nothing(self):
        self.env.reset(seed=1)
        rng = np.random.default_rng(1)
        results = walk(self.env, rng.integers(0, 4, size=600))
        self.assertTrue(all(result.r_ext == 0.0 for result in results), "Testing: r_ext is always zero.")
        self.assertTrue(results[-1].done and results[-1].info['truncated'], "Postcondition: episode cap reached.")
        self.assertEqual(len(results), 500)

    def test_boundary_blocks_moves(self):
        self.env.reset()
        result = self.env.step(Action.LEFT)
        self.assertEqual(self.env.position, (49, 0))
        self.assertTrue(result.info['blocked'])

    def test_observation_values_in_unit_interval(self):
        obs = self.env.reset()
        self.assertTrue(np.all((obs >= 0.0) & (obs <= 1.0)))


class FourRoomsTestCase(SimpleTestCase):

    def setUp(self):
        self.spec = four_rooms()
        self.env = GridWorld(self.spec)

    def test_start_top_right_goal_bottom_left(self):
        self.env.reset()
        self.assertEqual(self.env.position, (1, 11))
        self.assertEqual(self.spec.goal, (11, 1))
        self.assertEqual((self.spec.height, self.spec.width), (13, 13))

    def test_wall_bump_keeps_position(self):
        self.env.reset()
        result = self.env.step(Action.UP)  # row 0 is the outer wall
        self.assertEqual(self.env.position, (1, 11), "Testing: position unchanged.")
        self.assertEqual(result.r_ext, 0.0)
        self.assertFalse(result.done)

    def test_entering_goal_pays_and_ends(self):
        self.env.reset()
        path = [Action.DOWN] * 5 + [Action.LEFT] * 2 + [Action.DOWN] * 4 + [Action.LEFT] * 8 + [Action.DOWN]
        results = walk(self.env, path)
        self.assertEqual(self.env.position, (11, 1))
        self.assertEqual(results[-1].r_ext, 1.0, "Testing: goal reward is 1.")
        self.assertTrue(results[-1].done)
        self.assertEqual(sum(r.r_ext for r in results), 1.0, "Postcondition: episode return is 1.")

    def test_step_after_done_is_rejected(self):
        env = GridWorld(GridSpec('tiny', 1, 2, start=(0, 0), goal=(0, 1)))
        env.reset()
        self.assertTrue(env.step(Action.RIGHT).done)
        with self.assertRaises(ContractViolation):
            env.step(Action.LEFT)

    def test_shortest_path(self):
        self.assertEqual(shortest_path_length(self.spec), 20)

    def test_agent_never_enters_walls(self):
        rng = np.random.default_rng(2)
        self.env.reset()
        for action in rng.integers(0, 4, size=2000):
            result = self.env.step(action)
            self.assertNotIn(self.env.position, self.spec.walls)
            if result.done:
                self.env.reset()

    def test_same_actions_same_trajectory(self):
        actions = np.random.default_rng(4).integers(0, 4, size=200)
        runs = []
        for _ in range(2):
            self.env.reset(seed=7)
            runs.append([(r.info['position'], r.r_ext, r.done) for r in walk(self.env, actions)])
        self.assertEqual(runs[0], runs[1])


class GridSpecTestCase(SimpleTestCase):

    def test_start_on_wall_rejected(self):
        with self.assertRaises(ContractViolation):
            GridSpec('bad', 3, 3, start=(1, 1), walls=frozenset({(1, 1)}))

    def test_empty_grid_rejected(self):
        with self.assertRaises(ContractViolation):
            GridSpec('bad', 0, 3, start=(0, 0))

    def test_render_tiny_grid(self):
        env = GridWorld(GridSpec('tiny', 2, 2, start=(0, 0)))
        obs = env.reset()
        self.assertEqual(int(np.sum(obs == AGENT)), 1, "Testing: exactly one agent pixel.")
        self.assertTrue(np.array_equal(obs, env.render_observation()))

    def test_load_from_toml(self):
        text = (
            '[grid]\n'
            'name = "corridor"\n'
            'max_episode_steps = 20\n'
            'layout = """\n'
            '#####\n'
            '#S G#\n'
            '#####\n'
            '"""\n'
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'grid.toml'
            path.write_text(text)
            spec = load_grid_spec(path)
        self.assertEqual((spec.height, spec.width), (3, 5))
        self.assertEqual(spec.start, (1, 1))
        self.assertEqual(spec.goal, (1, 3))
        self.assertEqual(shortest_path_length(spec), 2)

    def test_unknown_key_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'grid.toml'
            path.write_text('[grid]\nheight = 3\nwidth = 3\nstart = [0, 0]\nslipery = 0.1\n')
            with self.assertRaises(serializers.ValidationError):
                load_grid_spec(path)


class VisitDensityTestCase(SimpleTestCase):

    def test_single_visit(self):
        density = accumulate_density(VisitDensity.empty(3, 3), (0, 0))
        self.assertEqual(density.counts[0, 0], 1)
        self.assertEqual(density.total_steps, 1)

    def test_repeated_visits(self):
        density = VisitDensity.empty(2, 2)
        for _ in range(17):
            accumulate_density(density, (1, 0))
        self.assertEqual(density.counts[1, 0], 17)

    def test_random_walk_recount(self):
        env = GridWorld(dark_chamber(size=10, max_episode_steps=10_000))
        env.reset()
        density = VisitDensity.empty(10, 10)
        log, coverage = [], []
        for action in np.random.default_rng(5).integers(0, 4, size=1000):
            accumulate_density(density, env.step(action).info['position'])
            log.append(env.position)
            coverage.append(density.coverage())
        self.assertEqual(int(density.counts.sum()), 1000)
        self.assertEqual(density.total_steps, 1000)
        self.assertEqual(density.coverage(), len(set(log)))
        self.assertTrue(all(b >= a for a, b in zip(coverage, coverage[1:])), "Testing: coverage never shrinks.")

    def test_out_of_bounds_rejected(self):
        with self.assertRaises(ContractViolation):
            accumulate_density(VisitDensity.empty(2, 2), (2, 0))

    def test_csv_round_trip(self):
        density = VisitDensity.empty(3, 4)
        accumulate_density(density, (2, 3))
        with tempfile.TemporaryDirectory() as tmp:
            loaded = VisitDensity.from_csv(density.to_csv(Path(tmp) / 'density.csv'))
        self.assertTrue(np.array_equal(loaded.counts, density.counts))
        self.assertEqual(loaded.total_steps, 1)


class TwoActionMDPTestCase(SimpleTestCase):

    def test_one_step_episodes(self):
        mdp = TwoActionMDP(r_ext=(1.0, 0.0), r_int=(0.0, 1.0))
        mdp.reset()
        result = mdp.step(1)
        self.assertTrue(result.done)
        self.assertEqual(result.r_ext, 0.0)
        self.assertEqual(result.info['r_int'], 1.0)
        self.assertTrue(np.array_equal(mdp.q_ext(), [1.0, 0.0]))

    def test_negative_reward_rejected(self):
        with self.assertRaises(ContractViolation):
            TwoActionMDP(r_ext=(-1.0, 0.0))
