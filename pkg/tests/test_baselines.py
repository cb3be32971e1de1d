import math
from dataclasses import replace

import numpy as np
import pytest

from kinoaura.aura import offline_plan
from kinoaura.baselines import MppiConfig, RrConfig, mppi_update, run_mppi, run_open_loop, run_restart_replanning
from kinoaura.bench.scenario import load_scenario
from kinoaura.core import CostFunction
from kinoaura.dynamics import KinematicCar
from kinoaura.execution import GaussianNoise, GroundTruthExecutor, ZeroNoise
from kinoaura.planner import Budget, PlannerConfig
from kinoaura.world import Environment, GoalRegion

PL = CostFunction.PATH_LENGTH


def _plan(scen, seed=0, iters=2000):
    model = scen.build_model()
    pcfg = PlannerConfig(propagation_step=0.5, seed=seed)
    plans, _, _ = offline_plan(pcfg, model, scen.environment, scen.start, PL, 2.0,
                               lambda s: Budget(iterations=int(s * iters / 2.0)), np.random.default_rng([seed, 1]))
    return model, next(c for c in plans if c.trajectory.num_steps).trajectory


class TestOpenLoop:
    def test_zero_noise(self):
        scen = load_scenario("open_field_car")
        model, traj = _plan(scen)
        rep = run_open_loop(traj, GroundTruthExecutor(model, ZeroNoise()), scen.environment)
        assert rep.success and rep.tracking_error == 0.0
        np.testing.assert_array_equal(rep.executed_states, traj.states)

    def test_gaussian_error_positive(self):
        scen = load_scenario("open_field_car")
        model, traj = _plan(scen)
        errs = [run_open_loop(traj, GroundTruthExecutor(model, scen.noise, s), scen.environment).mean_step_error
                for s in range(20)]
        assert np.mean(errs) > 0.0 and min(errs) > 0.0


class TestRestartReplanning:
    scen = load_scenario("open_field_car")

    def _rr(self, noise, threshold, seed=0):
        model = self.scen.build_model()
        return run_restart_replanning(PlannerConfig(), model, self.scen.environment, self.scen.start,
                                      GroundTruthExecutor(model, noise, seed), RrConfig(threshold=threshold, budget=0.5),
                                      PL, t_init=2.0, dt=0.5, seed=seed)

    def test_zero_noise_matches_open_loop(self):
        rr = self._rr(ZeroNoise(), 0.25)
        model = self.scen.build_model()
        ol = run_open_loop(rr.nominal_plan, GroundTruthExecutor(model, ZeroNoise()), self.scen.environment)
        assert rr.triggers == 0
        np.testing.assert_array_equal(rr.executed_states, ol.executed_states)

    def test_tiny_threshold_triggers_every_step(self):
        rr = self._rr(self.scen.noise, 1e-12)
        assert rr.triggers == len(rr.records)
        assert rr.triggers > 0

    def test_trigger_count_log_replay(self):
        scen = load_scenario("corridor_di")
        model = scen.build_model()
        noise = GaussianNoise((0.02, 0.02, 0.0, 0.03, 0.03, 0.0), 0.1)
        for seed in range(3):
            cfg = RrConfig(threshold=0.03, budget=0.5)
            rep = run_restart_replanning(PlannerConfig(), model, scen.environment, scen.start,
                                         GroundTruthExecutor(model, noise, seed), cfg, PL, t_init=3.0, dt=0.5,
                                         seed=seed)
            recount = sum(r.step_error > cfg.threshold for r in rep.records)
            assert rep.triggers == recount

    def test_infinite_threshold_is_open_loop(self):
        rr = self._rr(self.scen.noise, math.inf, seed=2)
        model = self.scen.build_model()
        ol = run_open_loop(rr.nominal_plan, GroundTruthExecutor(model, self.scen.noise, 2), self.scen.environment)
        assert np.array_equal(rr.executed_states, ol.executed_states)
        assert rr.success == ol.success and rr.cost == ol.cost

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RrConfig(threshold=0.0)
        with pytest.raises(ValueError):
            RrConfig(budget=-1.0)


def _free_world():
    car = KinematicCar(position_lower=(0, 0), position_upper=(10, 10))
    goal = GoalRegion((6.0, 5.0, 0.0), 0.5)
    return car, Environment((0, 0), (10, 10), goal=goal), goal


class TestMppi:
    def test_reaches_goal_straight_ahead(self):
        car, env, goal = _free_world()
        cfg = MppiConfig(rollouts=128, max_steps=150)
        for seed in range(10):
            rep = run_mppi(replace(cfg, seed=seed), car, env, [2.0, 5.0, 0.0], goal, GroundTruthExecutor(car))
            assert rep.success, rep.reason
            sums = rep.extras["weight_sums"]
            assert all(abs(s - 1.0) <= 1e-12 for s in sums)

    def test_single_rollout_zero_noise_is_fixed(self, rng):
        car, env, goal = _free_world()
        cfg = MppiConfig(rollouts=1, noise_std=0.0)
        U = rng.uniform(-0.5, 0.5, (cfg.horizon, 2))
        U2, w, S = mppi_update(car, env, goal, np.array([2.0, 5.0, 0.0]), U, cfg, PL, rng)
        np.testing.assert_array_equal(U2, U)
        assert w.shape == (1,) and w[0] == 1.0

    def test_weights_normalized(self, rng):
        car, env, goal = _free_world()
        cfg = MppiConfig()
        _, w, S = mppi_update(car, env, goal, np.array([2.0, 5.0, 0.0]), np.zeros((cfg.horizon, 2)), cfg, PL, rng)
        assert abs(w.sum() - 1.0) <= 1e-12 and np.all(w >= 0.0)
        # lowest rollout cost carries the largest weight
        assert np.argmax(w) == np.argmin(S)

    def test_config_validation(self):
        for kw in ({"horizon": 0}, {"rollouts": 0}, {"temperature": 0.0}, {"dt": 0.0}, {"iterations": 0}):
            with pytest.raises(ValueError):
                MppiConfig(**kw)

    def test_shared_interfaces(self):
        scen = load_scenario("u_trap_car")
        car = scen.build_model()
        rep = run_mppi(MppiConfig(max_steps=5, rollouts=32), car, scen.environment, scen.start, scen.goal,
                       GroundTruthExecutor(car, scen.noise, 0))
        assert rep.method == "mppi" and len(rep.records) <= 5
        assert rep.tracking_error == pytest.approx(sum(r.step_error for r in rep.records))
