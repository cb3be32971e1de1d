import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinoaura.aura import (
    AuraConfig, OptimizedControlTable, PlanSetExhausted, optimize_batch, recalculate_costs, run_aura,
    sample_nearby, select_execution_control,
)
from kinoaura.bench.scenario import load_scenario
from kinoaura.core import CostFunction, Trajectory, trajectory_cost
from kinoaura.dynamics import DoubleIntegrator6D, KinematicCar
from kinoaura.execution import ConstantBias, GaussianNoise, GroundTruthExecutor, ZeroNoise
from kinoaura.planner import Budget, PlanCandidate, PlannerConfig, PlanSet, plan

PL = CostFunction.PATH_LENGTH


def residual(model, X_B, X_c, controls, durs):
    b, c = controls.shape[:2]
    out = np.empty((b, c))
    for i in range(b):
        for j in range(c):
            r = model.state_space.difference(model.propagate(X_B[i], controls[i, j], durs[j]), X_c[j])
            out[i, j] = float(r @ r)
    return out


class TestConfig:
    def test_invariants(self):
        for kw in ({"dt": 0.0}, {"batch": 0}, {"iterations": -1}, {"alpha": 0.0}, {"t_init": -1.0},
                   {"sigma": -0.1}, {"sample_center": "elsewhere"}):
            with pytest.raises(ValueError):
                AuraConfig(**kw)

    def test_defaults_recorded(self):
        d = AuraConfig().as_dict()
        assert (d["alpha"], d["iterations"], d["batch"]) == (0.1, 100, 32)
        assert d["planner"]["variant"] == "sst" and d["cost"] == "path_length"

    def test_budget_modes(self):
        assert AuraConfig(deterministic=True).budget(0.45) == Budget(iterations=450)
        assert AuraConfig(deterministic=False).budget(0.45) == Budget(seconds=0.45)
        assert AuraConfig().budget(-1.0) == Budget(iterations=0)


class TestSampleNearby:
    def test_zero_sigma(self, rng):
        sp = KinematicCar().state_space
        x = np.array([1.0, 2.0, 0.5])
        out = sample_nearby(sp, x, 0.0, 5, rng)
        assert out.shape == (5, 3) and np.all(out == x)

    def test_single(self, rng):
        sp = KinematicCar().state_space
        out = sample_nearby(sp, [1.0, 2.0, 0.5], 0.3, 1, rng)
        np.testing.assert_array_equal(out, [[1.0, 2.0, 0.5]])

    def test_inside_bounds_and_first_entry(self, rng):
        sp = DoubleIntegrator6D().state_space
        x = np.array([9.99, 0, 0, 0.99, 0, 0])
        out = sample_nearby(sp, x, 0.5, 50, rng)
        np.testing.assert_array_equal(out[0], x)
        assert all(sp.contains(r) for r in out)

    def test_errors(self, rng):
        sp = DoubleIntegrator6D().state_space
        with pytest.raises(ValueError):
            sample_nearby(sp, np.zeros(6), 0.1, 0, rng)
        with pytest.raises(ValueError):
            sample_nearby(sp, np.zeros(6), -0.1, 3, rng)


class TestOptimizeBatch:
    def test_already_optimal(self):
        car = KinematicCar()
        x = np.array([1.0, 1.0, 0.2])
        U_c = np.array([[0.8, 0.3], [0.5, -0.4]])
        X_c = np.stack([car.propagate(x, u, 0.5) for u in U_c])
        tab = optimize_batch(car, x[None], X_c, U_c, 0.1, 50, 0.5)
        assert np.all(tab.initial_losses == 0.0)
        np.testing.assert_array_equal(tab.controls[0], U_c)

    def test_empty_children(self):
        tab = optimize_batch(KinematicCar(), np.zeros((4, 3)), np.zeros((0, 3)), np.zeros((0, 2)))
        assert tab.is_empty and tab.shape == (0, 0)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            optimize_batch(KinematicCar(), np.zeros((1, 3)), np.zeros((2, 3)), np.zeros((1, 2)))

    @pytest.mark.parametrize("model", [KinematicCar(), DoubleIntegrator6D()])
    def test_table_invariants(self, model, rng):
        sp, cs = model.state_space, model.control_space
        x = sp.sample(rng) * 0.3
        U_c = np.stack([cs.sample(rng) for _ in range(3)])
        durs = np.array([0.5, 1.0, 0.5])
        X_c = np.stack([model.propagate(x, u, d) for u, d in zip(U_c, durs)])
        X_B = sample_nearby(sp, x, 0.05, 8, rng)
        tab = optimize_batch(model, X_B, X_c, U_c, 0.1, 60, durs, record_history=True)
        assert tab.shape == (8, 3)
        assert all(cs.contains(u) for u in tab.controls.reshape(-1, cs.dims))
        np.testing.assert_allclose(tab.losses, residual(model, X_B, X_c, tab.controls, durs), rtol=0, atol=1e-9)
        assert np.all(np.diff(tab.history, axis=0) <= 0.0)
        assert np.all(tab.losses <= tab.initial_losses)

    def test_di_least_squares_oracle(self, rng):
        di = DoubleIntegrator6D()
        dt = 0.5
        J = di.jacobian_u(np.zeros(6), np.zeros(3), dt)
        for _ in range(10):
            x0 = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-0.5, 0.5, 3)])
            u0 = rng.uniform(-1, 1, 3)
            target = di.propagate(x0, u0, dt)
            x = x0 + np.concatenate([rng.uniform(-0.05, 0.05, 3), rng.uniform(-0.05, 0.05, 3)])
            r0 = di.propagate(x, np.zeros(3), dt) - target
            u_ls = np.linalg.lstsq(J, -r0, rcond=None)[0]
            tab = optimize_batch(di, x[None], target[None], u0[None], 0.1, 2000, dt)
            np.testing.assert_allclose(tab.controls[0, 0], u_ls, atol=1e-4)

    def test_di_recovery_in_reachable_subspace(self, rng):
        # a perturbation with d_p = -dt/2 * d_v is exactly recoverable in one step
        di = DoubleIntegrator6D()
        dt = 0.5
        for _ in range(20):
            x0 = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-0.4, 0.4, 3)])
            u0 = rng.uniform(-1, 1, 3)
            target = di.propagate(x0, u0, dt)
            dv = rng.uniform(-0.05, 0.05, 3)
            x = x0 + np.concatenate([-0.5 * dt * dv, dv])
            tab = optimize_batch(di, x[None], target[None], u0[None], 0.1, 1000, dt)
            assert math.sqrt(tab.losses[0, 0]) <= 1e-6


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["car", "di"]))
def test_loss_non_increasing_property(seed, which):
    rng = np.random.default_rng(seed)
    model = KinematicCar() if which == "car" else DoubleIntegrator6D()
    sp, cs = model.state_space, model.control_space
    x = sp.sample(rng) * 0.3
    U_c = np.stack([cs.sample(rng) for _ in range(2)])
    X_c = np.stack([model.propagate(x, u, 0.5) for u in U_c])
    X_B = sample_nearby(sp, x, 0.1, 4, rng)
    tab = optimize_batch(model, X_B, X_c, U_c, 0.1, 20, 0.5, record_history=True)
    assert np.all(np.diff(tab.history, axis=0) <= 0.0)


class TestSelect:
    def _table(self, rng):
        car = KinematicCar()
        x = np.array([2.0, 2.0, 0.3])
        U_c = np.array([[0.9, 0.2], [0.6, -0.5]])
        X_c = np.stack([car.propagate(x, u, 0.5) for u in U_c])
        X_B = sample_nearby(car.state_space, x, 0.05, 12, rng)
        return car, optimize_batch(car, X_B, X_c, U_c, 0.1, 30, 0.5, child_ids=(11, 22)), U_c

    def test_exact_next_state_gives_nominal(self, rng):
        car, tab, U_c = self._table(rng)
        ch = select_execution_control(car.state_space, tab.samples[0], tab, 22)
        assert ch.sample_index == 0 and ch.column == 1
        np.testing.assert_array_equal(ch.control, U_c[1])

    def test_exact_sample_hit(self, rng):
        car, tab, _ = self._table(rng)
        for k in range(tab.shape[0]):
            ch = select_execution_control(car.state_space, tab.samples[k], tab, 11)
            assert ch.sample_index == k and ch.source == "table"
            np.testing.assert_array_equal(ch.control, tab.controls[k, 0])

    def test_target_by_state(self, rng):
        car, tab, _ = self._table(rng)
        ch = select_execution_control(car.state_space, tab.samples[3], tab, tab.children[1])
        assert ch.column == 1

    def test_random_vs_linear_scan(self, rng):
        car, tab, _ = self._table(rng)
        sp = car.state_space
        for _ in range(100):
            x = tab.samples[0] + rng.normal(0, 0.08, 3)
            ch = select_execution_control(sp, x, tab, 11)
            d = [sp.distance(x, s) for s in tab.samples]
            assert ch.sample_index == int(np.argmin(d))

    def test_fallback(self, rng):
        car, tab, _ = self._table(rng)
        empty = OptimizedControlTable.empty(3, 2)
        ch = select_execution_control(car.state_space, np.zeros(3), empty, None, [0.1, 0.2])
        assert ch.source == "nominal" and ch.sample_index == -1
        ch = select_execution_control(car.state_space, np.zeros(3), tab, 99, [0.1, 0.2])
        assert ch.source == "nominal"
        with pytest.raises(ValueError):
            select_execution_control(car.state_space, np.zeros(3), empty, None)


def _cand(first, cost, leaf):
    states = np.array([first, np.asarray(first) + [1.0, 0, 0]])
    return PlanCandidate(Trajectory(states, [[1.0, 0.0]], [1.0]), cost, leaf, cost)


class TestRecalculate:
    sp = KinematicCar().state_space

    def test_zero_deviation_keeps_order(self):
        x = np.array([1.0, 1.0, 0.0])
        ps = PlanSet([_cand(x, c, i) for i, c in enumerate([3.0, 1.0, 2.0])])
        out = recalculate_costs(x, ps, PL, self.sp)
        assert [c.leaf for c in out] == [c.leaf for c in ps]

    def test_nearer_first_wins_tie(self):
        x = np.array([1.0, 1.0, 0.0])
        a, b = _cand([1.1, 1.0, 0.0], 2.0, 7), _cand([1.5, 1.0, 0.0], 2.0, 3)
        out = recalculate_costs(x, PlanSet([a, b]), PL, self.sp)
        assert out.best().leaf == 7

    def test_random_oracle(self, rng):
        x = np.array([5.0, 5.0, 0.0])
        cands = [_cand(x + rng.normal(0, 0.5, 3), float(rng.uniform(1, 5)), i) for i in range(30)]
        out = recalculate_costs(x, PlanSet(cands), PL, self.sp)
        oracle = sorted(cands, key=lambda c: (self.sp.distance(x, c.first_state) + c.nominal_cost, c.leaf))
        assert [c.leaf for c in out] == [c.leaf for c in oracle]
        for c in out:
            assert c.cost == pytest.approx(self.sp.distance(x, c.first_state) + c.nominal_cost)

    def test_empty(self):
        with pytest.raises(PlanSetExhausted):
            recalculate_costs(np.zeros(3), PlanSet(), PL, self.sp)

    def test_collision_drops_candidate(self):
        scen = load_scenario("narrow_passage_car")
        car = scen.build_model()
        x = np.array([4.2, 2.0, 0.0])
        hit = _cand([4.2, 2.0, 0.0], 1.0, 1)
        ok = PlanCandidate(Trajectory([[4.2, 2.0, 0.0], [4.2, 2.0, 0.0]], [[0.0, 0.0]], [1.0]), 5.0, 2, 5.0)
        out = recalculate_costs(x, PlanSet([hit, ok]), PL, car.state_space, scen.environment, car)
        assert [c.leaf for c in out] == [2]


def _open_field_car():
    scen = load_scenario("open_field_car")
    return scen, scen.build_model()


def _cfg(seed, **kw):
    base = dict(t_init=2.0, dt=0.5, sigma=(0.02, 0.02, 0.04), seed=seed)
    base.update(kw)
    return AuraConfig(**base)


class TestRunAura:
    def test_ablation_equals_nominal(self):
        scen, car = _open_field_car()
        rep = run_aura(_cfg(0, replan_enabled=False, optimize_enabled=False), car, scen.environment, scen.start,
                       GroundTruthExecutor(car, ZeroNoise(), 0))
        assert rep.success
        np.testing.assert_allclose(rep.executed_states, rep.nominal_plan.states, rtol=0, atol=1e-9)
        assert rep.cost == pytest.approx(rep.offline_cost, abs=1e-9)
        assert rep.tracking_error == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_zero_noise_replanning(self, seed):
        scen, car = _open_field_car()
        rep = run_aura(_cfg(seed), car, scen.environment, scen.start, GroundTruthExecutor(car, ZeroNoise(), seed))
        assert rep.success
        assert rep.cost <= rep.offline_cost + 1e-9
        best = [r.best_cost for r in rep.records[:-1]]
        assert all(b2 <= b1 + 1e-9 for b1, b2 in zip(best, best[1:]))
        assert {r.source for r in rep.records} <= {"nominal", "table", "restart"}
        # deterministic mode bounds each worker, so the cycle fits in dt plus slack
        for r in rep.records:
            assert r.t_execute + max(r.t_replan, r.t_optimize) + r.t_sync <= r.duration + 0.05

    def test_totals_equal_records(self):
        scen, car = _open_field_car()
        rep = run_aura(_cfg(4), car, scen.environment, scen.start, GroundTruthExecutor(car, scen.noise, 4))
        errs = [r.step_error for r in rep.records]
        assert rep.tracking_error == pytest.approx(sum(errs)) and min(errs) >= 0.0
        assert rep.mean_step_error == pytest.approx(np.mean(errs))
        assert rep.cost == pytest.approx(trajectory_cost(rep.executed_trajectory(2), PL, car.state_space))
        assert rep.task_time == pytest.approx(rep.offline_time + sum(r.duration for r in rep.records))

    def test_deterministic_repeat(self):
        scen, car = _open_field_car()
        reps = [run_aura(_cfg(3, max_cycles=8), car, scen.environment, scen.start, GroundTruthExecutor(car, scen.noise, 3))
                for _ in range(2)]
        np.testing.assert_array_equal(reps[0].executed_states, reps[1].executed_states)
        assert reps[0].cost == reps[1].cost

    def test_real_time_mode_runs(self):
        scen, car = _open_field_car()
        rep = run_aura(_cfg(0, t_init=0.5, deterministic=False, max_cycles=4), car, scen.environment, scen.start,
                       GroundTruthExecutor(car, scen.noise, 0))
        assert len(rep.records) == 4 and rep.wall_time > 0.0
        assert rep.task_time == rep.wall_time

    def test_start_in_goal(self):
        scen, car = _open_field_car()
        rep = run_aura(_cfg(0), car, scen.environment, scen.goal.center, GroundTruthExecutor(car))
        assert rep.success and rep.reason == "start in goal" and not rep.records

    def test_optimization_lowers_tracking_error(self):
        # reference tracking isolates the optimizer from replanning; executors are paired per seed
        scen, car = _open_field_car()
        pcfg = PlannerConfig(propagation_step=0.5)
        plans, _ = plan(pcfg, car, scen.environment, PL, scen.start, Budget(iterations=3000),
                        rng=np.random.default_rng(0))
        ref = plans.best().trajectory
        on, off = [], []
        for seed in range(20):
            for flag, acc in ((True, on), (False, off)):
                rep = run_aura(_cfg(seed, optimize_enabled=flag, max_restarts=0), car, scen.environment, scen.start,
                               GroundTruthExecutor(car, scen.noise, seed), reference=ref)
                acc.append(rep.mean_step_error)
        assert np.mean(on) < np.mean(off)

    def test_constant_bias_accumulates_for_di(self):
        di = DoubleIntegrator6D(position_lower=(0, 0, -1), position_upper=(10, 6, 1))
        scen = load_scenario("corridor_di")
        d = np.array([0.01, 0.0, 0.0, 0.0, 0.0, 0.0])
        ref_states = [np.array(scen.start)]
        u = np.array([0.5, 0.0, 0.0])
        for _ in range(4):
            ref_states.append(di.propagate(ref_states[-1], u, 0.5))
        ref = Trajectory(np.stack(ref_states), np.tile(u, (4, 1)), np.full(4, 0.5))
        from kinoaura.baselines import run_open_loop
        rep = run_open_loop(ref, GroundTruthExecutor(di, ConstantBias(tuple(d))), scen.environment)
        errs = [r.step_error for r in rep.records]
        for k, e in enumerate(errs, 1):
            assert e >= k * np.linalg.norm(d) - 1e-12


def test_gaussian_executor_bounded(rng):
    car = KinematicCar()
    noise = GaussianNoise((0.05, 0.05, 0.1), 0.08)
    ex = GroundTruthExecutor(car, noise, 5)
    x = np.array([1.0, 1.0, 0.0])
    for _ in range(200):
        w = noise.sample(rng, car.state_space)
        assert car.state_space.norm(w) <= 0.08
    a = ex.step(x, [1.0, 0.0], 0.5)
    b = ex.fork().step(x, [1.0, 0.0], 0.5)
    np.testing.assert_array_equal(a, b)
