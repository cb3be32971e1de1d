"""Comparison executors: open-loop, restart replanning and MPPI.

All of them consume the same executor and environment interfaces as the
AURA runtime and return the same ``ExecutionReport``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from kinoaura.aura import CycleRecord, ExecutionReport, offline_plan
from kinoaura.core import CostFunction, Trajectory
from kinoaura.planner import Budget, PlannerConfig
from kinoaura.world import Environment, GoalRegion, goal_satisfied, is_motion_valid, is_state_valid


def _step(executor, env, x, u, dt):
    x_new = executor.step(x, u, dt)
    model = executor.model
    collided = not (is_motion_valid(env, model, x, u, dt) and is_state_valid(env, model.state_space, x_new))
    return x_new, collided


def run_open_loop(plan: Trajectory, executor, env: Environment, cost: CostFunction = CostFunction.PATH_LENGTH,
                  offline_time: float = 0.0) -> ExecutionReport:
    """Apply the plan's controls verbatim; stop on collision or at the plan's end."""
    model = executor.model
    space = model.state_space
    report = ExecutionReport("open_loop", plan.states[0].copy(), nominal_plan=plan, offline_time=offline_time)
    wall0 = time.perf_counter()
    x = plan.states[0].copy()
    virtual = offline_time
    reason = "plan completed"
    for i in range(plan.num_steps):
        u, d = plan.controls[i], float(plan.durations[i])
        x_new, collided = _step(executor, env, x, u, d)
        virtual += d
        nominal = plan.states[i + 1]
        report.records.append(CycleRecord(i, nominal.copy(), x_new.copy(), u.copy(), d, "nominal", -1,
                                          space.distance(nominal, x_new), collided=collided))
        x = x_new
        if collided:
            reason = "collision"
            break
    report.success = reason != "collision" and goal_satisfied(env.goal, space, x)
    report.reason = reason if reason == "collision" or report.success else "plan ended outside goal"
    report.task_time = virtual
    report.wall_time = time.perf_counter() - wall0
    return report.finalize(space, cost, model.control_space.dims)


@dataclass(frozen=True)
class RrConfig:
    threshold: float = 0.25
    #: planning time per trigger, seconds (virtual in deterministic mode)
    budget: float = 1.0
    max_retries: int = 3
    max_replans: int = 200
    max_cycles: int = 400

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ValueError("restart threshold must be positive")
        if not self.budget >= 0.0:
            raise ValueError("replan budget must be non-negative")


def run_restart_replanning(planner_config: PlannerConfig, model, env: Environment, start, executor, rr: RrConfig,
                           cost: CostFunction = CostFunction.PATH_LENGTH, t_init: float = 5.0, dt: float = 0.5,
                           deterministic: bool = True, iterations_per_second: float = 1000.0, seed: int = 0,
                           offline_rounds: int = 5) -> ExecutionReport:
    """Follow the nominal plan; plan from scratch whenever the step error exceeds the threshold.

    The offline phase matches the AURA runtime's for the same seed, so both
    start from the same plan. Ending a plan outside the goal also replans
    unless the threshold is infinite (then the run equals open-loop).
    """
    space = model.state_space
    pcfg = replace(planner_config, propagation_step=dt, seed=seed)

    def budget_of(seconds):
        if deterministic:
            return Budget(iterations=int(math.floor(seconds * iterations_per_second + 1e-9)))
        return Budget(seconds=seconds)

    start = space.normalize(np.asarray(start, dtype=float))
    report = ExecutionReport("rr", start)
    report.config = {"threshold": rr.threshold, "budget": rr.budget, "t_init": t_init, "dt": dt,
                     "deterministic": deterministic, "iterations_per_second": iterations_per_second}
    wall0 = time.perf_counter()
    plans, _, spent = offline_plan(pcfg, model, env, start, cost, t_init, budget_of,
                                   np.random.default_rng([seed, 1]), offline_rounds, deterministic)
    report.offline_time = spent
    virtual = spent
    best = next((c for c in plans if c.trajectory.num_steps), None)

    def done(reason, success):
        report.reason, report.success = reason, success
        report.wall_time = time.perf_counter() - wall0
        report.task_time = virtual if deterministic else report.wall_time
        return report.finalize(space, cost, model.control_space.dims)

    if best is None:
        return done("start in goal" if goal_satisfied(env.goal, space, start) else "no initial plan",
                    goal_satisfied(env.goal, space, start))
    report.offline_cost = best.nominal_cost
    report.nominal_plan = best.trajectory
    traj = best.trajectory
    i = 0
    x = start.copy()
    goal_misses = 0

    def replan_from(x0):
        nonlocal virtual
        for attempt in range(rr.max_retries):
            rng = np.random.default_rng([seed, 2, report.triggers + goal_misses, attempt])
            t0 = time.perf_counter()
            ps, _, _ = offline_plan(pcfg, model, env, x0, cost, rr.budget, budget_of, rng, 1, deterministic)
            virtual += rr.budget if deterministic else time.perf_counter() - t0
            cand = next((c for c in ps if c.trajectory.num_steps), None)
            if cand is not None:
                return cand.trajectory
        return None

    for cycle in range(rr.max_cycles):
        if i == traj.num_steps:
            if goal_satisfied(env.goal, space, x):
                return done("plan completed", True)
            if not math.isfinite(rr.threshold) or goal_misses + report.triggers >= rr.max_replans:
                return done("plan ended outside goal", False)
            goal_misses += 1
            new = replan_from(x)
            if new is None:
                return done("replanning failed", False)
            traj, i = new, 0
        u, d = traj.controls[i], float(traj.durations[i])
        x_new, collided = _step(executor, env, x, u, d)
        virtual += d
        nominal = traj.states[i + 1]
        err = space.distance(nominal, x_new)
        report.records.append(CycleRecord(cycle, nominal.copy(), x_new.copy(), u.copy(), d, "nominal", -1, err,
                                          collided=collided))
        x = x_new
        i += 1
        if collided:
            return done("collision", False)
        if err > rr.threshold:
            if report.triggers + goal_misses >= rr.max_replans:
                return done("replan cap", False)
            report.triggers += 1
            if goal_satisfied(env.goal, space, x) and i == traj.num_steps:
                return done("plan completed", True)
            new = replan_from(x)
            if new is None:
                return done("replanning failed", False)
            traj, i = new, 0
    return done("cycle cap", False)


@dataclass(frozen=True)
class MppiConfig:
    horizon: int = 20
    rollouts: int = 256
    temperature: float = 1.0
    noise_std: tuple | float = 0.5
    dt: float = 0.2
    iterations: int = 1
    goal_weight: float = 10.0
    collision_penalty: float = 1e4
    max_steps: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1 or self.rollouts < 1:
            raise ValueError("MPPI needs horizon >= 1 and rollouts >= 1")
        if not self.temperature > 0.0:
            raise ValueError("MPPI temperature must be positive")
        if not self.dt > 0.0:
            raise ValueError("MPPI control step must be positive")
        if self.iterations < 1:
            raise ValueError("MPPI needs at least one update per cycle")


def mppi_update(model, env: Environment, goal: GoalRegion, x, U, cfg: MppiConfig, cost: CostFunction,
                rng: np.random.Generator):
    """One importance-weighted update of the mean sequence ``U`` (H, m).

    Returns ``(new U, weights, rollout costs)``.
    """
    space = model.state_space
    cspace = model.control_space
    H, K, m = cfg.horizon, cfg.rollouts, cspace.dims
    std = np.broadcast_to(np.asarray(cfg.noise_std, dtype=float), (m,))
    eps = rng.normal(0.0, 1.0, (K, H, m)) * std
    V = cspace.clamp(U[None] + eps)
    eps = V - U[None]
    S = np.zeros(K)
    X = np.repeat(np.asarray(x, dtype=float)[None], K, axis=0)
    for t in range(H):
        X_new = model.propagate_batch(X, V[:, t], cfg.dt)
        if cost is CostFunction.PATH_LENGTH:
            d = space.difference(X_new, X) * space.weights
            S += np.sqrt(np.einsum("ij,ij->i", d, d))
        elif cost is CostFunction.DURATION:
            S += cfg.dt
        else:
            S += np.einsum("ij,ij->i", V[:, t], V[:, t]) * cfg.dt
        free = env.points_free(env.position(X_new))
        S += cfg.collision_penalty * (~free)
        X = X_new
    S += cfg.goal_weight * space.distances(X, goal.center)
    w = np.exp(-(S - S.min()) / cfg.temperature)
    w /= w.sum()
    U_new = cspace.clamp(U + np.einsum("k,khm->hm", w, eps))
    return U_new, w, S


def run_mppi(mppi: MppiConfig, model, env: Environment, start, goal: GoalRegion, executor,
             cost: CostFunction = CostFunction.PATH_LENGTH) -> ExecutionReport:
    """Receding-horizon sampling control toward ``goal``; fails at the step cap."""
    space = model.state_space
    m = model.control_space.dims
    start = space.normalize(np.asarray(start, dtype=float))
    report = ExecutionReport("mppi", start)
    report.config = {k: getattr(mppi, k) for k in mppi.__dataclass_fields__}
    wall0 = time.perf_counter()
    U = np.zeros((mppi.horizon, m))
    x = start.copy()
    sums = []
    virtual = 0.0
    reason, success = "step cap", False
    if goal_satisfied(goal, space, x):
        reason, success = "start in goal", True
    else:
        for step in range(mppi.max_steps):
            for it in range(mppi.iterations):
                rng = np.random.default_rng([mppi.seed, 3, step, it])
                U, w, _ = mppi_update(model, env, goal, x, U, mppi, cost, rng)
                sums.append(float(w.sum()))
            u = U[0].copy()
            nominal = model.propagate(x, u, mppi.dt)
            x_new, collided = _step(executor, env, x, u, mppi.dt)
            virtual += mppi.dt
            report.records.append(CycleRecord(step, nominal, x_new.copy(), u, mppi.dt, "mppi", -1,
                                              space.distance(nominal, x_new), collided=collided))
            x = x_new
            U = np.concatenate([U[1:], U[-1:]])
            if collided:
                reason = "collision"
                break
            if goal_satisfied(goal, space, x):
                reason, success = "goal reached", True
                break
    report.reason, report.success = reason, success
    report.extras["weight_sums"] = sums
    report.wall_time = time.perf_counter() - wall0
    report.task_time = virtual
    return report.finalize(space, cost, m)
