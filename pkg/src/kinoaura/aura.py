"""AURA runtime: offline planning, then concurrent execution, replanning
from the retained tree and batched recovery-control optimization.

Each cycle runs three logical workers (execute, replan, optimize) joined by a
barrier. In deterministic mode the planner budget is an iteration count
derived from a virtual clock and the workers run one after another; in
real-time mode they run on threads under wall-clock budgets. Every worker
owns its random stream, so both modes produce the same trace under
iteration budgets.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from kinoaura.core import CostFunction, StateSpace, Trajectory, trajectory_cost
from kinoaura.planner import (
    Budget, PlanCandidate, PlannerConfig, PlanSet, PlanTree, grow, plan, prune_unreachable,
)
from kinoaura.world import Environment, goal_satisfied, is_motion_valid, is_state_valid


class PlanSetExhausted(RuntimeError):
    """No candidate plan survives recosting."""


# ---------------------------------------------------------------------------
# configuration and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuraConfig:
    t_init: float = 5.0
    dt: float = 0.5
    sigma: tuple | float = 0.05
    batch: int = 32
    alpha: float = 0.1
    iterations: int = 100
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    cost: CostFunction = CostFunction.PATH_LENGTH
    replan_enabled: bool = True
    optimize_enabled: bool = True
    deterministic: bool = True
    #: virtual-clock planner throughput used to turn seconds into iterations
    iterations_per_second: float = 1000.0
    orchestration_slack: float = 0.05
    offline_rounds: int = 5
    max_restarts: int = 3
    max_cycles: int = 400
    max_halvings: int = 20
    #: the optimizer targets at most this many children of x_next, those on
    #: the cheapest stored candidate paths (others cannot be chosen at sync)
    max_children: int = 8
    #: where recovery samples are drawn: around the nominal next state
    #: ("next") or around the noise-free prediction from the current true
    #: state ("predicted"); the nominal next state is always entry 0
    sample_center: str = "next"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cost", CostFunction(self.cost))
        if not self.dt > 0.0:
            raise ValueError("control duration dt must be positive")
        if self.batch < 1:
            raise ValueError("batch size b must be at least 1")
        if self.iterations < 0:
            raise ValueError("gradient iteration count N must be non-negative")
        if not self.alpha > 0.0:
            raise ValueError("step size alpha must be positive")
        if not self.t_init >= 0.0:
            raise ValueError("T_init must be non-negative")
        if np.any(np.asarray(self.sigma, dtype=float) < 0.0):
            raise ValueError("sampling scale sigma must be non-negative")
        if self.max_children < 1:
            raise ValueError("max_children must be at least 1")
        if not self.iterations_per_second > 0.0:
            raise ValueError("iterations_per_second must be positive")
        if self.sample_center not in ("next", "predicted"):
            raise ValueError("sample_center must be 'next' or 'predicted'")

    def budget(self, seconds: float) -> Budget:
        seconds = max(0.0, seconds)
        if self.deterministic:
            return Budget(iterations=int(math.floor(seconds * self.iterations_per_second + 1e-9)))
        return Budget(seconds=seconds)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("planner", "cost")}
        d["sigma"] = list(np.atleast_1d(np.asarray(self.sigma, dtype=float)))
        d["cost"] = self.cost.value
        d["planner"] = {k: getattr(self.planner, k) for k in self.planner.__dataclass_fields__}
        d["planner"]["variant"] = self.planner.variant.value
        return d


@dataclass
class CycleRecord:
    cycle: int
    nominal_state: np.ndarray
    executed_state: np.ndarray
    control: np.ndarray
    duration: float
    source: str
    sample_index: int
    step_error: float
    best_cost: float = math.nan
    candidate_costs: list = field(default_factory=list)
    replan_iterations: int = 0
    t_execute: float = 0.0
    t_replan: float = 0.0
    t_optimize: float = 0.0
    t_sync: float = 0.0
    collided: bool = False


@dataclass
class ExecutionReport:
    method: str
    start: np.ndarray
    records: list = field(default_factory=list)
    success: bool = False
    reason: str = ""
    offline_cost: float = math.nan
    offline_time: float = 0.0
    task_time: float = 0.0
    wall_time: float = 0.0
    cost: float = 0.0
    tracking_error: float = 0.0
    mean_step_error: float = 0.0
    restarts: int = 0
    triggers: int = 0
    nominal_plan: Trajectory | None = None
    final_plan: Trajectory | None = None
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def executed_states(self) -> np.ndarray:
        rows = [np.asarray(self.start, dtype=float)] + [r.executed_state for r in self.records]
        return np.stack(rows)

    @property
    def nominal_states(self) -> np.ndarray:
        rows = [np.asarray(self.start, dtype=float)] + [r.nominal_state for r in self.records]
        return np.stack(rows)

    def executed_trajectory(self, control_dims: int) -> Trajectory:
        if not self.records:
            return Trajectory.single(self.start, control_dims)
        return Trajectory(self.executed_states, np.stack([r.control for r in self.records]),
                          np.array([r.duration for r in self.records]))

    def finalize(self, space: StateSpace, cost: CostFunction, control_dims: int) -> "ExecutionReport":
        """Recompute totals from the per-cycle records."""
        traj = self.executed_trajectory(control_dims)
        self.cost = trajectory_cost(traj, cost, space)
        errs = np.array([r.step_error for r in self.records])
        self.tracking_error = float(errs.sum()) if errs.size else 0.0
        self.mean_step_error = float(errs.mean()) if errs.size else 0.0
        return self


# ---------------------------------------------------------------------------
# local optimization
# ---------------------------------------------------------------------------


def sample_nearby(space: StateSpace, x, sigma, b: int, rng: np.random.Generator) -> np.ndarray:
    """``b`` Gaussian perturbations of ``x``; entry 0 is ``x`` itself."""
    if b < 1:
        raise ValueError("need at least one sample")
    x = space.normalize(np.asarray(x, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (space.dims,))
    if np.any(sigma < 0.0):
        raise ValueError("sigma must be non-negative")
    out = np.empty((b, space.dims))
    out[0] = x
    if b > 1:
        out[1:] = space.clamp(x + rng.normal(0.0, 1.0, (b - 1, space.dims)) * sigma)
    return out


@dataclass(frozen=True, eq=False)
class OptimizedControlTable:
    """Recovery controls for every (sample, child) pair.

    ``controls[i, j]`` drives ``samples[i]`` toward ``children[j]`` over
    ``durations[j]``; ``losses[i, j]`` is the squared wrapped residual.
    """

    samples: np.ndarray
    children: np.ndarray
    nominal_controls: np.ndarray
    durations: np.ndarray
    controls: np.ndarray
    losses: np.ndarray
    initial_losses: np.ndarray
    child_ids: tuple = ()
    history: np.ndarray | None = None

    @classmethod
    def empty(cls, state_dims: int, control_dims: int) -> "OptimizedControlTable":
        return cls(np.zeros((0, state_dims)), np.zeros((0, state_dims)), np.zeros((0, control_dims)), np.zeros(0),
                   np.zeros((0, 0, control_dims)), np.zeros((0, 0)), np.zeros((0, 0)))

    @property
    def is_empty(self) -> bool:
        return self.samples.shape[0] == 0 or self.children.shape[0] == 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[0], self.children.shape[0]


def _residual_loss(space: StateSpace, nxt, target) -> np.ndarray:
    r = space.difference(nxt, target)
    return np.einsum("ij,ij->i", r, r)


def optimize_batch(model, X_B, X_children, U_children, alpha: float = 0.1, iterations: int = 100,
                   durations=0.5, max_halvings: int = 20, child_ids=(), record_history: bool = False
                   ) -> OptimizedControlTable:
    """Gradient descent on ``|Gamma(x_i, u_ij) - x_child_j|^2`` for all b x c pairs.

    Controls start at each child's nominal control. A step that would raise
    a pair's loss is halved up to ``max_halvings`` times and skipped if it
    still does, so every pair's loss is non-increasing. The accepted step
    size carries over to the pair's next iteration, doubled up to ``alpha``.
    """
    space = model.state_space
    cspace = model.control_space
    X_B = np.atleast_2d(np.asarray(X_B, dtype=float))
    X_children = np.asarray(X_children, dtype=float).reshape(-1, space.dims)
    U_children = np.asarray(U_children, dtype=float).reshape(-1, cspace.dims)
    b, c = X_B.shape[0], X_children.shape[0]
    if b == 0 or c == 0:
        return OptimizedControlTable.empty(space.dims, cspace.dims)
    if U_children.shape[0] != c:
        raise ValueError("one nominal control per child is required")
    durs = np.broadcast_to(np.asarray(durations, dtype=float), (c,)).copy()
    start = np.repeat(X_B, c, axis=0)
    target = np.tile(X_children, (b, 1))
    U = cspace.clamp(np.tile(U_children, (b, 1)))
    D = np.tile(durs, b)
    uniq = np.unique(D)
    label = np.searchsorted(uniq, D)
    single = uniq.size == 1

    def propagate(Uq, rows):
        if single:
            return model._propagate_batch(start[rows], Uq, float(uniq[0]))
        out = np.empty((rows.size, space.dims))
        lab = label[rows]
        for g, d in enumerate(uniq):
            sel = lab == g
            if sel.any():
                out[sel] = model._propagate_batch(start[rows[sel]], Uq[sel], float(d))
        return out

    def jac(rows):
        if single:
            return model._jacobian_batch(start[rows], U[rows], float(uniq[0]))
        nxt = np.empty((rows.size, space.dims))
        J = np.empty((rows.size, space.dims, cspace.dims))
        lab = label[rows]
        for g, d in enumerate(uniq):
            sel = lab == g
            if sel.any():
                nxt[sel], J[sel] = model._jacobian_batch(start[rows[sel]], U[rows[sel]], float(d))
        return nxt, J

    everything = np.arange(U.shape[0])
    loss = _residual_loss(space, propagate(U, everything), target)
    initial = loss.copy()
    history = [loss.copy()] if record_history else None
    # Each pair tries twice its last accepted step (capped at alpha) and halves
    # on failure. A pair that fails every halving keeps its control, gradient
    # and step, so it would fail the same way again: it is frozen.
    live = everything[loss > 0.0]
    steps = np.full(U.shape[0], alpha)
    for _ in range(iterations):
        if live.size == 0:
            if history is not None:
                history.append(loss.copy())
            continue
        nxt, J = jac(live)
        r = space.difference(nxt, target[live])
        grad = 2.0 * np.einsum("pnm,pn->pm", J, r)
        moving = np.any(grad != 0.0, axis=1)
        pending = live[moving]
        g_pend = grad[moving]
        trial = np.minimum(2.0 * steps[pending], alpha)
        for _h in range(max_halvings + 1):
            if pending.size == 0:
                break
            cand = cspace.clamp(U[pending] - trial[:, None] * g_pend)
            lc = _residual_loss(space, propagate(cand, pending), target[pending])
            ok = lc <= loss[pending]
            acc = pending[ok]
            U[acc] = cand[ok]
            loss[acc] = lc[ok]
            steps[acc] = trial[ok]
            pending = pending[~ok]
            g_pend = g_pend[~ok]
            trial = 0.5 * trial[~ok]
        stuck = np.zeros(U.shape[0], dtype=bool)
        stuck[pending] = True
        stuck[live[~moving]] = True
        live = live[~stuck[live] & (loss[live] > 0.0)]
        if history is not None:
            history.append(loss.copy())
    return OptimizedControlTable(
        samples=X_B.copy(), children=X_children.copy(), nominal_controls=U_children.copy(), durations=durs,
        controls=U.reshape(b, c, cspace.dims), losses=loss.reshape(b, c), initial_losses=initial.reshape(b, c),
        child_ids=tuple(child_ids), history=None if history is None else np.stack(history).reshape(-1, b, c),
    )


@dataclass(frozen=True, eq=False)
class ControlChoice:
    control: np.ndarray
    sample_index: int
    column: int
    source: str


def select_execution_control(space: StateSpace, x_gt, table: OptimizedControlTable, target=None,
                             nominal_control=None) -> ControlChoice:
    """Table control for the sample nearest ``x_gt`` and the column of ``target``.

    ``target`` is a child id from ``table.child_ids`` or a child state. When
    the table is empty or the target is not one of its columns the nominal
    control is returned.
    """
    col = -1
    if not table.is_empty:
        if target is None:
            col = 0
        elif np.ndim(target) == 0 and table.child_ids and target in table.child_ids:
            col = table.child_ids.index(target)
        elif np.ndim(target) == 1:
            hits = np.flatnonzero(np.all(table.children == np.asarray(target, dtype=float), axis=1))
            col = int(hits[0]) if hits.size else -1
    if col < 0:
        if nominal_control is None:
            raise ValueError("empty table and no nominal control to fall back on")
        return ControlChoice(np.asarray(nominal_control, dtype=float).copy(), -1, -1, "nominal")
    d = space.distances(table.samples, x_gt)
    i = int(np.argmin(d))
    return ControlChoice(table.controls[i, col].copy(), i, col, "table")


def recalculate_costs(x_gt, plans: PlanSet, cost: CostFunction, space: StateSpace,
                      env: Environment | None = None, model=None) -> PlanSet:
    """Deviation-plus-remaining-cost rescoring of every candidate.

    Effective cost is ``distance(x_gt, first_state) + nominal_cost``. With
    ``env`` and ``model`` given, candidates whose first segment collides
    when started from ``x_gt`` are dropped.
    """
    if len(plans) == 0:
        raise PlanSetExhausted("no candidate plans to recost")
    out = []
    for cand in plans:
        traj = cand.trajectory
        if env is not None and model is not None and traj.num_steps:
            if not is_motion_valid(env, model, x_gt, traj.controls[0], traj.durations[0]):
                continue
        eff = space.distance(x_gt, traj.states[0]) + cand.nominal_cost
        out.append(PlanCandidate(traj, eff, cand.leaf, cand.nominal_cost))
    return PlanSet(out)


# ---------------------------------------------------------------------------
# the runtime loop
# ---------------------------------------------------------------------------


@dataclass
class _Target:
    """What the next cycle executes toward."""

    plan: PlanCandidate
    node_path: list  # tree ids along plan.trajectory, or empty when not tree-backed
    control: np.ndarray
    source: str
    sample_index: int


def offline_plan(planner: PlannerConfig, model, env: Environment, start, cost: CostFunction, t_init: float,
                 budget_of, rng: np.random.Generator, rounds: int = 5, deterministic: bool = True):
    """Plan in ``t_init``-sized rounds until a plan with at least one step exists.

    Returns ``(plans, tree, seconds)`` where seconds is virtual time in
    deterministic mode and measured wall time otherwise.
    """
    tree = None
    plans = PlanSet()
    spent = 0.0
    t0 = time.perf_counter()
    for _ in range(max(1, rounds)):
        plans, tree = plan(planner, model, env, cost, start, budget_of(t_init), tree, rng)
        spent += t_init
        if any(c.trajectory.num_steps for c in plans) or goal_satisfied(env.goal, model.state_space, start):
            break
    wall = time.perf_counter() - t0
    return plans, tree, (spent if deterministic else wall)


def _offline(cfg: AuraConfig, pcfg: PlannerConfig, model, env, start, rng):
    return offline_plan(pcfg, model, env, start, cfg.cost, cfg.t_init, cfg.budget, rng, cfg.offline_rounds,
                        cfg.deterministic)


def _steppable(plans: PlanSet) -> PlanSet:
    return PlanSet([c for c in plans if c.trajectory.num_steps > 0])


def _children_on_candidates(tree: PlanTree, nid: int, limit: int) -> set:
    """Children of ``nid`` that lie on stored candidate paths, cheapest ``limit`` of them."""
    best: dict[int, float] = {}
    for c, leaf in tree.solutions:
        path = tree.path(leaf)
        try:
            k = path.index(nid)
        except ValueError:
            continue
        if k + 1 < len(path) and path[k + 1] not in best:
            best[path[k + 1]] = c
            if len(best) >= limit:
                break
    return set(best)


def run_aura(config: AuraConfig, model, env: Environment, start, executor, reference: Trajectory | None = None
             ) -> ExecutionReport:
    """Drive ``start`` into ``env.goal`` under the executor's disturbances.

    With ``reference`` given the offline planner is skipped and the runtime
    tracks that trajectory (replanning off, one synthetic child per step).
    """
    space = model.state_space
    cost = config.cost
    m = model.control_space.dims
    pcfg = replace(config.planner, propagation_step=config.dt, seed=config.seed)
    rng_plan = np.random.default_rng([config.seed, 1])
    rng_opt = np.random.default_rng([config.seed, 2])
    start = space.normalize(np.asarray(start, dtype=float))
    report = ExecutionReport("aura", start, config=config.as_dict())
    wall0 = time.perf_counter()

    replan = config.replan_enabled and reference is None
    tree: PlanTree | None = None
    if reference is None:
        plans, tree, spent = _offline(config, pcfg, model, env, start, rng_plan)
        report.offline_time = spent
    else:
        c0 = trajectory_cost(reference, cost, space)
        plans = PlanSet([PlanCandidate(reference, c0, -1, c0)])
    virtual = report.offline_time

    def done(reason, success):
        report.reason = reason
        report.success = success
        report.wall_time = time.perf_counter() - wall0
        report.task_time = virtual if config.deterministic else report.wall_time
        return report.finalize(space, cost, m)

    if goal_satisfied(env.goal, space, start):
        return done("start in goal", True)
    steppable = _steppable(plans)
    if not len(steppable):
        return done("no initial plan", False)
    best = steppable.best()
    report.offline_cost = best.nominal_cost
    report.nominal_plan = best.trajectory

    def path_of(cand):
        return tree.path(cand.leaf) if tree is not None and cand.leaf >= 0 else []

    target = _Target(best, path_of(best), best.trajectory.controls[0].copy(), "nominal", -1)
    x_gt = start.copy()
    pool = None if config.deterministic else ThreadPoolExecutor(max_workers=2)
    overhead = 0.0
    try:
        for cycle in range(config.max_cycles):
            tc0 = time.perf_counter()
            traj = target.plan.trajectory
            x_next = traj.states[1]
            dur = float(traj.durations[0])
            next_id = target.node_path[1] if len(target.node_path) > 1 else None

            # optimizer snapshot: children of x_next, or the following plan state
            children, child_ids = [], []
            if next_id is not None:
                ranked_ids = _children_on_candidates(tree, next_id, config.max_children)
                for cid, cs, cu, cd in tree.snapshot_children(next_id):
                    if cid in ranked_ids:
                        children.append((cs, cu, cd))
                        child_ids.append(cid)
            if not children and traj.num_steps > 1:
                children.append((traj.states[2].copy(), traj.controls[1].copy(), float(traj.durations[1])))
                child_ids.append(target.node_path[2] if len(target.node_path) > 2 else -1)

            x_prev, u_prev = x_gt.copy(), target.control.copy()

            def work_replan():
                t = time.perf_counter()
                if not replan or next_id is None:
                    return 0, 0.0
                prune_unreachable(tree, next_id)
                slack = config.orchestration_slack if config.deterministic else overhead
                n = grow(tree, pcfg, model, env, cost, config.budget(dur - slack), rng_plan)
                return n, time.perf_counter() - t

            def work_optimize():
                t = time.perf_counter()
                if not config.optimize_enabled or not children:
                    return OptimizedControlTable.empty(space.dims, m), 0.0
                if config.sample_center == "predicted" and config.batch > 1:
                    pred = model.propagate(x_prev, u_prev, dur)
                    X_B = np.vstack([x_next[None], sample_nearby(space, pred, config.sigma, config.batch - 1,
                                                                 rng_opt)])
                else:
                    X_B = sample_nearby(space, x_next, config.sigma, config.batch, rng_opt)
                tab = optimize_batch(model, X_B, np.stack([c[0] for c in children]),
                                     np.stack([c[1] for c in children]), config.alpha, config.iterations,
                                     np.array([c[2] for c in children]), config.max_halvings, child_ids)
                return tab, time.perf_counter() - t

            if pool is None:
                te = time.perf_counter()
                x_new = executor.step(x_gt, target.control, dur)
                t_exec = time.perf_counter() - te
                n_iter, t_rep = work_replan()
                table, t_opt = work_optimize()
            else:
                f_rep = pool.submit(work_replan)
                f_opt = pool.submit(work_optimize)
                te = time.perf_counter()
                x_new = executor.step(x_gt, target.control, dur)
                t_exec = time.perf_counter() - te
                n_iter, t_rep = f_rep.result()
                table, t_opt = f_opt.result()
            collided = not (is_motion_valid(env, model, x_gt, target.control, dur)
                            and is_state_valid(env, space, x_new))
            virtual += dur
            ts = time.perf_counter()
            rec = CycleRecord(cycle, x_next.copy(), x_new.copy(), target.control.copy(), dur, target.source,
                              target.sample_index, space.distance(x_next, x_new), replan_iterations=int(n_iter),
                              t_execute=t_exec, t_replan=t_rep, t_optimize=t_opt, collided=collided)
            report.records.append(rec)
            x_gt = x_new
            if collided:
                return done("collision", False)
            if goal_satisfied(env.goal, space, x_gt):
                rec.best_cost = 0.0
                return done("goal reached", True)

            # synchronization: recost, choose plan, choose control
            if replan:
                cands = tree.plan_set()
            else:
                rest = traj.suffix(1)
                rc = trajectory_cost(rest, cost, space)
                leaf = target.plan.leaf
                cands = PlanSet([PlanCandidate(rest, rc, leaf, rc)])
            try:
                ranked = _steppable(recalculate_costs(x_gt, cands, cost, space, env, model))
                if not len(ranked):
                    raise PlanSetExhausted("every candidate ends here or collides")
            except PlanSetExhausted:
                report.restarts += 1
                if report.restarts > config.max_restarts or not is_state_valid(env, space, x_gt):
                    return done("candidates exhausted", False)
                plans, tree, spent = _offline(config, pcfg, model, env, x_gt, rng_plan)
                virtual += spent
                ranked = _steppable(plans)
                if not len(ranked):
                    return done("restart planning failed", False)
                nb = ranked.best()
                rec.best_cost = nb.cost
                rec.candidate_costs = ranked.costs()
                target = _Target(nb, path_of(nb), nb.trajectory.controls[0].copy(), "restart", -1)
                rec.t_sync = time.perf_counter() - ts
                overhead = max(0.0, time.perf_counter() - tc0 - max(t_rep, t_opt, t_exec))
                continue
            nb = ranked.best()
            rec.best_cost = nb.cost
            rec.candidate_costs = ranked.costs()
            if replan:
                npath = path_of(nb)
            else:
                npath = target.node_path[1:]
            nxt_target = npath[1] if len(npath) > 1 else nb.trajectory.states[1]
            choice = select_execution_control(space, x_gt, table, nxt_target, nb.trajectory.controls[0])
            if choice.source == "nominal" and not table.is_empty and np.ndim(nxt_target) == 0:
                # child created during this cycle's replanning: try matching by state
                choice = select_execution_control(space, x_gt, table, nb.trajectory.states[1],
                                                  nb.trajectory.controls[0])
            target = _Target(nb, npath, choice.control, choice.source, choice.sample_index)
            rec.t_sync = time.perf_counter() - ts
            overhead = max(0.0, time.perf_counter() - tc0 - max(t_rep, t_opt, t_exec))
        return done("cycle cap", False)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
        if tree is not None and len(tree):
            report.extras["tree_size"] = len(tree)
        if replan and tree is not None:
            final = _steppable(tree.plan_set()).best()
            report.final_plan = final.trajectory if final is not None else None
