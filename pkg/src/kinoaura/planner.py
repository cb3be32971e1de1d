"""Forward-propagation AO planners (SST, AO-RRT) over a persistent tree.

The tree survives between calls: ``plan`` resumes growth from an existing
tree, and ``prune_unreachable`` re-anchors it at a descendant of the root,
which is how the online replanner reuses earlier progress.
"""
from __future__ import annotations

import bisect
import copy
import enum
import io
import math
import re
import time
from dataclasses import dataclass, field

import numpy as np

from kinoaura import kernels
from kinoaura.core import CostFunction, StateSpace, Trajectory, trajectory_cost
from kinoaura.nn import NearestIndex
from kinoaura.world import Environment, goal_satisfied, is_state_valid

ROOT_TOL = 1e-9


class PlanningError(ValueError):
    """Raised for problems the planner cannot start on (e.g. an invalid start)."""


class Variant(enum.Enum):
    SST = "sst"
    AORRT = "aorrt"


@dataclass(frozen=True)
class PlannerConfig:
    variant: Variant = Variant.SST
    goal_bias: float = 0.05
    selection_radius: float = 0.4
    witness_radius: float = 0.2
    propagation_step: float = 0.5
    min_steps: int = 1
    max_steps: int = 3
    cost_weight: float = 1.0
    seed: int = 0
    max_solutions: int = 64
    kd_threshold: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal bias must lie in [0, 1)")
        if not 0.0 < self.witness_radius < self.selection_radius:
            raise ValueError("SST radii must satisfy 0 < witness_radius < selection_radius")
        if not self.propagation_step > 0.0:
            raise ValueError("propagation step must be positive")
        if not 1 <= self.min_steps <= self.max_steps:
            raise ValueError("need 1 <= min_steps <= max_steps")
        if not self.cost_weight > 0.0:
            raise ValueError("cost weight must be positive")
        if self.max_solutions < 1:
            raise ValueError("max_solutions must be at least 1")


_BUDGET_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(s|iter|it)\s*$")


@dataclass(frozen=True)
class Budget:
    """Either a wall-clock budget in seconds or an iteration count."""

    seconds: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        if (self.seconds is None) == (self.iterations is None):
            raise ValueError("a budget is either seconds or iterations, not both")
        if self.seconds is not None and not (self.seconds >= 0.0 and math.isfinite(self.seconds)):
            raise ValueError("budget seconds must be finite and non-negative")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("budget iterations must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "Budget":
        """``"5s"`` or ``"2000iter"``."""
        m = _BUDGET_RE.match(str(text))
        if not m:
            raise ValueError(f"budget must look like '5s' or '2000iter', got {text!r}")
        if m.group(2) == "s":
            return cls(seconds=float(m.group(1)))
        value = float(m.group(1))
        if value != int(value):
            raise ValueError(f"iteration budget must be an integer, got {text!r}")
        return cls(iterations=int(value))

    @property
    def is_zero(self) -> bool:
        return (self.seconds or 0.0) == 0.0 and (self.iterations or 0) == 0

    def __str__(self):
        return f"{self.seconds!r}s" if self.seconds is not None else f"{self.iterations}iter"


@dataclass(eq=False)
class TreeNode:
    id: int
    state: np.ndarray
    parent: int | None = None
    control: np.ndarray | None = None
    duration: float | None = None
    cost: float = 0.0
    edge_cost: float = 0.0
    children: list = field(default_factory=list)
    active: bool = True
    witness: int | None = None


@dataclass(frozen=True, eq=False)
class PlanCandidate:
    trajectory: Trajectory
    cost: float
    leaf: int
    nominal_cost: float

    @property
    def first_state(self) -> np.ndarray:
        return self.trajectory.states[0]


class PlanSet:
    """Goal-reaching candidates, kept sorted by cost (ties: leaf id)."""

    def __init__(self, candidates=()):
        self.candidates = sorted(candidates, key=lambda c: (c.cost, c.leaf))

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __getitem__(self, i):
        return self.candidates[i]

    def best(self) -> PlanCandidate | None:
        return self.candidates[0] if self.candidates else None

    def costs(self) -> list[float]:
        return [c.cost for c in self.candidates]


class PlanTree:
    """Search tree with cost-to-come, SST witnesses and a NN index over active nodes."""

    def __init__(self, space: StateSpace, start, variant: Variant = Variant.SST, cost_weight: float = 1.0,
                 kd_threshold: int = 2000, goal=None):
        self.space = space
        self.variant = Variant(variant)
        self.cost_weight = float(cost_weight)
        self.kd_threshold = int(kd_threshold)
        self.goal = goal
        self.nodes: dict[int, TreeNode] = {}
        self.root = 0
        self.next_id = 1
        self.next_witness = 0
        self.solutions: list[tuple[float, int]] = []
        self.best_cost = math.inf
        self.max_cost = 0.0
        self.iterations = 0
        self._pins: dict[int, int] = {}
        self._new_indexes()
        root = TreeNode(0, np.array(space.normalize(start), dtype=float))
        self.nodes[0] = root
        self._index_add(root)
        if self.variant is Variant.SST:
            self._new_witness(root.state, 0)

    # -- index plumbing ----------------------------------------------------
    def _new_indexes(self):
        w, ang = self.space.weights, self.space.angular_u8
        if self.variant is Variant.AORRT:
            w = np.append(w, self.cost_weight)
            ang = np.append(ang, 0).astype(np.uint8)
        self.index = NearestIndex(w, ang, self.kd_threshold)
        self.witnesses = NearestIndex(self.space.weights, self.space.angular_u8, self.kd_threshold)
        self.witness_rep: dict[int, int | None] = {}
        self.witness_state: dict[int, np.ndarray] = {}

    def _index_point(self, node: TreeNode) -> np.ndarray:
        if self.variant is Variant.AORRT:
            return np.append(node.state, node.cost)
        return node.state

    def _index_add(self, node: TreeNode):
        self.index.add(node.id, self._index_point(node), node.cost)

    def _new_witness(self, state, rep) -> int:
        wid = self.next_witness
        self.next_witness += 1
        self.witnesses.add(wid, state)
        self.witness_rep[wid] = rep
        self.witness_state[wid] = np.array(state, dtype=float)
        if rep is not None:
            self.nodes[rep].witness = wid
        return wid

    # -- structure ---------------------------------------------------------
    def __len__(self):
        return len(self.nodes)

    def __contains__(self, nid):
        return nid in self.nodes

    def node(self, nid: int) -> TreeNode:
        try:
            return self.nodes[nid]
        except KeyError:
            raise KeyError(f"node {nid} is not in the tree") from None

    def path(self, nid: int) -> list[int]:
        """Node ids from the root to ``nid``."""
        out = []
        cur = self.node(nid).id
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        out.reverse()
        return out

    def descendants(self, nid: int) -> list[int]:
        """``nid`` and everything below it, breadth first."""
        out = [self.node(nid).id]
        i = 0
        while i < len(out):
            out.extend(self.nodes[out[i]].children)
            i += 1
        return out

    def active_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.active)

    def add_node(self, parent: int, state, control, duration: float, edge_cost: float) -> int:
        p = self.nodes[parent]
        nid = self.next_id
        self.next_id += 1
        node = TreeNode(nid, np.asarray(state, dtype=float), parent, np.asarray(control, dtype=float),
                        float(duration), p.cost + edge_cost, edge_cost)
        self.nodes[nid] = node
        p.children.append(nid)
        self._index_add(node)
        if node.cost > self.max_cost:
            self.max_cost = node.cost
        return nid

    def deactivate(self, nid: int):
        node = self.nodes[nid]
        if node.active:
            node.active = False
            self.index.remove(nid)

    def _remove_leaf(self, nid: int):
        node = self.nodes.pop(nid)
        self.nodes[node.parent].children.remove(nid)
        if node.active:
            self.index.remove(nid)
        if node.witness is not None and self.witness_rep.get(node.witness) == nid:
            self.witness_rep[node.witness] = None

    def removable(self, nid: int) -> bool:
        node = self.nodes[nid]
        return nid != self.root and not node.children and not node.active and nid not in self._pins

    def cleanup_from(self, nid: int | None):
        """Remove inactive, unpinned leaves starting at ``nid`` and walking up."""
        while nid is not None and nid in self.nodes and self.removable(nid):
            parent = self.nodes[nid].parent
            self._remove_leaf(nid)
            nid = parent

    # -- solutions ---------------------------------------------------------
    def _pin(self, leaf: int, delta: int):
        for nid in self.path(leaf):
            c = self._pins.get(nid, 0) + delta
            if c:
                self._pins[nid] = c
            else:
                self._pins.pop(nid, None)

    def is_pinned(self, nid: int) -> bool:
        return nid in self._pins

    def register_solution(self, nid: int, cap: int = 64):
        node = self.nodes[nid]
        entry = (node.cost, nid)
        bisect.insort(self.solutions, entry)
        self._pin(nid, +1)
        if node.cost < self.best_cost:
            self.best_cost = node.cost
        while len(self.solutions) > cap:
            _, worst = self.solutions.pop()
            self._pin(worst, -1)
            self.cleanup_from(worst)

    def enforce_cost_bound(self):
        """Drop every node whose cost-to-come exceeds the best solution cost."""
        bound = self.best_cost
        if not math.isfinite(bound):
            return
        doomed = [nid for nid, n in self.nodes.items() if n.cost > bound]
        if not doomed:
            return
        doomed_set = set(doomed)
        kept = [(c, s) for c, s in self.solutions if s not in doomed_set]
        for c, s in self.solutions:
            if s in doomed_set:
                self._pin(s, -1)
        self.solutions = kept
        # descendants cost at least as much as their ancestors: remove bottom-up
        for nid in reversed(self.descendants(self.root)):
            if nid in doomed_set:
                self._remove_leaf(nid)

    def plan_set(self) -> PlanSet:
        cands = []
        for c, leaf in self.solutions:
            traj = extract_trajectory(self, leaf)
            cands.append(PlanCandidate(traj, c, leaf, c))
        return PlanSet(cands)

    def snapshot_children(self, nid: int) -> list[tuple[int, np.ndarray, np.ndarray, float]]:
        """Immutable copy of ``(child id, state, control, duration)`` for each child."""
        out = []
        for cid in self.node(nid).children:
            c = self.nodes[cid]
            out.append((cid, c.state.copy(), c.control.copy(), c.duration))
        return out

    def copy(self) -> "PlanTree":
        return copy.deepcopy(self)

    # -- rebuilding after re-rooting -----------------------------------------
    def _rebuild(self):
        self._new_indexes_keep_witnesses()
        self.max_cost = max((n.cost for n in self.nodes.values()), default=0.0)
        self._pins = {}
        for _, leaf in self.solutions:
            self._pin(leaf, +1)
        self.best_cost = self.solutions[0][0] if self.solutions else math.inf

    def _new_indexes_keep_witnesses(self):
        old_states = self.witness_state
        groups: dict[int, list[int]] = {}
        for n in self.nodes.values():
            if n.witness is not None:
                groups.setdefault(n.witness, []).append(n.id)
        self._new_indexes()
        if self.variant is Variant.SST:
            for wid in sorted(groups):
                members = groups[wid]
                rep = min(members, key=lambda i: (i != self.root, self.nodes[i].cost, i))
                self.witnesses.add(wid, old_states[wid])
                self.witness_state[wid] = old_states[wid]
                self.witness_rep[wid] = rep
                for i in members:
                    self.nodes[i].active = i == rep
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            if n.active:
                self._index_add(n)


def prune_unreachable(tree: PlanTree, new_root: int) -> PlanTree:
    """Keep ``new_root`` and its descendants, re-root there and rebase costs.

    Costs are re-accumulated top-down from the stored edge costs so the cost
    recurrence holds exactly afterwards. The NN index and the witness set are
    rebuilt over the survivors. The tree is modified in place and returned.
    """
    tree.node(new_root)
    keep = tree.descendants(new_root)
    keep_set = set(keep)
    tree.nodes = {nid: tree.nodes[nid] for nid in sorted(keep_set)}
    root = tree.nodes[new_root]
    root.parent = None
    root.control = None
    root.duration = None
    root.edge_cost = 0.0
    root.cost = 0.0
    tree.root = new_root
    for nid in keep[1:]:
        n = tree.nodes[nid]
        n.cost = tree.nodes[n.parent].cost + n.edge_cost
    tree.solutions = sorted((tree.nodes[s].cost, s) for _, s in tree.solutions if s in keep_set)
    if tree.variant is Variant.SST and tree.nodes[new_root].witness is None:
        tree.nodes[new_root].witness = tree._new_witness(root.state, None)
    tree._rebuild()
    if tree.variant is Variant.SST:
        for nid in [i for i, n in tree.nodes.items() if not n.children]:
            tree.cleanup_from(nid)
    else:
        tree.enforce_cost_bound()
    return tree


def extract_trajectory(tree: PlanTree, leaf: int) -> Trajectory:
    ids = tree.path(leaf)
    nodes = [tree.nodes[i] for i in ids]
    states = np.stack([n.state for n in nodes])
    m = None
    for n in nodes[1:]:
        m = n.control.size
        break
    if m is None:
        return Trajectory(states, np.zeros((0, 0)), np.zeros(0))
    controls = np.stack([n.control for n in nodes[1:]])
    durations = np.array([n.duration for n in nodes[1:]])
    return Trajectory(states, controls, durations)


def audit_tree(tree: PlanTree, cost: CostFunction) -> list[str]:
    """Full consistency check; returns a list of human-readable problems (empty when sound)."""
    problems = []
    space = tree.space
    root = tree.nodes.get(tree.root)
    if root is None:
        return ["root missing"]
    if root.parent is not None or root.control is not None or root.cost != 0.0:
        problems.append("root has a parent, control or non-zero cost")
    seen = set(tree.descendants(tree.root))
    if seen != set(tree.nodes):
        problems.append(f"{len(set(tree.nodes) - seen)} nodes unreachable from the root")
    for nid, n in tree.nodes.items():
        if n.id != nid:
            problems.append(f"node {nid} stores id {n.id}")
        for c in n.children:
            if c not in tree.nodes or tree.nodes[c].parent != nid:
                problems.append(f"child link {nid}->{c} inconsistent")
        if n.parent is None:
            if nid != tree.root:
                problems.append(f"non-root node {nid} has no parent")
            continue
        p = tree.nodes.get(n.parent)
        if p is None or nid not in p.children:
            problems.append(f"parent link {n.parent}->{nid} inconsistent")
            continue
        e = cost.step_cost(space, p.state, n.control, n.duration, n.state)
        if e != n.edge_cost or n.cost != p.cost + n.edge_cost:
            problems.append(f"cost recurrence broken at node {nid}")
        if n.cost < 0.0:
            problems.append(f"negative cost at node {nid}")
    active = set(tree.active_ids())
    if set(tree.index.ids()) != active:
        problems.append("NN index does not hold exactly the active nodes")
    for c, s in tree.solutions:
        if s not in tree.nodes or tree.nodes[s].cost != c:
            problems.append(f"stale solution entry {s}")
    return problems


def sst_witness_violations(tree: PlanTree) -> list[str]:
    """At most one active node per witness; inactive nodes are dominated by their representative."""
    out = []
    if tree.variant is not Variant.SST:
        return out
    per_witness: dict[int, list[int]] = {}
    for n in tree.nodes.values():
        if n.witness is None:
            out.append(f"node {n.id} has no witness")
            continue
        if n.active:
            per_witness.setdefault(n.witness, []).append(n.id)
    for wid, ids in per_witness.items():
        if len(ids) > 1:
            out.append(f"witness {wid} has {len(ids)} active representatives")
        if tree.witness_rep.get(wid) != ids[0]:
            out.append(f"witness {wid} representative bookkeeping disagrees")
    for n in tree.nodes.values():
        if n.active or n.witness is None:
            continue
        rep = tree.witness_rep.get(n.witness)
        if rep is None or rep not in tree.nodes or tree.nodes[rep].cost > n.cost:
            out.append(f"inactive node {n.id} is not dominated by its witness representative")
    return out


def aorrt_bound_violations(tree: PlanTree, tol: float = 1e-9) -> list[str]:
    if tree.variant is not Variant.AORRT or not tree.solutions:
        return []
    best = tree.solutions[0][0]
    return [f"node {n.id} cost {n.cost} exceeds bound {best}" for n in tree.nodes.values() if n.cost > best + tol]


# ---------------------------------------------------------------------------
# the planning loop
# ---------------------------------------------------------------------------


def _start_ok(env: Environment, space: StateSpace, x) -> bool:
    return bool(np.all(np.isfinite(x))) and space.contains(x) and is_state_valid(env, space, x)


def plan(config: PlannerConfig, model, env: Environment, cost: CostFunction, start, budget: Budget,
         initial_tree: PlanTree | None = None, rng: np.random.Generator | None = None,
         on_iteration=None) -> tuple[PlanSet, PlanTree]:
    """Grow (or create) a tree toward ``env.goal`` within ``budget``.

    Only forward propagation and motion validity checks are used. Returns
    every goal-reaching candidate found so far with the live tree.
    ``on_iteration(tree)`` is called after each iteration when given.
    """
    space = model.state_space
    goal = env.goal
    if goal is None:
        raise PlanningError("environment has no goal region")
    start = space.normalize(np.asarray(start, dtype=float))
    if not _start_ok(env, space, start):
        raise PlanningError(f"start state {start} is not valid")
    if initial_tree is None:
        tree = PlanTree(space, start, config.variant, config.cost_weight, config.kd_threshold, goal)
        if goal_satisfied(goal, space, start):
            tree.register_solution(tree.root, config.max_solutions)
    else:
        tree = initial_tree
        if tree.variant is not config.variant:
            raise PlanningError("initial tree was grown by a different planner variant")
        if space.distance(tree.nodes[tree.root].state, start) > ROOT_TOL:
            raise PlanningError("initial tree root does not match the start state")
    if budget.is_zero:
        return tree.plan_set(), tree
    if rng is None:
        rng = np.random.default_rng(config.seed)
    grow(tree, config, model, env, cost, budget, rng, on_iteration)
    return tree.plan_set(), tree


def grow(tree: PlanTree, config: PlannerConfig, model, env: Environment, cost: CostFunction,
         budget: Budget, rng: np.random.Generator, on_iteration=None) -> int:
    """Run planner iterations on ``tree`` in place; returns the iteration count."""
    space = model.state_space
    cspace = model.control_space
    goal = env.goal
    gc, gr = goal.center, goal.radius
    real = ~space.angular
    lo_real = space.lower[real]
    hi_real = space.upper[real]
    s_lo = np.array(space.lower)
    s_hi = np.array(space.upper)
    dims = list(env.position_dims)
    s_lo[dims] = np.maximum(s_lo[dims], env.lower)
    s_hi[dims] = np.minimum(s_hi[dims], env.upper)
    u_lo, u_hi = cspace.lower, cspace.upper
    dt0 = config.propagation_step
    kmin, kmax = config.min_steps, config.max_steps
    sst = config.variant is Variant.SST
    s_bn, s_v = config.selection_radius, config.witness_radius
    cap = config.max_solutions
    rollout = model._rollout
    nodes = tree.nodes
    w_s, ang_s = space.weights, space.angular_u8
    gc_row = np.ascontiguousarray(gc, dtype=float)

    def in_goal(x):
        return kernels.distances(x[None], gc_row, w_s, ang_s)[0] <= gr

    limit = budget.iterations
    deadline = None if budget.seconds is None else time.perf_counter() + budget.seconds
    done = 0
    while True:
        if limit is not None:
            if done >= limit:
                break
        elif time.perf_counter() >= deadline:
            break
        done += 1
        tree.iterations += 1
        nodes = tree.nodes
        if rng.random() < config.goal_bias:
            x_rand = np.array(gc, dtype=float)
        else:
            x_rand = rng.uniform(s_lo, s_hi)
        if sst:
            sel = tree.index.best_near(x_rand, s_bn)
            if sel is None:
                sel = tree.index.nearest(x_rand)[0]
        else:
            bound = tree.best_cost if math.isfinite(tree.best_cost) else tree.max_cost
            c_rand = rng.uniform(0.0, bound) if bound > 0.0 else 0.0
            sel = tree.index.nearest(np.append(x_rand, c_rand))[0]
        u = rng.uniform(u_lo, u_hi)
        k = int(rng.integers(kmin, kmax + 1))
        if sel is None:
            continue
        parent = nodes[sel]
        duration = k * dt0
        rows = rollout(parent.state, u, duration)
        if real.any():
            r = rows[:, real]
            if not (np.all(r >= lo_real) and np.all(r <= hi_real)):
                if on_iteration:
                    on_iteration(tree)
                continue
        if not env.segment_free(space, rows):
            if on_iteration:
                on_iteration(tree)
            continue
        x_new = rows[-1].copy()
        edge = cost.step_cost(space, parent.state, u, duration, x_new)
        c_new = parent.cost + edge
        if sst:
            wid, wd = tree.witnesses.nearest(x_new)
            if wid is None or wd > s_v:
                wid = tree._new_witness(x_new, None)
            rep = tree.witness_rep[wid]
            if rep is not None and c_new >= nodes[rep].cost:
                if on_iteration:
                    on_iteration(tree)
                continue
            nid = tree.add_node(sel, x_new, u, duration, edge)
            nodes[nid].witness = wid
            tree.witness_rep[wid] = nid
            if rep is not None:
                tree.deactivate(rep)
                tree.cleanup_from(rep)
            if in_goal(x_new):
                tree.register_solution(nid, cap)
        else:
            if c_new > tree.best_cost:
                if on_iteration:
                    on_iteration(tree)
                continue
            nid = tree.add_node(sel, x_new, u, duration, edge)
            if in_goal(x_new):
                improved = c_new < tree.best_cost
                tree.register_solution(nid, cap)
                if improved:
                    tree.enforce_cost_bound()
        if on_iteration:
            on_iteration(tree)
    return done


# ---------------------------------------------------------------------------
# text dump
# ---------------------------------------------------------------------------

_HEADER = "# kinoaura-tree 1"


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def dump_tree(tree: PlanTree, out=None) -> str:
    """Line-oriented dump: ``id parent active cost duration state control``.

    Fields are space separated, vectors comma separated, ``-`` marks an
    absent value. Floats use the shortest round-trip representation.
    """
    buf = io.StringIO()
    buf.write(f"{_HEADER}\n")
    buf.write(f"# variant {tree.variant.value} root {tree.root} nodes {len(tree.nodes)}\n")
    buf.write("# id parent active cost duration state control\n")
    for nid in sorted(tree.nodes):
        n = tree.nodes[nid]
        buf.write(
            f"{nid} {'-' if n.parent is None else n.parent} {int(n.active)} {n.cost!r} "
            f"{'-' if n.duration is None else repr(n.duration)} {_fmt(n.state)} "
            f"{'-' if n.control is None else _fmt(n.control)}\n"
        )
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def load_tree_dump(text: str) -> list[dict]:
    """Parse ``dump_tree`` output into one dict per node (for renderers and tests)."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        nid, parent, active, c, dur, state, control = parts
        rows.append({
            "id": int(nid),
            "parent": None if parent == "-" else int(parent),
            "active": active == "1",
            "cost": float(c),
            "duration": None if dur == "-" else float(dur),
            "state": np.array([float(v) for v in state.split(",")]),
            "control": None if control == "-" else np.array([float(v) for v in control.split(",")]),
        })
    return rows


__all__ = [
    "Budget", "PlanCandidate", "PlanSet", "PlanTree", "PlannerConfig", "PlanningError", "TreeNode", "Variant",
    "aorrt_bound_violations", "audit_tree", "dump_tree", "extract_trajectory", "grow", "load_tree_dump", "plan",
    "prune_unreachable", "sst_witness_violations", "trajectory_cost",
]
