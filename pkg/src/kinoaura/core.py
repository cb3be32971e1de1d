"""State/control spaces, trajectories, running costs and tracking error."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from kinoaura import kernels

if TYPE_CHECKING:
    from kinoaura.dynamics import DynamicsModel

PI = math.pi

#: Validation tolerance for kinodynamic consistency of stored trajectories.
TRAJECTORY_TOL = 1e-9


class Topology(enum.Enum):
    REAL = "real"
    ANGULAR = "angular"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Box-bounded state space with per-dimension topology.

    Angular dimensions live in [-pi, pi) regardless of the bounds passed in.
    The metric is ``sqrt(sum((w_i * d_i)**2))`` where ``d_i`` is the shortest
    wrapped difference on angular dimensions.
    """

    lower: np.ndarray
    upper: np.ndarray
    topology: tuple = ()
    weights: np.ndarray | None = None

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).ravel()
        upper = np.array(self.upper, dtype=float).ravel()
        n = lower.size
        if n == 0 or upper.size != n:
            raise ValueError("lower and upper bounds must be non-empty and of equal length")
        topo = tuple(Topology(t) for t in self.topology) if self.topology else (Topology.REAL,) * n
        if len(topo) != n:
            raise ValueError("topology length does not match bounds")
        angular = np.array([t is Topology.ANGULAR for t in topo])
        lower[angular] = -PI
        upper[angular] = PI
        if np.any(lower[~angular] >= upper[~angular]):
            raise ValueError("every real dimension needs lower < upper")
        weights = np.ones(n) if self.weights is None else np.array(self.weights, dtype=float).ravel()
        if weights.size != n or np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be strictly positive and finite, one per dimension")
        object.__setattr__(self, "lower", _frozen_array(lower))
        object.__setattr__(self, "upper", _frozen_array(upper))
        object.__setattr__(self, "topology", topo)
        object.__setattr__(self, "weights", _frozen_array(weights))
        object.__setattr__(self, "angular", _frozen_array(angular, dtype=bool))
        object.__setattr__(self, "angular_u8", _frozen_array(angular, dtype=np.uint8))

    @property
    def dims(self) -> int:
        return self.lower.size

    def __eq__(self, other):
        if not isinstance(other, StateSpace):
            return NotImplemented
        return (
            self.topology == other.topology
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dims:
            raise ValueError(f"expected {self.dims} state dimensions, got {x.shape[-1]}")
        return x

    def normalize(self, x) -> np.ndarray:
        """Wrap angular entries into [-pi, pi); real entries are untouched."""
        x = np.array(self._check(x), dtype=float)
        if self.angular.any():
            x[..., self.angular] = kernels.wrap_angles(x[..., self.angular])
        return x

    def contains(self, x) -> bool:
        x = self._check(x)
        real = ~self.angular
        return bool(np.all(x[real] >= self.lower[real]) and np.all(x[real] <= self.upper[real]))

    def clamp(self, x) -> np.ndarray:
        x = self.normalize(x)
        real = ~self.angular
        x[..., real] = np.clip(x[..., real], self.lower[real], self.upper[real])
        return x

    def difference(self, a, b) -> np.ndarray:
        """``a - b`` with angular entries wrapped to the shortest arc."""
        d = self._check(a) - self._check(b)
        if self.angular.any():
            d = np.array(d, dtype=float)
            d[..., self.angular] = kernels.wrap_angles(d[..., self.angular])
        return d

    def norm(self, v) -> float:
        """Weighted norm of a perturbation vector (no wrapping)."""
        v = self._check(v) * self.weights
        return float(math.sqrt(float(np.dot(v, v))))

    def distance(self, a, b) -> float:
        d = self.difference(a, b) * self.weights
        return float(math.sqrt(float(np.dot(d, d))))

    def distances(self, points, q) -> np.ndarray:
        """Distances from each row of ``points`` to ``q``."""
        points = np.atleast_2d(self._check(points))
        return kernels.distances(points, self._check(q), self.weights, self.angular_u8)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class ControlSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).ravel()
        upper = np.array(self.upper, dtype=float).ravel()
        if lower.size == 0 or lower.size != upper.size or np.any(lower > upper):
            raise ValueError("control bounds must be non-empty with lower <= upper")
        object.__setattr__(self, "lower", _frozen_array(lower))
        object.__setattr__(self, "upper", _frozen_array(upper))

    @property
    def dims(self) -> int:
        return self.lower.size

    def __eq__(self, other):
        if not isinstance(other, ControlSpace):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None

    def clamp(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dims:
            raise ValueError(f"expected {self.dims} control dimensions, got {u.shape[-1]}")
        return np.clip(u, self.lower, self.upper)

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def state_distance(space: StateSpace, a, b) -> float:
    return space.distance(a, b)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Interleaved states, piecewise-constant controls and their durations."""

    states: np.ndarray
    controls: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("states must be a non-empty (T+1, n) array")
        controls = np.array(self.controls, dtype=float)
        durations = np.array(self.durations, dtype=float).ravel()
        t = states.shape[0] - 1
        if controls.size == 0:
            controls = controls.reshape(0, controls.shape[-1] if controls.ndim == 2 else 0)
        if controls.shape[0] != t or durations.shape[0] != t:
            raise ValueError(
                f"|states| = |controls| + 1 = |durations| + 1 violated: "
                f"{states.shape[0]}, {controls.shape[0]}, {durations.shape[0]}"
            )
        if np.any(durations <= 0.0):
            raise ValueError("durations must be positive")
        for name, arr in (("states", states), ("controls", controls), ("durations", durations)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def single(cls, state, control_dims: int) -> "Trajectory":
        return cls(np.atleast_2d(state), np.zeros((0, control_dims)), np.zeros(0))

    @property
    def num_steps(self) -> int:
        return self.durations.shape[0]

    def __len__(self) -> int:
        return self.states.shape[0]

    def concat(self, other: "Trajectory") -> "Trajectory":
        if not np.array_equal(self.states[-1], other.states[0]):
            raise ValueError("trajectories do not join")
        controls = np.concatenate([self.controls.reshape(-1, other.controls.shape[1]), other.controls])
        return Trajectory(
            np.concatenate([self.states, other.states[1:]]),
            controls,
            np.concatenate([self.durations, other.durations]),
        )

    def suffix(self, start: int) -> "Trajectory":
        return Trajectory(self.states[start:], self.controls[start:], self.durations[start:])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.controls, other.controls)
            and np.array_equal(self.durations, other.durations)
        )

    __hash__ = None


def validate_trajectory(traj: Trajectory, model: "DynamicsModel", tol: float = TRAJECTORY_TOL) -> bool:
    """Check that propagating each state under its control reproduces the next one."""
    space = model.state_space
    for i in range(traj.num_steps):
        nxt = model.propagate(traj.states[i], traj.controls[i], traj.durations[i])
        if np.max(np.abs(space.difference(nxt, traj.states[i + 1]))) > tol:
            return False
    return True


class CostFunction(enum.Enum):
    """Running cost families.

    ``PATH_LENGTH`` sums metric distances between consecutive states,
    ``DURATION`` sums segment durations and ``CONTROL_EFFORT`` sums
    ``|u|^2 * dt``.
    """

    PATH_LENGTH = "path_length"
    DURATION = "duration"
    CONTROL_EFFORT = "control_effort"

    def step_cost(self, space: StateSpace, x, u, dt: float, x_next) -> float:
        if self is CostFunction.PATH_LENGTH:
            return space.distance(x, x_next)
        if self is CostFunction.DURATION:
            return float(dt)
        u = np.asarray(u, dtype=float)
        return float(np.dot(u, u)) * float(dt)


def trajectory_cost(traj: Trajectory, cost: CostFunction, space: StateSpace) -> float:
    total = 0.0
    for i in range(traj.num_steps):
        total += cost.step_cost(space, traj.states[i], traj.controls[i], traj.durations[i], traj.states[i + 1])
    return total


def step_errors(nominal: Sequence, executed: Sequence, space: StateSpace) -> np.ndarray:
    """Per-step distances ``|x_i - x_i^gt|`` for i = 0..T."""
    nominal = np.atleast_2d(np.asarray(nominal, dtype=float))
    executed = np.atleast_2d(np.asarray(executed, dtype=float))
    if nominal.shape != executed.shape:
        raise ValueError(f"sequence length mismatch: {nominal.shape} vs {executed.shape}")
    d = space.difference(nominal, executed) * space.weights
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def tracking_error(nominal: Sequence, executed: Sequence, space: StateSpace) -> float:
    """Summed state distance between the nominal and executed sequences."""
    return float(step_errors(nominal, executed, space).sum())

