"""Workspaces with inflated obstacles, goal regions and samplers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from kinoaura import kernels
from kinoaura.core import ControlSpace, StateSpace

#: Default collision-check resolution in metric units.
COLLISION_RESOLUTION = 0.02


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"malformed box {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dims(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class Sphere:
    """Disc in 2-D, ball in 3-D."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")

    @property
    def dims(self) -> int:
        return len(self.center)


@dataclass(frozen=True, eq=False)
class GoalRegion:
    """Closed metric ball around ``center``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0.0:
            raise ValueError("goal radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def __eq__(self, other):
        if not isinstance(other, GoalRegion):
            return NotImplemented
        return np.array_equal(self.center, other.center) and self.radius == other.radius

    __hash__ = None


def goal_satisfied(goal: GoalRegion, space: StateSpace, x) -> bool:
    return space.distance(x, goal.center) <= goal.radius


@dataclass(frozen=True, eq=False)
class Environment:
    """Axis-aligned workspace over the position coordinates of the state.

    Obstacles are boxes and spheres grown by ``inflation``; the robot is a
    point in the inflated world. Points on an obstacle boundary collide.
    """

    lower: tuple
    upper: tuple
    obstacles: tuple = ()
    inflation: float = 0.0
    goal: GoalRegion | None = None
    position_dims: tuple = (0, 1)
    resolution: float = COLLISION_RESOLUTION
    _arrays: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        dims = tuple(int(d) for d in self.position_dims)
        if len(lo) != len(hi) or len(lo) != len(dims) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("workspace bounds must match position_dims with lower < upper")
        if self.inflation < 0.0:
            raise ValueError("inflation must be non-negative")
        if not self.resolution > 0.0:
            raise ValueError("collision resolution must be positive")
        for obs in self.obstacles:
            if obs.dims != len(dims):
                raise ValueError(f"obstacle {obs} does not match the {len(dims)}-D workspace")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "position_dims", dims)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        eps = float(self.inflation)
        p = len(dims)
        boxes = [o for o in self.obstacles if isinstance(o, Box)]
        spheres = [o for o in self.obstacles if isinstance(o, Sphere)]
        arrays = {
            "ws_lo": np.array(lo),
            "ws_hi": np.array(hi),
            "box_lo": np.array([b.lower for b in boxes], dtype=float).reshape(-1, p) - eps,
            "box_hi": np.array([b.upper for b in boxes], dtype=float).reshape(-1, p) + eps,
            "sph_c": np.array([s.center for s in spheres], dtype=float).reshape(-1, p),
            "sph_r": np.array([s.radius for s in spheres], dtype=float) + eps,
            "pos": np.array(dims, dtype=np.int64),
        }
        for a in arrays.values():
            a.setflags(write=False)
        object.__setattr__(self, "_arrays", arrays)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.lower == other.lower
            and self.upper == other.upper
            and self.obstacles == other.obstacles
            and self.inflation == other.inflation
            and self.goal == other.goal
            and self.position_dims == other.position_dims
            and self.resolution == other.resolution
        )

    __hash__ = None

    def with_inflation(self, inflation: float) -> "Environment":
        return Environment(self.lower, self.upper, self.obstacles, inflation, self.goal,
                           self.position_dims, self.resolution)

    def position(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[..., self._arrays["pos"]]

    def points_free(self, points) -> np.ndarray:
        a = self._arrays
        return kernels.points_free(np.atleast_2d(points), a["ws_lo"], a["ws_hi"], a["box_lo"], a["box_hi"],
                                   a["sph_c"], a["sph_r"])

    def segment_free(self, space: StateSpace, rows) -> bool:
        """Dense check of a polyline of states at ``self.resolution``."""
        a = self._arrays
        return bool(kernels.segment_free(rows, self.resolution, space.weights, space.angular_u8, a["pos"],
                                         a["ws_lo"], a["ws_hi"], a["box_lo"], a["box_hi"], a["sph_c"], a["sph_r"]))


def is_state_valid(env: Environment, space: StateSpace, x) -> bool:
    """Position inside the workspace and outside every inflated obstacle."""
    x = np.asarray(x, dtype=float)
    if x.shape != (space.dims,):
        raise ValueError(f"expected a state of {space.dims} dimensions")
    return bool(env.points_free(env.position(x))[0])


def is_motion_valid(env: Environment, model, x, u, dt: float) -> bool:
    """Check the propagated segment at the environment's resolution, endpoints included."""
    rows = model.rollout(x, u, dt)
    return env.segment_free(model.state_space, rows)


def sample_state(env: Environment | None, space: StateSpace, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the state-space box; position coordinates restricted to the workspace."""
    lo = np.array(space.lower)
    hi = np.array(space.upper)
    if env is not None:
        dims = list(env.position_dims)
        lo[dims] = np.maximum(lo[dims], env.lower)
        hi[dims] = np.minimum(hi[dims], env.upper)
    return rng.uniform(lo, hi)


def sample_control(cspace: ControlSpace, rng: np.random.Generator) -> np.ndarray:
    return cspace.sample(rng)
