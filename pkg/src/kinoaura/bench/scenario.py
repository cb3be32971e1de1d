"""Scenario files: TOML problem definitions (system, map, start, goal, noise).

The grammar is documented in ``docs/scenario_format.md``. Loading validates
every field and reports the offending key and, where possible, its line.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from kinoaura.core import CostFunction
from kinoaura.dynamics import DoubleIntegrator6D, KinematicCar
from kinoaura.execution import ConstantBias, GaussianNoise, NoiseModel, ZeroNoise
from kinoaura.world import COLLISION_RESOLUTION, Box, Environment, GoalRegion, Sphere, is_state_valid

SYSTEMS = ("kinematic_car", "double_integrator_6d")
METHOD_SECTIONS = ("aura", "planner", "mppi", "rr")

_SYSTEM_PARAMS = {
    "kinematic_car": {"wheelbase", "max_speed", "max_steer", "heading_weight"},
    "double_integrator_6d": {"max_velocity", "max_acceleration", "weights"},
}
_DEFAULT_POS_DIMS = {"kinematic_car": (0, 1), "double_integrator_6d": (0, 1, 2)}
_STATE_DIMS = {"kinematic_car": 3, "double_integrator_6d": 6}


class ScenarioError(ValueError):
    """A scenario file is malformed; carries the field path and line when known."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.field = field_name
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field_name:
            where.append(f"field '{field_name}'")
        prefix = ": ".join([", ".join(where)]) if where else ""
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True, eq=True)
class Scenario:
    name: str
    system: str
    environment: Environment
    start: tuple
    noise: NoiseModel = field(default_factory=ZeroNoise)
    cost: CostFunction = CostFunction.PATH_LENGTH
    system_params: dict = field(default_factory=dict)
    methods: dict = field(default_factory=dict)
    description: str = ""

    @property
    def goal(self) -> GoalRegion:
        return self.environment.goal

    def build_model(self):
        env = self.environment
        p = dict(self.system_params)
        if self.system == "kinematic_car":
            return KinematicCar(position_lower=env.lower, position_upper=env.upper, **p)
        return DoubleIntegrator6D(position_lower=env.lower, position_upper=env.upper, **p)

    def method_params(self, section: str) -> dict:
        return dict(self.methods.get(section, {}))

    def to_dict(self) -> dict:
        env = self.environment
        d = {"name": self.name}
        if self.description:
            d["description"] = self.description
        d["system"] = self.system
        d["cost"] = self.cost.value
        d["start"] = [float(v) for v in self.start]
        if self.system_params:
            d["system_params"] = {k: (list(v) if isinstance(v, (list, tuple)) else v)
                                  for k, v in self.system_params.items()}
        obstacles = []
        for o in env.obstacles:
            if isinstance(o, Box):
                obstacles.append({"type": "box", "lower": list(o.lower), "upper": list(o.upper)})
            else:
                obstacles.append({"type": "sphere", "center": list(o.center), "radius": o.radius})
        d["environment"] = {
            "lower": list(env.lower),
            "upper": list(env.upper),
            "inflation": env.inflation,
            "resolution": env.resolution,
            "position_dims": list(env.position_dims),
            "obstacles": obstacles,
        }
        d["goal"] = {"center": [float(v) for v in env.goal.center], "radius": env.goal.radius}
        spec = self.noise.spec()
        d["noise"] = spec
        for sec in METHOD_SECTIONS:
            if self.methods.get(sec):
                d[sec] = dict(self.methods[sec])
        return d


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    leaf = key.split(".")[-1].split("[")[0]
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith(f"{leaf} ") or stripped.startswith(f"{leaf}=") or stripped == f"[{key}]":
            return i
    return None


class _Reader:
    def __init__(self, text: str | None, source: str | None):
        self.text = text
        self.source = source

    def fail(self, msg, key):
        raise ScenarioError(msg, key, _line_of(self.text, key), self.source)

    def get(self, table, key, path, kind, required=True, default=None):
        if key not in table:
            if required:
                self.fail("required field is missing", path)
            return default
        v = table[key]
        if kind == "number":
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(f"expected a finite number, got {v!r}", path)
            return float(v)
        if kind == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(f"expected an integer, got {v!r}", path)
            return v
        if kind == "str":
            if not isinstance(v, str):
                self.fail(f"expected a string, got {v!r}", path)
            return v
        if kind == "vector":
            if not isinstance(v, list) or not v or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v):
                self.fail(f"expected a non-empty array of finite numbers, got {v!r}", path)
            return tuple(float(x) for x in v)
        if kind == "table":
            if not isinstance(v, dict):
                self.fail("expected a table", path)
            return v
        return v


def scenario_from_dict(data: dict, text: str | None = None, source: str | None = None) -> Scenario:
    r = _Reader(text, source)
    known = {"name", "description", "system", "cost", "start", "system_params", "environment", "goal", "noise",
             *METHOD_SECTIONS}
    for k in data:
        if k not in known:
            r.fail("unknown top-level field", k)
    name = r.get(data, "name", "name", "str")
    description = r.get(data, "description", "description", "str", required=False, default="")
    system = r.get(data, "system", "system", "str")
    if system not in SYSTEMS:
        r.fail(f"unknown system {system!r}; expected one of {', '.join(SYSTEMS)}", "system")
    cost_name = r.get(data, "cost", "cost", "str", required=False, default="path_length")
    try:
        cost = CostFunction(cost_name)
    except ValueError:
        r.fail(f"unknown cost {cost_name!r}", "cost")
    nx = _STATE_DIMS[system]
    start = r.get(data, "start", "start", "vector")
    if len(start) != nx:
        r.fail(f"start needs {nx} entries for {system}", "start")

    params = dict(r.get(data, "system_params", "system_params", "table", required=False, default={}))
    for k, v in params.items():
        if k not in _SYSTEM_PARAMS[system]:
            r.fail(f"unknown parameter for {system}", f"system_params.{k}")
        if k == "weights":
            params[k] = r.get(params, k, "system_params.weights", "vector")
            if len(params[k]) != nx:
                r.fail(f"weights need {nx} entries", "system_params.weights")
        else:
            params[k] = r.get(params, k, f"system_params.{k}", "number")

    envt = r.get(data, "environment", "environment", "table")
    for k in envt:
        if k not in {"lower", "upper", "inflation", "resolution", "position_dims", "obstacles"}:
            r.fail("unknown environment field", f"environment.{k}")
    lower = r.get(envt, "lower", "environment.lower", "vector")
    upper = r.get(envt, "upper", "environment.upper", "vector")
    pos_dims = envt.get("position_dims", list(_DEFAULT_POS_DIMS[system]))
    if not isinstance(pos_dims, list) or not all(isinstance(i, int) and 0 <= i < nx for i in pos_dims):
        r.fail("position_dims must be state indices", "environment.position_dims")
    if len(lower) != len(pos_dims) or len(upper) != len(pos_dims):
        r.fail(f"workspace bounds need {len(pos_dims)} entries", "environment.lower")
    expected_dims = _DEFAULT_POS_DIMS[system]
    if tuple(pos_dims) != expected_dims:
        r.fail(f"{system} uses position_dims {list(expected_dims)}", "environment.position_dims")
    if any(a >= b for a, b in zip(lower, upper)):
        r.fail("every workspace lower bound must be below its upper bound", "environment.upper")
    inflation = r.get(envt, "inflation", "environment.inflation", "number", required=False, default=0.0)
    if inflation < 0.0:
        r.fail("inflation must be non-negative", "environment.inflation")
    resolution = r.get(envt, "resolution", "environment.resolution", "number", required=False,
                       default=COLLISION_RESOLUTION)
    if not resolution > 0.0:
        r.fail("resolution must be positive", "environment.resolution")
    obstacles = []
    raw_obs = envt.get("obstacles", [])
    if not isinstance(raw_obs, list):
        r.fail("obstacles must be an array of tables", "environment.obstacles")
    for i, o in enumerate(raw_obs):
        path = f"environment.obstacles[{i}]"
        if not isinstance(o, dict):
            r.fail("obstacle must be a table", path)
        kind = r.get(o, "type", f"{path}.type", "str")
        try:
            if kind == "box":
                extra = set(o) - {"type", "lower", "upper"}
                if extra:
                    r.fail(f"unknown box fields {sorted(extra)}", path)
                lo = r.get(o, "lower", f"{path}.lower", "vector")
                hi = r.get(o, "upper", f"{path}.upper", "vector")
                ob = Box(lo, hi)
            elif kind == "sphere":
                extra = set(o) - {"type", "center", "radius"}
                if extra:
                    r.fail(f"unknown sphere fields {sorted(extra)}", path)
                ob = Sphere(r.get(o, "center", f"{path}.center", "vector"), r.get(o, "radius", f"{path}.radius", "number"))
            else:
                r.fail(f"unknown obstacle type {kind!r}; expected 'box' or 'sphere'", f"{path}.type")
        except ScenarioError:
            raise
        except ValueError as exc:
            r.fail(str(exc), path)
        if ob.dims != len(pos_dims):
            r.fail(f"obstacle needs {len(pos_dims)} coordinates", path)
        obstacles.append(ob)

    goalt = r.get(data, "goal", "goal", "table")
    center = r.get(goalt, "center", "goal.center", "vector")
    if len(center) != nx:
        r.fail(f"goal center needs {nx} entries", "goal.center")
    radius = r.get(goalt, "radius", "goal.radius", "number")
    if not radius > 0.0:
        r.fail("goal radius must be positive", "goal.radius")
    extra = set(goalt) - {"center", "radius"}
    if extra:
        r.fail(f"unknown goal fields {sorted(extra)}", "goal")

    noise = _noise_from(r, data.get("noise", {"kind": "none"}), nx)
    methods = {}
    for sec in METHOD_SECTIONS:
        if sec in data:
            methods[sec] = dict(r.get(data, sec, sec, "table"))

    env = Environment(lower, upper, tuple(obstacles), inflation, GoalRegion(center, radius), tuple(pos_dims), resolution)
    scen = Scenario(name, system, env, tuple(start), noise, cost, params, methods, description)
    try:
        model = scen.build_model()
    except ValueError as exc:
        r.fail(str(exc), "system_params")
    space = model.state_space
    s = np.asarray(start)
    if not (space.contains(s) and is_state_valid(env, space, space.normalize(s))):
        r.fail("start state is outside the bounds or in collision", "start")
    g = np.asarray(center)
    if not (space.contains(g) and is_state_valid(env, space, space.normalize(g))):
        r.fail("goal center must be a valid free state", "goal.center")
    return scen


def _noise_from(r: _Reader, t, nx) -> NoiseModel:
    if not isinstance(t, dict):
        r.fail("noise must be a table", "noise")
    kind = r.get(t, "kind", "noise.kind", "str", required=False, default="none")
    if kind == "none":
        extra = set(t) - {"kind"}
        if extra:
            r.fail(f"unexpected fields {sorted(extra)} for kind 'none'", "noise")
        return ZeroNoise()
    if kind == "gaussian":
        extra = set(t) - {"kind", "sigma", "delta"}
        if extra:
            r.fail(f"unknown noise fields {sorted(extra)}", "noise")
        sigma = r.get(t, "sigma", "noise.sigma", "vector")
        if len(sigma) != nx or min(sigma) < 0.0:
            r.fail(f"sigma needs {nx} non-negative entries", "noise.sigma")
        delta = r.get(t, "delta", "noise.delta", "number")
        if not delta > 0.0:
            r.fail("delta must be positive", "noise.delta")
        return GaussianNoise(sigma, delta)
    if kind == "bias":
        extra = set(t) - {"kind", "offset"}
        if extra:
            r.fail(f"unknown noise fields {sorted(extra)}", "noise")
        off = r.get(t, "offset", "noise.offset", "vector")
        if len(off) != nx:
            r.fail(f"offset needs {nx} entries", "noise.offset")
        return ConstantBias(off)
    r.fail(f"unknown noise kind {kind!r}; expected none, gaussian or bias", "noise.kind")


def loads_scenario(text: str, source: str | None = None) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"TOML syntax error: {exc}", None, getattr(exc, "lineno", None), source) from None
    return scenario_from_dict(data, text, source)


def load_scenario(path) -> Scenario:
    """Load a scenario file; bare names resolve to the bundled pack."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name == str(path):
        p = bundled_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", source=str(path)) from None
    return loads_scenario(text, str(path))


def dumps_scenario(scen: Scenario) -> str:
    return tomli_w.dumps(scen.to_dict())


def save_scenario(scen: Scenario, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_scenario(scen), encoding="utf-8")
    return p


def bundled_names() -> list[str]:
    root = resources.files("kinoaura") / "scenarios"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".toml"))


def bundled_path(name: str) -> Path:
    root = resources.files("kinoaura") / "scenarios"
    p = Path(str(root / f"{name}.toml"))
    if not p.exists():
        raise ScenarioError(f"no bundled scenario named {name!r} (have: {', '.join(bundled_names())})",
                            source=name)
    return p
