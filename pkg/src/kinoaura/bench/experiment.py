"""Seeded trial execution and metric aggregation.

Trial ``i`` of an experiment uses seed ``seed_base + i`` for every method, so
the methods see the same offline plan (where one is used) and the same noise
realization. Wall-clock columns are left out of every CSV in deterministic
mode, which makes repeated runs byte-identical.
"""
from __future__ import annotations

import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from kinoaura.aura import AuraConfig, ExecutionReport, offline_plan, run_aura
from kinoaura.baselines import MppiConfig, RrConfig, run_mppi, run_open_loop, run_restart_replanning
from kinoaura.bench.csvio import write_csv
from kinoaura.bench.scenario import Scenario, ScenarioError, load_scenario
from kinoaura.execution import GroundTruthExecutor
from kinoaura.planner import Budget, PlannerConfig
from kinoaura.world import goal_satisfied

METHODS = ("aura", "open_loop", "rr", "mppi", "vanilla")
SWEEP_AXES = ("t_init", "dt")
_SECTIONS = ("aura", "planner", "rr", "mppi")
_TUPLE_FIELDS = {"sigma", "noise_std"}


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run: scenarios x methods x sweep cells x trials."""

    scenarios: tuple
    methods: tuple = ("aura",)
    trials: int = 1
    seed_base: int = 0
    deterministic: bool = True
    #: offline planning budget; overrides the scenario's t_init when set
    budget: Budget | None = None
    #: per-section overrides applied on top of the scenario's own sections
    overrides: dict = field(default_factory=dict)
    #: axis name -> list of values; the grid is their cartesian product
    sweep: dict = field(default_factory=dict)
    name: str = "experiment"

    def __post_init__(self):
        if isinstance(self.scenarios, (str, Path, Scenario)):
            object.__setattr__(self, "scenarios", (self.scenarios,))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        if not self.scenarios:
            raise ValueError("an experiment needs at least one scenario")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for sec in self.overrides:
            if sec not in _SECTIONS:
                raise ValueError(f"unknown override section {sec!r}")
        for axis, values in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
            if not len(values):
                raise ValueError(f"sweep axis {axis!r} is empty")

    def grid(self) -> list[dict]:
        axes = [a for a in SWEEP_AXES if a in self.sweep]
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.sweep[a] for a in axes))]


def load_spec(path) -> ExperimentSpec:
    """Read an experiment spec TOML; scenario paths resolve relative to the file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
        data = tomllib.loads(text)
    except OSError as exc:
        raise ScenarioError(f"cannot read spec: {exc.strerror}", source=str(path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"TOML syntax error: {exc}", None, getattr(exc, "lineno", None), str(path)) from None
    known = {"name", "scenarios", "methods", "trials", "seed_base", "deterministic", "budget", "sweep"} | set(_SECTIONS)
    for key in data:
        if key not in known:
            raise ScenarioError(f"unknown key {key!r}", key, source=str(path))
    if "scenarios" not in data:
        raise ScenarioError("missing required key", "scenarios", source=str(path))
    scen = []
    for s in data["scenarios"]:
        cand = p.parent / s
        scen.append(str(cand) if cand.exists() else s)
    try:
        budget = Budget.parse(data["budget"]) if "budget" in data else None
        return ExperimentSpec(
            scenarios=tuple(scen),
            methods=tuple(data.get("methods", ("aura",))),
            trials=int(data.get("trials", 1)),
            seed_base=int(data.get("seed_base", 0)),
            deterministic=bool(data.get("deterministic", True)),
            budget=budget,
            overrides={k: dict(data[k]) for k in _SECTIONS if k in data},
            sweep={k: list(v) for k, v in data.get("sweep", {}).items()},
            name=str(data.get("name", p.stem)),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), source=str(path)) from None


# ---------------------------------------------------------------------------
# configuration assembly
# ---------------------------------------------------------------------------


def _section(scen: Scenario, overrides: dict, name: str, cls) -> dict:
    params = scen.method_params(name)
    params.update(overrides.get(name, {}))
    allowed = set(cls.__dataclass_fields__) - {"planner", "seed", "deterministic", "cost"}
    out = {}
    for k, v in params.items():
        if k not in allowed:
            raise ScenarioError(f"unknown {name} option", f"{name}.{k}", source=scen.name)
        out[k] = tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
    return out


@dataclass(frozen=True)
class TrialSetup:
    scenario: Scenario
    method: str
    seed: int
    cell: dict
    deterministic: bool
    aura: AuraConfig
    rr: RrConfig
    mppi: MppiConfig


def build_setup(scen: Scenario, method: str, seed: int, cell: dict, spec: ExperimentSpec) -> TrialSetup:
    try:
        pcfg = PlannerConfig(**_section(scen, spec.overrides, "planner", PlannerConfig), seed=seed)
        akw = _section(scen, spec.overrides, "aura", AuraConfig)
        acfg = AuraConfig(planner=pcfg, cost=scen.cost, deterministic=spec.deterministic, seed=seed, **akw)
        if spec.budget is not None:
            t = (spec.budget.seconds if spec.budget.seconds is not None
                 else spec.budget.iterations / acfg.iterations_per_second)
            acfg = replace(acfg, t_init=t)
        if cell:
            acfg = replace(acfg, **cell)
        rr = RrConfig(**_section(scen, spec.overrides, "rr", RrConfig))
        mp = MppiConfig(**_section(scen, spec.overrides, "mppi", MppiConfig), seed=seed)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), source=scen.name) from None
    return TrialSetup(scen, method, seed, dict(cell), spec.deterministic, acfg, rr, mp)


def effective_config(setup: TrialSetup) -> dict:
    d = {"method": setup.method, "seed": setup.seed, "deterministic": setup.deterministic,
         "scenario": setup.scenario.name, "cell": setup.cell}
    if setup.method in ("aura", "open_loop", "vanilla", "rr"):
        d["aura"] = setup.aura.as_dict()
    if setup.method == "rr":
        d["rr"] = {k: getattr(setup.rr, k) for k in setup.rr.__dataclass_fields__}
    if setup.method == "mppi":
        d["mppi"] = {k: getattr(setup.mppi, k) for k in setup.mppi.__dataclass_fields__}
    d["noise"] = setup.scenario.noise.spec()
    return d


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------


def _shared_offline(setup: TrialSetup, model, env):
    """The offline plan AURA would start from for this seed."""
    cfg = setup.aura
    pcfg = replace(cfg.planner, propagation_step=cfg.dt, seed=cfg.seed)
    return offline_plan(pcfg, model, env, setup.scenario.start, cfg.cost, cfg.t_init, cfg.budget,
                        np.random.default_rng([cfg.seed, 1]), cfg.offline_rounds, cfg.deterministic)


def run_trial(setup: TrialSetup) -> ExecutionReport:
    scen = setup.scenario
    model = scen.build_model()
    env = scen.environment
    space = model.state_space
    start = space.normalize(np.asarray(scen.start, dtype=float))
    executor = GroundTruthExecutor(model, scen.noise, setup.seed)
    cfg = setup.aura
    if setup.method == "aura":
        report = run_aura(cfg, model, env, start, executor)
    elif setup.method == "mppi":
        report = run_mppi(setup.mppi, model, env, start, env.goal, executor, scen.cost)
    elif setup.method == "rr":
        report = run_restart_replanning(cfg.planner, model, env, start, executor, setup.rr, scen.cost, cfg.t_init,
                                        cfg.dt, cfg.deterministic, cfg.iterations_per_second, setup.seed,
                                        cfg.offline_rounds)
    else:
        plans, _, spent = _shared_offline(setup, model, env)
        best = next((c for c in plans if c.trajectory.num_steps), None)
        if setup.method == "vanilla":
            report = ExecutionReport("vanilla", start, offline_time=spent, task_time=spent)
            if best is not None:
                report.nominal_plan = report.final_plan = best.trajectory
                report.offline_cost = report.cost = best.nominal_cost
            report.success = best is not None or goal_satisfied(env.goal, space, start)
            report.reason = "plan found" if report.success else "no initial plan"
        elif best is None:
            report = ExecutionReport("open_loop", start, offline_time=spent, task_time=spent)
            report.success = goal_satisfied(env.goal, space, start)
            report.reason = "start in goal" if report.success else "no initial plan"
        else:
            report = run_open_loop(best.trajectory, executor, env, scen.cost, spent)
            report.offline_cost = best.nominal_cost
    report.config = effective_config(setup)
    return report


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

TIMING_COLUMNS = ("t_execute", "t_replan", "t_optimize", "t_sync")


def cycle_header(nx: int, nu: int, deterministic: bool) -> list[str]:
    cols = ["cycle", "source", "sample_index", "duration", "step_error", "best_cost", "num_candidates",
            "replan_iterations", "collided"]
    cols += [f"nominal_{i}" for i in range(nx)] + [f"executed_{i}" for i in range(nx)]
    cols += [f"control_{i}" for i in range(nu)]
    if not deterministic:
        cols += list(TIMING_COLUMNS)
    return cols


def cycle_rows(report: ExecutionReport, deterministic: bool):
    for r in report.records:
        row = [r.cycle, r.source, r.sample_index, r.duration, r.step_error, r.best_cost, len(r.candidate_costs),
               r.replan_iterations, r.collided]
        row += list(r.nominal_state) + list(r.executed_state) + list(r.control)
        if not deterministic:
            row += [getattr(r, c) for c in TIMING_COLUMNS]
        yield row


def write_cycles(path, report: ExecutionReport, nx: int, nu: int, deterministic: bool) -> Path:
    return write_csv(path, cycle_header(nx, nu, deterministic), cycle_rows(report, deterministic))


def trajectory_rows(traj):
    nx, nu = traj.states.shape[1], traj.controls.shape[1]
    header = ["step", "duration"] + [f"x_{i}" for i in range(nx)] + [f"u_{i}" for i in range(nu)]
    rows = []
    for i in range(len(traj.states)):
        if i < traj.num_steps:
            tail = [float(traj.durations[i])], list(traj.controls[i])
        else:
            tail = [None], [None] * nu
        rows.append([i, tail[0][0]] + list(traj.states[i]) + tail[1])
    return header, rows


TRIAL_HEADER = ["scenario", "system", "method", "cell", "t_init", "dt", "trial", "seed", "success", "reason",
                "cost", "offline_cost", "tracking_error", "mean_step_error", "cycles", "restarts", "triggers",
                "offline_time", "task_time"]
METRICS = ("cost", "tracking_error", "mean_step_error", "task_time")
AGGREGATE_HEADER = (["scenario", "system", "method", "cell", "t_init", "dt", "trials", "successes",
                     "success_rate"]
                    + [f"{m}_{s}" for m in METRICS for s in ("mean", "median", "std")])


def _stats(values) -> tuple[float, float, float]:
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if not v.size:
        return math.nan, math.nan, math.nan
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), float(np.median(v)), std


def aggregate(rows: list[dict]) -> list[list]:
    """One row per (scenario, method, cell); statistics over all trials of the group.

    ``std`` is the sample standard deviation (0 for a single trial).
    Non-finite per-trial values are skipped.
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["method"], r["cell"]), []).append(r)
    out = []
    for (scen, method, cell), grp in groups.items():
        n = len(grp)
        succ = sum(1 for r in grp if r["success"])
        row = [scen, grp[0]["system"], method, cell, grp[0]["t_init"], grp[0]["dt"], n, succ, succ / n]
        for m in METRICS:
            row += list(_stats([float(r[m]) for r in grp]))
        out.append(row)
    return out


def tracking_rows(rows: list[dict]) -> list[list]:
    """Mean over trials of the per-trial mean step error, per (system, method)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["system"], r["method"]), []).append(float(r["mean_step_error"]))
    return [[s, m, float(np.mean(v))] for (s, m), v in groups.items()]


def _cell_label(cell: dict) -> str:
    return ";".join(f"{k}={v!r}" for k, v in cell.items()) if cell else "-"


@dataclass
class ExperimentResult:
    trials: list  # dicts keyed by TRIAL_HEADER
    aggregate: list
    reports: list
    out: Path | None

    @property
    def failures(self) -> int:
        return sum(1 for r in self.trials if not r["success"])


def run_experiment(spec: ExperimentSpec, out=None, jobs: int = 1, progress=None) -> ExperimentResult:
    """Run every trial, then write per-trial and aggregate CSVs under ``out``.

    Files: ``cycles/<scenario>/<method>/<cell>/seed_<n>.csv`` (plus a ``.json``
    trace for rendering), ``trials.csv``,
    ``aggregate.csv``, ``tracking_error.csv`` and ``config.json``.
    """
    scenarios = [s if isinstance(s, Scenario) else load_scenario(s) for s in spec.scenarios]
    grid = spec.grid() or [{}]
    setups = []
    for scen in scenarios:
        for method in spec.methods:
            for ci, cell in enumerate(grid):
                for t in range(spec.trials):
                    setups.append((ci, build_setup(scen, method, spec.seed_base + t, cell, spec)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_trial, [s for _, s in setups]))
    else:
        reports = []
        for _, s in setups:
            reports.append(run_trial(s))
            if progress is not None:
                progress(s, reports[-1])
    rows = []
    for (ci, s), rep in zip(setups, reports):
        rows.append({
            "scenario": s.scenario.name, "system": s.scenario.system, "method": s.method,
            "cell": _cell_label(s.cell), "t_init": s.aura.t_init, "dt": s.aura.dt,
            "trial": s.seed - spec.seed_base, "seed": s.seed, "success": rep.success, "reason": rep.reason,
            "cost": rep.cost, "offline_cost": rep.offline_cost, "tracking_error": rep.tracking_error,
            "mean_step_error": rep.mean_step_error, "cycles": len(rep.records), "restarts": rep.restarts,
            "triggers": rep.triggers, "offline_time": rep.offline_time,
            "task_time": rep.task_time, "_cell_index": ci,
        })
    agg = aggregate(rows)
    out_path = None
    if out is not None:
        out_path = Path(out)
        out_path.mkdir(parents=True, exist_ok=True)
        for (ci, s), rep in zip(setups, reports):
            model = s.scenario.build_model()
            p = out_path / "cycles" / s.scenario.name / s.method / f"cell_{ci}" / f"seed_{s.seed}.csv"
            write_cycles(p, rep, model.state_space.dims, model.control_space.dims, spec.deterministic)
            write_json(p.with_suffix(".json"), trace_dict(rep, s.scenario, spec.deterministic))
        write_csv(out_path / "trials.csv", TRIAL_HEADER, [[r[k] for k in TRIAL_HEADER] for r in rows])
        write_csv(out_path / "aggregate.csv", AGGREGATE_HEADER, agg)
        write_csv(out_path / "tracking_error.csv", ["system", "method", "mean_step_error"], tracking_rows(rows))
        config = {
            "name": spec.name, "trials": spec.trials, "seed_base": spec.seed_base,
            "deterministic": spec.deterministic, "methods": list(spec.methods),
            "budget": str(spec.budget) if spec.budget is not None else None,
            "sweep": {k: list(v) for k, v in spec.sweep.items()},
            "overrides": spec.overrides,
            "scenarios": [s.to_dict() for s in scenarios],
            "cells": [{"index": i, "label": _cell_label(c)} for i, c in enumerate(grid)],
            "trial_configs": [effective_config(s) for _, s in setups],
        }
        write_json(out_path / "config.json", config)
    return ExperimentResult(rows, agg, reports, out_path)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def trace_dict(report: ExecutionReport, scenario: Scenario, deterministic: bool = True) -> dict:
    """Everything needed to re-draw a trial: scenario, states and totals."""
    d = {
        "method": report.method,
        "scenario": scenario.to_dict(),
        "start": np.asarray(report.start).tolist(),
        "executed": report.executed_states.tolist(),
        "nominal_plan": report.nominal_plan.states.tolist() if report.nominal_plan is not None else [],
        "final_plan": report.final_plan.states.tolist() if report.final_plan is not None else [],
        "success": report.success,
        "reason": report.reason,
        "cost": report.cost,
        "offline_cost": report.offline_cost,
        "tracking_error": report.tracking_error,
        "mean_step_error": report.mean_step_error,
        "offline_time": report.offline_time,
        "task_time": report.task_time,
        "restarts": report.restarts,
        "triggers": report.triggers,
        "config": report.config,
    }
    if not deterministic:
        d["wall_time"] = report.wall_time
    return d
