"""Command-line entry point: ``kinoaura {plan,run,bench,sweep,render}``.

Exit codes: 0 success, 1 usage error, 2 scenario/input error, 3 at least one
trial failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from kinoaura.bench.csvio import write_csv
from kinoaura.bench.experiment import (
    METHODS, ExperimentSpec, build_setup, load_spec, run_experiment, trajectory_rows, write_json,
)
from kinoaura.bench.render import RenderError, Trace, render_svg
from kinoaura.bench.scenario import ScenarioError, load_scenario, scenario_from_dict
from kinoaura.planner import Budget, PlanningError, dump_tree, plan

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_FAILURES = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _budget(text: str) -> Budget:
    try:
        return Budget.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _methods(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    for n in names:
        if n not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {n!r} (choose from {', '.join(METHODS)})")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kinoaura", description="Kinodynamic planning with online replanning and recovery control.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, method=True, trials=True):
        sp.add_argument("--scenario", action="append", metavar="PATH",
                        help="scenario TOML file or bundled name (repeatable for bench)")
        if method:
            sp.add_argument("--method", type=_methods, default=None, metavar="NAME",
                            help=f"one of {', '.join(METHODS)} (comma-separated for bench/sweep)")
        sp.add_argument("--seed", type=int, default=0, help="seed (base seed when running several trials)")
        if trials:
            sp.add_argument("--trials", type=int, default=None, help="trial count")
        sp.add_argument("--budget", type=_budget, default=None, metavar="{Ns|Niter}",
                        help="offline planning budget, e.g. 5s or 5000iter")
        sp.add_argument("--out", default=None, metavar="DIR", help="output directory")
        sp.add_argument("--deterministic", action="store_true",
                        help="iteration budgets and a virtual clock; outputs are reproducible")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")
        sp.add_argument("--quiet", action="store_true", help="no progress lines")

    sp = sub.add_parser("plan", help="offline planning only: trajectory CSV, tree dump and SVG")
    common(sp, method=False, trials=False)
    sp = sub.add_parser("run", help="one method on one scenario")
    common(sp)
    sp = sub.add_parser("bench", help="run a full experiment spec")
    common(sp)
    sp.add_argument("--spec", default=None, metavar="PATH", help="experiment spec TOML")
    sp = sub.add_parser("sweep", help="grid over T_init and dt")
    common(sp)
    sp.add_argument("--spec", default=None, metavar="PATH", help="experiment spec TOML with a [sweep] table")
    sp.add_argument("--t-init", type=_float_list, default=None, metavar="LIST", help="e.g. 1,5,15")
    sp.add_argument("--dt", type=_float_list, default=None, metavar="LIST", help="e.g. 0.25,0.5")
    sp = sub.add_parser("render", help="draw a trace (from run/bench output) as SVG")
    sp.add_argument("--trace", required=True, metavar="PATH", help="trace .json, or a run output directory")
    sp.add_argument("--scenario", default=None, metavar="PATH", help="override the scenario embedded in the trace")
    sp.add_argument("--out", default=None, metavar="FILE", help="SVG path (default: stdout)")
    return p


def _one_scenario(args):
    if not args.scenario:
        raise UsageError("--scenario is required")
    if len(args.scenario) > 1:
        raise UsageError("this command takes a single --scenario")
    return load_scenario(args.scenario[0])


def _spec_from_args(args, default_method=("aura",), sweep=None) -> ExperimentSpec:
    spec = load_spec(args.spec) if getattr(args, "spec", None) else None
    if spec is None and not args.scenario:
        raise UsageError("--scenario (or --spec) is required")
    kw = {}
    if args.scenario:
        kw["scenarios"] = tuple(args.scenario)
    if args.method:
        kw["methods"] = tuple(args.method)
    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be at least 1")
        kw["trials"] = args.trials
    if args.budget is not None:
        kw["budget"] = args.budget
    if args.deterministic:
        kw["deterministic"] = True
    if sweep:
        kw["sweep"] = sweep
    if spec is None:
        kw.setdefault("methods", tuple(default_method))
        return ExperimentSpec(seed_base=args.seed, **kw)
    if args.seed:
        kw["seed_base"] = args.seed
    return replace(spec, **kw)


def _progress(args):
    if args.quiet:
        return None

    def report(setup, rep):
        print(f"{setup.scenario.name} {setup.method} seed={setup.seed} "
              f"{'ok' if rep.success else 'FAIL'} ({rep.reason}) cost={rep.cost:.4g} "
              f"E={rep.tracking_error:.4g}", file=sys.stderr)
    return report


def _experiment(args, spec: ExperimentSpec) -> int:
    out = args.out or "kinoaura-out"
    res = run_experiment(spec, out, jobs=args.jobs, progress=_progress(args))
    ok = len(res.trials) - res.failures
    print(f"{ok}/{len(res.trials)} trials succeeded; results in {res.out}")
    return EXIT_FAILURES if res.failures else EXIT_OK


def cmd_run(args) -> int:
    if args.method and len(args.method) > 1:
        raise UsageError("run takes a single --method")
    _one_scenario(args)
    return _experiment(args, _spec_from_args(args))


def cmd_bench(args) -> int:
    return _experiment(args, _spec_from_args(args))


def cmd_sweep(args) -> int:
    sweep = {}
    if args.t_init:
        sweep["t_init"] = args.t_init
    if args.dt:
        sweep["dt"] = args.dt
    spec = _spec_from_args(args, sweep=sweep or None)
    if not spec.sweep:
        raise UsageError("sweep needs --t-init and/or --dt (or a spec with a [sweep] table)")
    return _experiment(args, spec)


def cmd_plan(args) -> int:
    scen = _one_scenario(args)
    spec = ExperimentSpec(scenarios=(scen,), methods=("vanilla",), seed_base=args.seed,
                          deterministic=args.deterministic, budget=args.budget)
    setup = build_setup(scen, "vanilla", args.seed, {}, spec)
    cfg = setup.aura
    model = scen.build_model()
    pcfg = replace(cfg.planner, propagation_step=cfg.dt, seed=cfg.seed)
    try:
        plans, tree = plan(pcfg, model, scen.environment, cfg.cost, scen.start, cfg.budget(cfg.t_init),
                           rng=np.random.default_rng([cfg.seed, 1]))
    except PlanningError as exc:
        raise ScenarioError(str(exc), source=scen.name) from None
    out = Path(args.out or "kinoaura-plan")
    out.mkdir(parents=True, exist_ok=True)
    best = next((c for c in plans if c.trajectory.num_steps), None)
    dump_tree(tree, out / "tree.txt")
    summary = {"scenario": scen.name, "seed": args.seed, "budget": str(cfg.budget(cfg.t_init)),
               "found": best is not None, "solutions": len(plans), "tree_size": len(tree),
               "iterations": tree.iterations, "config": cfg.as_dict()}
    trace = Trace(np.zeros((0, model.state_space.dims)))
    if best is not None:
        header, rows = trajectory_rows(best.trajectory)
        write_csv(out / "plan.csv", header, rows)
        summary["cost"] = best.nominal_cost
        trace = Trace(np.zeros((0, model.state_space.dims)), best.trajectory.states)
    write_json(out / "summary.json", summary)
    (out / "plan.svg").write_text(render_svg(scen.environment, trace, model.state_space, scen.name),
                                  encoding="utf-8")
    if best is None:
        print(f"no plan found within {summary['budget']}; tree dump in {out}")
        return EXIT_FAILURES
    print(f"plan cost {best.nominal_cost:.6g}, {best.trajectory.num_steps} steps; results in {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    path = Path(args.trace)
    if path.is_dir():
        found = sorted(path.rglob("seed_*.json"))
        if not found:
            raise ScenarioError("no trace .json files under this directory", source=str(path))
        path = found[0]
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ScenarioError(f"cannot read trace: {exc}", source=str(path)) from None
    if args.scenario:
        scen = load_scenario(args.scenario)
    elif "scenario" in data:
        scen = scenario_from_dict(data["scenario"], source=str(path))
    else:
        raise ScenarioError("trace has no embedded scenario; pass --scenario", source=str(path))
    svg = render_svg(scen.environment, Trace.from_dict(data), scen.build_model().state_space,
                     f"{scen.name} {data.get('method', '')}".strip())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(svg, encoding="utf-8")
    else:
        sys.stdout.write(svg)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "bench": cmd_bench, "sweep": cmd_sweep, "render": cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, RenderError) as exc:
        print(f"kinoaura: scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
