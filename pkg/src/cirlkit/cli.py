"""Command-line entry point.

Subcommands cover the whole pipeline: validate or compile domain files,
solve scenarios, reproduce the benchmark grid, simulate or replay episodes,
play interactively in the terminal, and serve the HTTP play service.

All randomness is seeded through the run configuration (default seed 0)
and every artifact embeds the configuration hash, so re-running a command
with the same inputs reproduces identical files. Wall-clock timings are
printed to the console but kept out of artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .beliefs import BeliefGrid, RationalityModel, boltzmann, rational
from .chefworld import ChefWorld, load_factored, save_factored
from .evaluate import (
    Condition,
    expected_value_exact,
    monte_carlo_value,
    run_benchmark,
    simulate_episode,
)
from .game import load_game, save_game, validate_game
from .scenarios import SCENARIOS, Scenario, get_scenario
from .solver import (
    SolutionSet,
    literal_robot_policy,
    load_solutions,
    save_solutions,
    solve_cirl,
    solve_full_info_all,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

OUTPUT_DIR_ENV = "CIRLKIT_OUT_DIR"


@dataclass
class RunConfig:
    """Resolved settings for one command; echoed into every artifact."""

    command: str
    scenario: str | None = None
    domain: str | None = None
    factored: bool = False
    mode: str = "cirl"
    model: str = "rational"
    beta: float | None = None
    grid_resolution: int | None = None
    horizon: int | None = None
    discount: float | None = None
    seed: int = 0
    tol_fp: float = 1e-8
    max_iter: int = 200
    damping: float = 0.5
    out_dir: str = "out"
    true_recipe: str | None = None
    betas: list | None = None
    include_rational: bool = True
    mc_episodes: int = 0

    def hash(self) -> str:
        doc = asdict(self)
        doc.pop("out_dir", None)  # where artifacts land does not change them
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str, command: str) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(command=command, **{k: v for k, v in doc.items() if k != "command"})


def _resolve_model(config: RunConfig) -> RationalityModel:
    if config.beta is not None:
        return boltzmann(config.beta)
    if config.model == "rational":
        return rational()
    if config.model.startswith("beta="):
        return boltzmann(float(config.model.split("=", 1)[1]))
    raise ValueError(f"unknown model {config.model!r}; use 'rational' or --beta")


def _resolve_world(config: RunConfig) -> tuple[Scenario | None, ChefWorld | None, object]:
    """Returns (scenario, world, spec); world is None for flat domain files."""
    if config.scenario:
        scenario = get_scenario(config.scenario)
        world = scenario.world
        spec = world.spec
        if config.horizon or config.discount:
            from .chefworld import build_chefworld

            world = build_chefworld(
                world.ingredients,
                world.recipes,
                horizon=config.horizon or spec.horizon,
                discount=config.discount if config.discount is not None else spec.discount,
                recipe_prior=spec.objective_prior(),
                initial={
                    ing.name: ing.states[world.initial_kitchen[i]]
                    for i, ing in enumerate(world.ingredients)
                },
                name=spec.name,
            )
            scenario = Scenario(
                id=scenario.id, description=scenario.description, world=world,
                grid_resolution=scenario.grid_resolution, model=scenario.model,
            )
        return scenario, world, world.spec
    if not config.domain:
        raise ValueError("either --scenario or --domain is required")
    if config.factored:
        world = load_factored(config.domain)
        return None, world, world.spec
    return None, None, load_game(config.domain)


def _out_dir(config: RunConfig) -> Path:
    out = Path(os.environ.get(OUTPUT_DIR_ENV, config.out_dir))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_bundle(spec, scenario, config: RunConfig, model: RationalityModel) -> SolutionSet:
    m = config.grid_resolution or (scenario.grid_resolution if scenario else 10)
    grid = BeliefGrid.build(m, spec.n_objectives)
    echo = asdict(config)
    echo.pop("out_dir", None)
    sols = SolutionSet(
        spec_name=spec.name,
        model=model,
        grid=grid,
        config={"config": echo, "config_hash": config.hash()},
    )
    if config.mode in ("cirl", "both"):
        qfn, report = solve_cirl(
            spec, grid, model,
            tol_fp=config.tol_fp, max_iter=config.max_iter, damping=config.damping,
        )
        sols.pragmatic = qfn
        sols.reports.append(report)
        print(
            f"pragmatic solve: converged={report.converged} "
            f"({report.wall_clock_seconds:.1f}s)", file=sys.stderr,
        )
    if config.mode in ("irl", "both"):
        sols.full_info = solve_full_info_all(spec, model)
        sols.literal = literal_robot_policy(spec, grid, sols.full_info, model)
        print("literal solve: done", file=sys.stderr)
    return sols


def cmd_validate(args) -> int:
    if args.factored:
        try:
            world = load_factored(args.domain)
        except Exception as exc:
            print(f"invalid factored domain: {exc}")
            return EXIT_INVALID
        spec = world.spec
    else:
        try:
            spec = load_game(args.domain)
        except Exception as exc:
            print(f"unreadable domain file: {exc}")
            return EXIT_INVALID
    violations = validate_game(spec)
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print(f"ok: {spec.name} ({spec.n_states} states, {spec.n_objectives} objectives)")
    return EXIT_OK


def cmd_compile(args) -> int:
    world = load_factored(args.domain)
    violations = validate_game(world.spec)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    save_game(world.spec, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _make_config(args, "solve")
    scenario, _world, spec = _resolve_world(config)
    violations = validate_game(spec)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    model = _resolve_model(config)
    sols = _solve_bundle(spec, scenario, config, model)
    out = _out_dir(config)
    name = f"{spec.name}-{config.mode}-{model.label().replace('(', '-').rstrip(')')}"
    archive = out / f"{name}.npz"
    save_solutions(sols, archive)
    report_doc = {
        "config": asdict(config),
        "config_hash": config.hash(),
        "reports": [r.summary() for r in sols.reports],
    }
    (out / f"{name}-report.json").write_text(json.dumps(report_doc, indent=2, sort_keys=True))
    print(f"wrote {archive}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = _make_config(args, "benchmark")
    scenario, _world, spec = _resolve_world(config)
    betas = config.betas if config.betas is not None else [1.0, 2.5, 5.0]
    models: dict[str, RationalityModel] = {}
    for b in betas:
        models[f"boltzmann(beta={b:g})"] = boltzmann(float(b))
    if config.include_rational:
        models["rational"] = rational()
    solutions = {}
    base_mode = config.mode
    for label, model in models.items():
        run = RunConfig(**{**asdict(config), "mode": "both", "model": label})
        solutions[label] = _solve_bundle(spec, scenario, run, model)
    config.mode = base_mode
    report = run_benchmark(
        spec,
        solutions,
        scenario_id=config.scenario or spec.name,
        config_hash=config.hash(),
        grid_resolution=config.grid_resolution or (scenario.grid_resolution if scenario else 10),
    )
    if config.mc_episodes:
        checks = {}
        for label, sols in solutions.items():
            for robot, human in (("cirl-pragmatic", "pedagogic"), ("irl-literal", "expert")):
                cond = Condition(robot, human, sols.model)
                mc = monte_carlo_value(cond, sols, spec, config.mc_episodes, seed=config.seed)
                checks[f"{robot}/{label}"] = {
                    "estimate": mc["aggregate"],
                    "std_error": mc["aggregate_std_error"],
                }
        report.solver_flags["monte_carlo"] = checks
    out = _out_dir(config)
    (out / "benchmark.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    (out / "benchmark.txt").write_text(report.to_text() + "\n")
    print(report.to_text())
    problems = report.check_orderings()
    for p in problems:
        print(f"ordering violation: {p}")
    if args.assert_ordering and problems:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _make_config(args, "simulate")
    scenario, world, spec = _resolve_world(config)
    model = scenario.model if (scenario and config.beta is None and config.model == "rational") else _resolve_model(config)
    run = RunConfig(**{**asdict(config), "mode": "both"})
    sols = _solve_bundle(spec, scenario, run, model)
    theta = _resolve_recipe(config, spec)
    robot = "cirl-pragmatic" if config.mode == "cirl" else "irl-literal"
    human = "pedagogic" if config.mode == "cirl" else "expert"
    cond = Condition(robot, human, model, scenario_id=config.scenario or spec.name)
    script = [spec.human_actions.index(a.strip()) for a in args.script.split(",")] if args.script else None
    trace = simulate_episode(cond, sols, spec, theta, seed=config.seed, script=script)
    out = _out_dir(config)
    path = out / f"trace-{spec.name}-{config.mode}-{spec.objectives[theta]}-{config.seed}.jsonl"
    path.write_text(f"# config_hash={config.hash()}\n" + trace.to_jsonl())
    _print_trace(trace, spec, world)
    print(f"wrote {path}")
    return EXIT_OK


def _print_trace(trace, spec, world: ChefWorld | None) -> None:
    print(f"condition: {trace.condition}  true objective: {spec.objectives[trace.true_objective]}")
    for rec in trace.turns:
        state = spec.states[rec.state]
        belief = ", ".join(
            f"{name}={p:.3f}" for name, p in zip(spec.objectives, rec.belief)
        )
        print(
            f"turn {rec.turn}: state [{state}] robot {spec.robot_actions[rec.robot_action]!r} "
            f"human {spec.human_actions[rec.human_action]!r} -> belief {belief}"
        )
    print(f"outcome: {trace.status}")


def cmd_play(args) -> int:
    config = _make_config(args, "play")
    scenario, world, spec = _resolve_world(config)
    model = scenario.model if (scenario and config.beta is None and config.model == "rational") else _resolve_model(config)
    run = RunConfig(**{**asdict(config), "mode": "both"})
    sols = _solve_bundle(spec, scenario, run, model)
    theta = _resolve_recipe(config, spec)
    robot = "cirl-pragmatic" if config.mode == "cirl" else "irl-literal"
    human = "pedagogic" if config.mode == "cirl" else "expert"
    cond = Condition(robot, human, model, scenario_id=config.scenario or spec.name)

    from .evaluate import EpisodeRunner

    runner = EpisodeRunner(cond, sols, spec, theta, seed=config.seed)
    print(f"you are the human; your goal: {spec.objectives[theta]!r} (the robot does not know)")
    while runner.active:
        state = spec.states[runner.state]
        belief = ", ".join(
            f"{name}={p:.3f}" for name, p in zip(spec.objectives, runner.belief)
        )
        print(f"\nturn {runner.t}  state [{state}]  robot belief: {belief}")
        print(f"robot will: {spec.robot_actions[runner.robot_action()]!r}")
        legal = runner.legal_human_actions()
        for i, a in enumerate(legal):
            print(f"  [{i}] {spec.human_actions[a]}")
        try:
            line = input("your action> ").strip()
        except EOFError:
            print("\nsession aborted; saving partial trace")
            break
        choice = _parse_action(line, legal, spec)
        if choice is None:
            print("unrecognized or illegal action; try again")
            continue
        rec = runner.advance(choice)
        if rec.rewards[theta] > 0:
            print("recipe completed!")
    print(f"outcome: {runner.status}")
    out = _out_dir(config)
    path = out / f"play-{spec.name}-{config.mode}-{config.seed}.jsonl"
    path.write_text(f"# config_hash={config.hash()}\n" + runner.trace.to_jsonl())
    print(f"wrote {path}")
    return EXIT_OK


def _parse_action(line: str, legal: list, spec) -> int | None:
    if not line:
        return None
    if line.isdigit():
        idx = int(line)
        if 0 <= idx < len(legal):
            return legal[idx]
        if idx in legal:
            return idx
        return None
    try:
        action = spec.human_actions.index(line)
    except ValueError:
        return None
    return action if action in legal else None


def _resolve_recipe(config: RunConfig, spec) -> int:
    if config.true_recipe in (None, "random"):
        rng = np.random.default_rng(config.seed)
        return int(rng.choice(spec.n_objectives, p=spec.objective_prior()))
    try:
        return spec.objectives.index(config.true_recipe)
    except ValueError:
        raise ValueError(
            f"unknown recipe {config.true_recipe!r}; choices: {list(spec.objectives)}"
        )


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_default_store, create_app

    store = build_default_store(
        scenario_ids=args.scenarios.split(",") if args.scenarios else ["soup-salad"],
        archive_dir=args.archive_dir,
    )
    app = create_app(store, journal_dir=args.journal, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _make_config(args, command: str) -> RunConfig:
    if getattr(args, "config", None):
        config = RunConfig.from_file(args.config, command)
    else:
        config = RunConfig(command=command)
    for field in fields(RunConfig):
        if field.name == "command":
            continue
        if hasattr(args, field.name):
            value = getattr(args, field.name)
            if value is not None:
                setattr(config, field.name, value)
    return config


def _add_common(parser: argparse.ArgumentParser, solver: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--scenario", choices=list(SCENARIOS), help="built-in scenario id")
    parser.add_argument("--domain", help="domain file (flat game JSON, or factored with --factored)")
    parser.add_argument("--factored", action="store_true", help="treat --domain as a factored file")
    parser.add_argument("--grid-m", dest="grid_resolution", type=int, help="belief grid resolution")
    parser.add_argument("--horizon", type=int, help="override the domain horizon")
    parser.add_argument("--discount", type=float, help="override the discount factor")
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--out", dest="out_dir", help="output directory (default ./out; "
                        f"env {OUTPUT_DIR_ENV} overrides)")
    if solver:
        parser.add_argument("--beta", type=float, help="Boltzmann rationality coefficient")
        parser.add_argument("--rational", dest="model", action="store_const", const="rational",
                            help="use the rational human model (default)")
        parser.add_argument("--tol", dest="tol_fp", type=float, help="fixed-point tolerance")
        parser.add_argument("--max-iter", dest="max_iter", type=int, help="fixed-point iteration cap")
        parser.add_argument("--damping", type=float, help="fixed-point damping factor")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cirlkit",
        description="Solve, simulate and benchmark cooperative hidden-objective games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a domain file against the game invariants")
    p.add_argument("domain")
    p.add_argument("--factored", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="compile a factored domain to the flat game format")
    p.add_argument("domain")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("solve", help="solve a scenario and write a solution archive")
    _add_common(p)
    p.add_argument("--mode", choices=["cirl", "irl", "both"], default="both")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("benchmark", help="expected-value grid across rationality models")
    _add_common(p)
    p.add_argument("--betas", type=lambda s: [float(v) for v in s.split(",")],
                   help="comma-separated Boltzmann coefficients (default 1,2.5,5)")
    p.add_argument("--no-rational", dest="include_rational", action="store_false")
    p.add_argument("--mc-episodes", dest="mc_episodes", type=int,
                   help="also cross-check each cell with this many sampled episodes")
    p.add_argument("--assert-ordering", action="store_true",
                   help="exit non-zero if the expected qualitative ordering is violated")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("simulate", help="roll out one episode and write its trace")
    _add_common(p)
    p.add_argument("--mode", choices=["cirl", "irl"], default="cirl")
    p.add_argument("--true-recipe", dest="true_recipe", help="objective name or 'random'")
    p.add_argument("--script", help="comma-separated human actions to replay")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("play", help="take the human role in the terminal")
    _add_common(p)
    p.add_argument("--mode", choices=["cirl", "irl"], default="cirl")
    p.add_argument("--true-recipe", dest="true_recipe", help="objective name or 'random'")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("serve", help="run the HTTP play service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--scenarios", help="comma-separated scenario ids (default soup-salad)")
    p.add_argument("--archive-dir", help="directory of pre-solved .npz archives")
    p.add_argument("--static", help="directory of web client assets to serve at /")
    p.add_argument("--journal", help="directory for append-only session journals")
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failure
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
