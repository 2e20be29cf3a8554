"""Session-oriented HTTP facade over the episode engine.

A live human takes the H role against a solved robot policy. The service
owns the information asymmetry: the chosen recipe lives in the session and
feeds only reward bookkeeping and the human-side payload; the robot policy
code never sees it. Sessions mutate under a per-session lock and every
action submission must echo the turn it answers, so concurrent submissions
are serialized: one wins, the other gets a conflict.

Endpoints (JSON):
    GET  /scenarios
    POST /sessions                {scenario, mode, true_recipe|"random", seed?}
    GET  /sessions/{id}
    POST /sessions/{id}/action    {action, turn}
Errors are {code, message, legal_actions?}.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .beliefs import RationalityModel
from .chefworld import ChefWorld
from .evaluate import Condition, EpisodeRunner
from .scenarios import Scenario, get_scenario
from .solver import (
    SolutionSet,
    literal_robot_policy,
    load_solutions,
    save_solutions,
    solve_cirl,
    solve_full_info_all,
)
from .beliefs import BeliefGrid

API_VERSION = 1


@dataclass
class ScenarioEntry:
    scenario: Scenario
    solutions: SolutionSet


class SolutionsStore:
    """Scenario registry plus solved tables, shared read-only across sessions."""

    def __init__(self):
        self.entries: dict[str, ScenarioEntry] = {}

    def add(self, scenario: Scenario, solutions: SolutionSet) -> None:
        self.entries[scenario.id] = ScenarioEntry(scenario, solutions)

    def get(self, scenario_id: str) -> ScenarioEntry | None:
        return self.entries.get(scenario_id)


def solve_for_service(scenario: Scenario) -> SolutionSet:
    spec = scenario.world.spec
    grid = BeliefGrid.build(scenario.grid_resolution, spec.n_objectives)
    qfn, report = solve_cirl(spec, grid, scenario.model)
    full = solve_full_info_all(spec, scenario.model)
    lit = literal_robot_policy(spec, grid, full, scenario.model)
    sols = SolutionSet(
        spec_name=spec.name, model=scenario.model, grid=grid,
        pragmatic=qfn, full_info=full, literal=lit,
    )
    sols.reports.append(report)
    return sols


def build_default_store(scenario_ids, archive_dir: str | None = None) -> SolutionsStore:
    """Solve (or load from archives) every requested scenario."""
    store = SolutionsStore()
    for sid in scenario_ids:
        scenario = get_scenario(sid)
        archive = Path(archive_dir) / f"{sid}.npz" if archive_dir else None
        if archive and archive.exists():
            sols = load_solutions(archive)
        else:
            sols = solve_for_service(scenario)
            if archive:
                archive.parent.mkdir(parents=True, exist_ok=True)
                save_solutions(sols, archive)
        store.add(scenario, sols)
    return store


@dataclass
class Session:
    id: str
    scenario_id: str
    mode: str
    true_objective: int
    seed: int
    runner: EpisodeRunner
    world: ChefWorld
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def status(self) -> str:
        return self.runner.status


def _error(status: int, code: str, message: str, legal_actions=None) -> JSONResponse:
    body = {"code": code, "message": message}
    if legal_actions is not None:
        body["legal_actions"] = legal_actions
    return JSONResponse(status_code=status, content=body)


def _session_summary(session: Session) -> dict:
    runner = session.runner
    spec = runner.spec
    world = session.world
    legal = runner.legal_human_actions() if runner.active else [0]
    return {
        "api_version": API_VERSION,
        "session_id": session.id,
        "scenario": session.scenario_id,
        "mode": session.mode,
        "model": runner.condition.model.label(),
        "turn": runner.t,
        "horizon": spec.horizon,
        "status": runner.status,
        "state": world.kitchen_labels(runner.state),
        "objectives": list(spec.objectives),
        "belief": [float(b) for b in runner.belief],
        "robot_action": spec.robot_actions[runner.robot_action()] if runner.active else None,
        "legal_human_actions": [spec.human_actions[a] for a in legal] if runner.active else [],
        "true_recipe": spec.objectives[session.true_objective],
    }


def _session_view(session: Session) -> dict:
    runner = session.runner
    spec = runner.spec
    doc = _session_summary(session)
    doc["trace"] = [
        {
            "turn": rec.turn,
            "state": session.world.kitchen_labels(rec.state),
            "robot_action": spec.robot_actions[rec.robot_action],
            "human_action": spec.human_actions[rec.human_action],
            "rewards": rec.rewards,
            "belief": rec.belief,
        }
        for rec in runner.trace.turns
    ]
    return doc


class _Journal:
    def __init__(self, directory: str | None):
        self.dir = Path(directory) if directory else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def append(self, session_id: str, event: dict) -> None:
        if not self.dir:
            return
        with (self.dir / f"{session_id}.jsonl").open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")


def replay_journal(path: str | Path, store: SolutionsStore) -> Session:
    """Rebuild one session from its append-only journal."""
    lines = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
    head = lines[0]
    session = _new_session(
        store,
        head["scenario"],
        head["mode"],
        head["true_objective"],
        head["seed"],
        session_id=head["session_id"],
    )
    for event in lines[1:]:
        session.runner.advance(event["action"])
    return session


def _new_session(
    store: SolutionsStore,
    scenario_id: str,
    mode: str,
    true_objective: int,
    seed: int,
    session_id: str | None = None,
) -> Session:
    entry = store.get(scenario_id)
    if entry is None:
        raise KeyError(scenario_id)
    spec = entry.scenario.world.spec
    robot = "cirl-pragmatic" if mode == "cirl" else "irl-literal"
    human = "pedagogic" if mode == "cirl" else "expert"
    condition = Condition(robot, human, entry.solutions.model, scenario_id=scenario_id)
    runner = EpisodeRunner(condition, entry.solutions, spec, true_objective, seed)
    return Session(
        id=session_id or uuid.uuid4().hex[:12],
        scenario_id=scenario_id,
        mode=mode,
        true_objective=true_objective,
        seed=seed,
        runner=runner,
        world=entry.scenario.world,
    )


def create_app(
    store: SolutionsStore,
    journal_dir: str | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="cirlkit play service")
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    journal = _Journal(journal_dir)
    if journal.dir:
        for path in sorted(journal.dir.glob("*.jsonl")):
            try:
                session = replay_journal(path, store)
                sessions[session.id] = session
            except Exception:
                continue  # partial or stale journal entries are skipped

    @app.get("/scenarios")
    def scenarios():
        return [
            {
                "id": entry.scenario.id,
                "description": entry.scenario.description,
                "recipes": list(entry.scenario.world.spec.objectives),
                "horizon": entry.scenario.horizon,
                "model": entry.solutions.model.label(),
                "modes": ["cirl", "irl"],
            }
            for entry in store.entries.values()
        ]

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        scenario_id = body.get("scenario")
        entry = store.get(scenario_id)
        if entry is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        mode = body.get("mode", "cirl")
        if mode not in ("cirl", "irl"):
            return _error(400, "bad_mode", "mode must be 'cirl' or 'irl'")
        seed = int(body.get("seed", 0))
        spec = entry.scenario.world.spec
        recipe = body.get("true_recipe", "random")
        if recipe == "random":
            rng = np.random.default_rng(seed)
            theta = int(rng.choice(spec.n_objectives, p=spec.objective_prior()))
        else:
            if recipe not in spec.objectives:
                return _error(
                    400, "unknown_recipe",
                    f"no recipe {recipe!r}; choices: {list(spec.objectives)}",
                )
            theta = spec.objectives.index(recipe)
        session = _new_session(store, scenario_id, mode, theta, seed)
        with sessions_lock:
            sessions[session.id] = session
        journal.append(session.id, {
            "session_id": session.id, "scenario": scenario_id, "mode": mode,
            "true_objective": theta, "seed": seed,
        })
        return _session_summary(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with session.lock:
            return _session_view(session)

    @app.post("/sessions/{session_id}/action")
    async def submit_action(session_id: str, request: Request):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        body = await request.json()
        with session.lock:
            runner = session.runner
            spec = runner.spec
            if not runner.active:
                return _error(409, "finished", f"session already {runner.status}")
            if "turn" not in body:
                return _error(400, "missing_turn", "submissions must echo the current turn")
            if int(body["turn"]) != runner.t:
                return _error(
                    409, "turn_mismatch",
                    f"submission for turn {body['turn']} but the session is at turn {runner.t}",
                )
            action = body.get("action")
            legal = runner.legal_human_actions()
            if isinstance(action, str):
                if action not in spec.human_actions:
                    return _error(
                        400, "unknown_action", f"no action {action!r}",
                        legal_actions=[spec.human_actions[a] for a in legal],
                    )
                action = spec.human_actions.index(action)
            if action not in legal:
                return _error(
                    400, "illegal_action",
                    f"{spec.human_actions[action]!r} is not available now",
                    legal_actions=[spec.human_actions[a] for a in legal],
                )
            runner.advance(action)
            journal.append(session.id, {"turn": runner.t - 1, "action": int(action)})
            return _session_summary(session)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
