"""Two-player collaboration game with a hidden objective.

A game couples a finite state space with asymmetric human/robot action
sets, a joint transition measure, an objective-indexed reward, a prior
over initial state and objective, a discount factor and a finite horizon.
The robot never observes the objective; everything it learns comes from
watching the human act.

Within a turn the robot's action is revealed before the human commits to
hers (see TURN_ORDER); both the solver and every simulator honor that
order. Specs are immutable after construction and safe to share across
threads; `step` takes its random generator as an argument so parallel
rollouts own independent streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GameSpec",
    "TurnStructure",
    "TURN_ORDER",
    "Violation",
    "validate_game",
    "step",
    "legal_actions",
    "save_game",
    "load_game",
]

GAME_FORMAT_VERSION = 1
_TOL = 1e-9


@dataclass(frozen=True)
class TurnStructure:
    """Within-turn information order: the robot reveals its action first."""

    robot_reveals_first: bool = True


TURN_ORDER = TurnStructure()


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Declarative form of the full game tuple.

    Arrays:
      transition  (S, AH, AR, S)  row-stochastic over the last axis
      reward      (S, AH, AR, K)  one reward per objective
      prior       (S, K)          joint prior over initial state and objective
      human_legal (S, AH) bool    which human actions are available per state
      robot_legal (S, AR) bool    which robot actions are available per state

    Illegal joint actions must be encoded as self-loops with zero reward;
    solvers and simulators only ever range over legal actions.
    """

    name: str
    states: tuple[str, ...]
    human_actions: tuple[str, ...]
    robot_actions: tuple[str, ...]
    transition: np.ndarray
    objectives: tuple[str, ...]
    reward: np.ndarray
    prior: np.ndarray
    discount: float
    horizon: int
    human_legal: np.ndarray
    robot_legal: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for attr in ("transition", "reward", "prior"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, attr), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        for attr in ("human_legal", "robot_legal"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, attr), dtype=bool))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        for attr in ("states", "human_actions", "robot_actions", "objectives"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_human_actions(self) -> int:
        return len(self.human_actions)

    @property
    def n_robot_actions(self) -> int:
        return len(self.robot_actions)

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    def objective_prior(self) -> np.ndarray:
        """Marginal of the prior over objectives."""
        return self.prior.sum(axis=0)

    def initial_state(self) -> int:
        """Most probable initial state (unique for all built-in domains)."""
        return int(np.argmax(self.prior.sum(axis=1)))

    def is_deterministic(self) -> bool:
        return bool((self.transition.max(axis=-1) >= 1.0 - _TOL).all())

    def next_state_table(self) -> np.ndarray:
        """(S, AH, AR) successor table; only valid for deterministic games."""
        if not self.is_deterministic():
            raise ValueError("game has stochastic transitions")
        return self.transition.argmax(axis=-1)


def validate_game(spec: GameSpec) -> list[Violation]:
    """Every invariant violation with a human-readable location.

    Violations are data, not failures: an empty list means the game is valid.
    """
    v: list[Violation] = []
    S, AH, AR, K = spec.n_states, spec.n_human_actions, spec.n_robot_actions, spec.n_objectives
    for label, n in (("states", S), ("human_actions", AH), ("robot_actions", AR), ("objectives", K)):
        if n == 0:
            v.append(Violation(label, "index set is empty"))
    if v:
        return v

    shapes = {
        "transition": (spec.transition, (S, AH, AR, S)),
        "reward": (spec.reward, (S, AH, AR, K)),
        "prior": (spec.prior, (S, K)),
        "human_legal": (spec.human_legal, (S, AH)),
        "robot_legal": (spec.robot_legal, (S, AR)),
    }
    for name, (arr, want) in shapes.items():
        if arr.shape != want:
            v.append(Violation(name, f"shape {arr.shape} != expected {want}"))
    if v:
        return v

    if (spec.transition < 0).any():
        v.append(Violation("transition", "negative entries"))
    sums = spec.transition.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > _TOL)
    for s, ah, ar in bad[:20]:
        v.append(
            Violation(
                f"transition[{spec.states[s]}, {spec.human_actions[ah]}, {spec.robot_actions[ar]}]",
                f"row sums to {sums[s, ah, ar]:.12g}, expected 1",
            )
        )
    if (spec.prior < 0).any():
        v.append(Violation("prior", "negative entries"))
    total = spec.prior.sum()
    if abs(total - 1.0) > _TOL:
        v.append(Violation("prior", f"sums to {total:.12g}, expected 1"))
    if not 0.0 <= spec.discount <= 1.0:
        v.append(Violation("discount", f"{spec.discount} outside [0, 1]"))
    if spec.horizon < 1:
        v.append(Violation("horizon", f"{spec.horizon} < 1"))
    for s in range(S):
        if not spec.human_legal[s].any():
            v.append(Violation(f"human_legal[{spec.states[s]}]", "no legal action"))
        if not spec.robot_legal[s].any():
            v.append(Violation(f"robot_legal[{spec.states[s]}]", "no legal action"))
    if not np.isfinite(spec.reward).all():
        v.append(Violation("reward", "non-finite entries"))
    return v


def step(
    spec: GameSpec, s: int, a_h: int, a_r: int, rng: np.random.Generator
) -> tuple[int, np.ndarray]:
    """Sample a successor state and return the per-objective reward vector.

    The reward is returned for every objective so the same call serves both
    an omniscient evaluator and a robot that does not know the objective.
    It is a pure function of (s, a_h, a_r); only the successor is random.
    """
    if not 0 <= s < spec.n_states:
        raise IndexError(f"state {s} out of range")
    if not 0 <= a_h < spec.n_human_actions:
        raise IndexError(f"human action {a_h} out of range")
    if not 0 <= a_r < spec.n_robot_actions:
        raise IndexError(f"robot action {a_r} out of range")
    row = spec.transition[s, a_h, a_r]
    top = int(row.argmax())
    if row[top] >= 1.0 - _TOL:
        s_next = top
    else:
        s_next = int(rng.choice(spec.n_states, p=row))
    return s_next, spec.reward[s, a_h, a_r].copy()


def legal_actions(spec: GameSpec, s: int, actor: str) -> list[int]:
    """Indices of the actions available to `actor` ("H" or "R") in state s."""
    if not 0 <= s < spec.n_states:
        raise IndexError(f"state {s} out of range")
    if actor == "H":
        mask = spec.human_legal[s]
    elif actor == "R":
        mask = spec.robot_legal[s]
    else:
        raise ValueError(f"actor must be 'H' or 'R', got {actor!r}")
    return [int(i) for i in np.flatnonzero(mask)]


def save_game(spec: GameSpec, path: str | Path) -> None:
    doc = {
        "format_version": GAME_FORMAT_VERSION,
        "name": spec.name,
        "states": list(spec.states),
        "human_actions": list(spec.human_actions),
        "robot_actions": list(spec.robot_actions),
        "objectives": list(spec.objectives),
        "transition": spec.transition.tolist(),
        "reward": spec.reward.tolist(),
        "prior": spec.prior.tolist(),
        "discount": spec.discount,
        "horizon": spec.horizon,
        "human_legal": spec.human_legal.astype(int).tolist(),
        "robot_legal": spec.robot_legal.astype(int).tolist(),
        "metadata": spec.metadata,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_game(path: str | Path) -> GameSpec:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != GAME_FORMAT_VERSION:
        raise ValueError(f"unsupported game format version: {version!r}")
    return GameSpec(
        name=doc.get("name", "game"),
        states=tuple(doc["states"]),
        human_actions=tuple(doc["human_actions"]),
        robot_actions=tuple(doc["robot_actions"]),
        transition=np.array(doc["transition"], dtype=float),
        objectives=tuple(doc["objectives"]),
        reward=np.array(doc["reward"], dtype=float),
        prior=np.array(doc["prior"], dtype=float),
        discount=float(doc["discount"]),
        horizon=int(doc["horizon"]),
        human_legal=np.array(doc["human_legal"], dtype=bool),
        robot_legal=np.array(doc["robot_legal"], dtype=bool),
        metadata=doc.get("metadata", {}),
    )
