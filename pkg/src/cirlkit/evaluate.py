"""Rollouts, exact expected values and the benchmark grid.

An episode pairs a robot (pragmatic equilibrium or literal baseline) with a
simulated human (pedagogic, sampling from the equilibrium values, or
expert, sampling from the full-information values). The robot's belief is
maintained continuously by exact Bayes during play and projected to the
grid only for policy lookups, so projection error never compounds across
turns.

Expected values come two ways: exact forward enumeration over the human's
action tree (the only stochasticity in deterministic domains) and
vectorized Monte Carlo, used both as a cross-check and as the fallback for
stochastic transitions. Enumeration subtrees and episodes are independent,
and all aggregation uses numpy's pairwise summation, so results do not
depend on batching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .beliefs import RationalityModel, bayes_update, policy_over_rows
from .game import GameSpec, step
from .solver import SolutionSet, batch_best_response, expert_policy_tables

__all__ = [
    "ROBOT_KINDS",
    "HUMAN_KINDS",
    "Condition",
    "TurnRecord",
    "EpisodeTrace",
    "EpisodeRunner",
    "simulate_episode",
    "expected_value_exact",
    "monte_carlo_value",
    "run_benchmark",
    "BenchmarkReport",
    "StochasticTransitionsError",
]

ROBOT_KINDS = ("cirl-pragmatic", "irl-literal")
HUMAN_KINDS = ("pedagogic", "expert")


class StochasticTransitionsError(ValueError):
    """Exact enumeration needs deterministic transitions; use Monte Carlo."""


@dataclass(frozen=True)
class Condition:
    """A robot kind paired with a simulated-human kind under one rationality model.

    The standard pairings are (cirl-pragmatic, pedagogic) and
    (irl-literal, expert); other combinations run fine but are labeled
    non-standard in reports.
    """

    robot: str
    human: str
    model: RationalityModel
    scenario_id: str = ""

    def __post_init__(self) -> None:
        if self.robot not in ROBOT_KINDS:
            raise ValueError(f"robot must be one of {ROBOT_KINDS}")
        if self.human not in HUMAN_KINDS:
            raise ValueError(f"human must be one of {HUMAN_KINDS}")

    @property
    def is_standard_pairing(self) -> bool:
        return (self.robot, self.human) in (
            ("cirl-pragmatic", "pedagogic"),
            ("irl-literal", "expert"),
        )

    def label(self) -> str:
        return f"{self.robot}/{self.human}/{self.model.label()}"


@dataclass
class TurnRecord:
    turn: int
    state: int
    robot_action: int
    human_action: int
    rewards: list
    belief: list  # robot belief after observing the human's action

    def to_dict(self) -> dict:
        return {
            "turn": self.turn,
            "state": self.state,
            "robot_action": self.robot_action,
            "human_action": self.human_action,
            "rewards": self.rewards,
            "belief": self.belief,
        }


@dataclass
class EpisodeTrace:
    condition: str
    true_objective: int
    seed: int
    turns: list = field(default_factory=list)
    final_state: int = 0
    success: bool = False
    status: str = "active"  # active | succeeded | failed-horizon

    @property
    def total_reward(self) -> float:
        return sum(rec.rewards[self.true_objective] for rec in self.turns)

    def to_json(self) -> str:
        doc = {
            "condition": self.condition,
            "true_objective": self.true_objective,
            "seed": self.seed,
            "final_state": self.final_state,
            "success": self.success,
            "status": self.status,
            "turns": [rec.to_dict() for rec in self.turns],
        }
        return json.dumps(doc, sort_keys=True)

    def to_jsonl(self) -> str:
        """One line per turn plus a trailing episode summary line."""
        lines = [json.dumps(rec.to_dict(), sort_keys=True) for rec in self.turns]
        lines.append(
            json.dumps(
                {
                    "condition": self.condition,
                    "true_objective": self.true_objective,
                    "seed": self.seed,
                    "final_state": self.final_state,
                    "success": self.success,
                    "status": self.status,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"


class _BatchDrivers:
    """Vectorized robot action / likelihood / human distribution over node batches.

    All lookups project the continuous beliefs to the solution grid; the
    pragmatic robot then weighs its candidate actions with the exact
    belief, matching the solver's internal continuation arithmetic.
    """

    def __init__(self, condition: Condition, solutions: SolutionSet, spec: GameSpec):
        self.condition = condition
        self.solutions = solutions
        self.spec = spec
        self.model = solutions.model
        if condition.robot == "cirl-pragmatic" or condition.human == "pedagogic":
            if solutions.pragmatic is None:
                raise ValueError(f"condition {condition.label()} needs a pragmatic table")
        if condition.robot == "irl-literal" and solutions.literal is None:
            raise ValueError(f"condition {condition.label()} needs a literal table")
        if condition.robot == "irl-literal" or condition.human == "expert":
            if solutions.full_info is None:
                raise ValueError(f"condition {condition.label()} needs full-information tables")
        self.pi_expert = (
            expert_policy_tables(solutions.full_info, spec, solutions.model)
            if solutions.full_info is not None
            else None
        )

    def robot_and_likelihood(self, t: int, s: np.ndarray, b: np.ndarray):
        """Robot actions and belief-update likelihoods for a batch of nodes.

        Returns (a_r (n,), likelihood (n, AH, K)).
        """
        spec = self.spec
        if self.condition.robot == "cirl-pragmatic":
            qfn = self.solutions.pragmatic
            g = qfn.grid.project_batch(b)
            q_cells = qfn.values[t, s, g]
            a_r, pi = batch_best_response(
                q_cells, b, self.model, spec.human_legal[s], spec.robot_legal[s]
            )
            like = pi[np.arange(s.size), a_r]  # (n, AH, K)
            return a_r, like
        lit = self.solutions.literal
        g = lit.grid.project_batch(b)
        a_r = lit.greedy[t, s, g]
        return a_r, self.pi_expert[t, s, a_r]

    def human_distribution(self, t, s, a_r, b, theta, likelihood=None) -> np.ndarray:
        """(n, AH) sampling distribution of the simulated human."""
        if self.condition.human == "expert":
            return self.pi_expert[t, s, a_r, :, theta]
        if self.condition.robot == "cirl-pragmatic" and likelihood is not None:
            return likelihood[:, :, theta]
        qfn = self.solutions.pragmatic
        g = qfn.grid.project_batch(b)
        q = np.moveaxis(qfn.values[t, s, g], 1, 2)[np.arange(s.size), a_r]  # (n, AH, K)
        return policy_over_rows(q, self.model, self.spec.human_legal[s])[:, :, theta]


class EpisodeRunner:
    """Turn-by-turn episode engine shared by the simulator and the play service.

    The robot's next action is always pre-computed (it is revealed before
    the human commits); `advance` applies one joint turn. The random
    generator is consumed only by stochastic state transitions, so
    replaying a recorded action sequence reproduces a session exactly.
    """

    def __init__(
        self,
        condition: Condition,
        solutions: SolutionSet,
        spec: GameSpec,
        true_objective: int,
        seed: int,
    ):
        if not 0 <= true_objective < spec.n_objectives:
            raise IndexError(f"objective {true_objective} out of range")
        self.condition = condition
        self.spec = spec
        self.true_objective = true_objective
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.drivers = _BatchDrivers(condition, solutions, spec)
        self.t = 0
        self.state = spec.initial_state()
        prior_row = spec.prior[self.state]
        self.belief = prior_row / prior_row.sum()
        self.trace = EpisodeTrace(
            condition=condition.label(), true_objective=true_objective, seed=seed
        )
        self.status = "active"
        self._proposed: tuple | None = None

    @property
    def active(self) -> bool:
        return self.status == "active"

    def _propose(self) -> tuple:
        if self._proposed is None:
            a_r, like = self.drivers.robot_and_likelihood(
                self.t, np.array([self.state]), self.belief[None, :]
            )
            self._proposed = (int(a_r[0]), like[0])
        return self._proposed

    def robot_action(self) -> int:
        return self._propose()[0]

    def legal_human_actions(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.spec.human_legal[self.state])]

    def human_distribution(self) -> np.ndarray:
        a_r, _ = self._propose()
        return self.drivers.human_distribution(
            self.t,
            np.array([self.state]),
            np.array([a_r]),
            self.belief[None, :],
            self.true_objective,
            likelihood=self._proposed[1][None],
        )[0]

    def advance(self, a_h: int) -> TurnRecord:
        if not self.active:
            raise RuntimeError("episode already finished")
        if not self.spec.human_legal[self.state, a_h]:
            raise ValueError(f"human action {a_h} is illegal in state {self.state}")
        a_r, likelihood = self._propose()
        self.belief = bayes_update(self.belief, likelihood[a_h])
        s_next, rewards = step(self.spec, self.state, a_h, a_r, self.rng)
        record = TurnRecord(
            turn=self.t,
            state=self.state,
            robot_action=a_r,
            human_action=a_h,
            rewards=[float(r) for r in rewards],
            belief=[float(b) for b in self.belief],
        )
        self.trace.turns.append(record)
        self.state = s_next
        self.t += 1
        self._proposed = None
        if rewards[self.true_objective] > 0.0:
            self.status = "succeeded"
        elif self.t >= self.spec.horizon:
            self.status = "failed-horizon"
        self.trace.final_state = self.state
        self.trace.success = self.status == "succeeded"
        self.trace.status = self.status
        return record


def simulate_episode(
    condition: Condition,
    solutions: SolutionSet,
    spec: GameSpec,
    true_objective: int,
    seed: int,
    script: list | None = None,
) -> EpisodeTrace:
    """Roll out one episode; fully reproducible from the seed.

    With `script` the human replays the given action sequence instead of
    sampling (missing entries, and scripted actions that are illegal in the
    current state because the robots diverged, fall back to wait); this is
    how one human action sequence is replayed against different robots.
    """
    runner = EpisodeRunner(condition, solutions, spec, true_objective, seed)
    while runner.active:
        if script is not None:
            a_h = script[runner.t] if runner.t < len(script) else 0
            if not spec.human_legal[runner.state, a_h]:
                a_h = 0
        else:
            dist = runner.human_distribution()
            a_h = int(runner.rng.choice(spec.n_human_actions, p=dist))
        runner.advance(a_h)
    return runner.trace


def _reachable_reward_table(spec: GameSpec) -> np.ndarray:
    """can_reward[t, s, k]: some future reward for objective k is reachable from s at t."""
    H, S, K = spec.horizon, spec.n_states, spec.n_objectives
    legal_pair = spec.human_legal[:, :, None] & spec.robot_legal[:, None, :]
    immediate = ((spec.reward > 0.0) & legal_pair[..., None]).any(axis=(1, 2))  # (S, K)
    reach_any = ((spec.transition > 0.0) & legal_pair[..., None]).any(axis=(1, 2))  # (S, S)
    reach_f = reach_any.astype(np.float64)
    out = np.zeros((H, S, K), dtype=bool)
    out[H - 1] = immediate
    for t in range(H - 2, -1, -1):
        out[t] = immediate | (reach_f @ out[t + 1].astype(np.float64) > 0.0)
    return out


def expected_value_exact(
    condition: Condition,
    solutions: SolutionSet,
    spec: GameSpec,
    prune: float = 1e-12,
) -> dict:
    """Exact expected discounted reward per objective, by forward enumeration.

    Enumerates the human's action tree level by level, weighting branches
    by their soft-max probabilities and pruning branches whose cumulative
    probability drops below `prune` (pruned mass is reported). Branches
    that can never earn reward again are retired early; retired plus
    pruned plus still-alive mass accounts for all of 1.
    """
    if not spec.is_deterministic():
        raise StochasticTransitionsError(
            "transitions are stochastic; use monte_carlo_value instead"
        )
    next_state = spec.next_state_table()
    drivers = _BatchDrivers(condition, solutions, spec)
    H, K = spec.horizon, spec.n_objectives
    s0 = spec.initial_state()
    b0 = spec.prior[s0] / spec.prior[s0].sum()
    can_reward = _reachable_reward_table(spec)

    per_theta = np.zeros(K)
    pruned_mass = np.zeros(K)
    leaf_mass = np.zeros(K)
    for theta in range(K):
        states = np.array([s0])
        beliefs = b0[None, :].copy()
        probs = np.array([1.0])
        value = 0.0
        pruned = 0.0
        retired = 0.0
        for t in range(H):
            if states.size == 0:
                break
            a_r, like = drivers.robot_and_likelihood(t, states, beliefs)
            dist = drivers.human_distribution(t, states, a_r, beliefs, theta, likelihood=like)
            child_p = probs[:, None] * dist  # (N, AH)
            n_idx, ah_idx = np.nonzero(child_p > 0.0)
            p = child_p[n_idx, ah_idx]
            s_par = states[n_idx]
            ar_par = a_r[n_idx]
            rewards = spec.reward[s_par, ah_idx, ar_par, theta]
            value += float((p * rewards).sum()) * spec.discount**t
            post = beliefs[n_idx] * like[n_idx, ah_idx]
            z = post.sum(axis=1, keepdims=True)
            post = np.where(z > 0, post / np.where(z > 0, z, 1.0), beliefs[n_idx])
            s_child = next_state[s_par, ah_idx, ar_par]
            alive = can_reward[t + 1, s_child, theta] if t + 1 < H else np.zeros(p.size, bool)
            retired += float(p[~alive].sum())
            small = alive & (p < prune)
            pruned += float(p[small].sum())
            alive &= ~small
            states, beliefs, probs = s_child[alive], post[alive], p[alive]
        retired += float(probs.sum())  # mass still alive when the horizon ends
        per_theta[theta] = value
        pruned_mass[theta] = pruned
        leaf_mass[theta] = retired
    theta_prior = spec.objective_prior()
    return {
        "per_objective": per_theta,
        "aggregate": float(per_theta @ theta_prior),
        "pruned_mass": pruned_mass,
        "leaf_mass": leaf_mass,
    }


def monte_carlo_value(
    condition: Condition,
    solutions: SolutionSet,
    spec: GameSpec,
    n_episodes: int = 100_000,
    seed: int = 0,
) -> dict:
    """Vectorized Monte Carlo estimate of the expected value per objective.

    Episodes run in lockstep; the estimate and its standard error are
    reproducible from the seed. Episodes stop at the first reward for the
    true objective (success is absorbing in the shipped domains).
    """
    drivers = _BatchDrivers(condition, solutions, spec)
    H, K, AH = spec.horizon, spec.n_objectives, spec.n_human_actions
    deterministic = spec.is_deterministic()
    next_state = spec.next_state_table() if deterministic else None
    s0 = spec.initial_state()
    b0 = spec.prior[s0] / spec.prior[s0].sum()

    per_theta = np.zeros(K)
    per_theta_se = np.zeros(K)
    rng = np.random.default_rng(seed)
    for theta in range(K):
        states = np.full(n_episodes, s0)
        beliefs = np.tile(b0, (n_episodes, 1))
        returns = np.zeros(n_episodes)
        alive = np.ones(n_episodes, dtype=bool)
        for t in range(H):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            s = states[idx]
            b = beliefs[idx]
            a_r, like = drivers.robot_and_likelihood(t, s, b)
            dist = drivers.human_distribution(t, s, a_r, b, theta, likelihood=like)
            cum = np.cumsum(dist, axis=1)
            u = rng.random(idx.size)
            a_h = np.minimum((u[:, None] >= cum).sum(axis=1), AH - 1)
            rewards = spec.reward[s, a_h, a_r, theta]
            returns[idx] += spec.discount**t * rewards
            post = b * like[np.arange(idx.size), a_h]
            z = post.sum(axis=1, keepdims=True)
            beliefs[idx] = np.where(z > 0, post / np.where(z > 0, z, 1.0), b)
            if deterministic:
                states[idx] = next_state[s, a_h, a_r]
            else:
                cdf = np.cumsum(spec.transition[s, a_h, a_r], axis=1)
                states[idx] = np.minimum(
                    (rng.random(idx.size)[:, None] >= cdf).sum(axis=1), spec.n_states - 1
                )
            alive[idx[rewards > 0.0]] = False
        per_theta[theta] = returns.mean()
        per_theta_se[theta] = returns.std(ddof=1) / np.sqrt(n_episodes)
    theta_prior = spec.objective_prior()
    agg_se = float(np.sqrt((theta_prior**2 * per_theta_se**2).sum()))
    return {
        "per_objective": per_theta,
        "std_error": per_theta_se,
        "aggregate": float(per_theta @ theta_prior),
        "aggregate_std_error": agg_se,
        "n_episodes": n_episodes,
    }


@dataclass
class BenchmarkReport:
    """Expected values per (robot kind, rationality model): the benchmark grid."""

    scenario_id: str
    grid_resolution: int
    horizon: int
    config_hash: str
    model_labels: list
    rows: dict  # robot kind -> list of aggregate values, one per model
    per_objective: dict  # robot kind -> list of per-objective value lists
    solver_flags: dict = field(default_factory=dict)

    def value(self, robot: str, model_label: str) -> float:
        return self.rows[robot][self.model_labels.index(model_label)]

    def check_orderings(self) -> list[str]:
        """Violations of the expected qualitative pattern (empty when clean)."""
        problems = []
        cirl = self.rows.get("cirl-pragmatic", [])
        irl = self.rows.get("irl-literal", [])
        for label, c, i in zip(self.model_labels, cirl, irl):
            if c < i - 1e-9:
                problems.append(f"{label}: pragmatic value {c:.4f} below literal {i:.4f}")
        pairs = list(zip(self.model_labels, cirl))
        for (l1, v1), (l2, v2) in zip(pairs[:-1], pairs[1:]):
            if v2 < v1 - 1e-9:
                problems.append(
                    f"pragmatic value decreases from {l1} ({v1:.4f}) to {l2} ({v2:.4f})"
                )
        if "rational" in self.model_labels and irl:
            j = self.model_labels.index("rational")
            if not irl[j] < 1.0 - 1e-9:
                problems.append(
                    f"literal value under the rational model is not below 1 ({irl[j]:.4f})"
                )
        return problems

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "grid_resolution": self.grid_resolution,
            "horizon": self.horizon,
            "config_hash": self.config_hash,
            "models": self.model_labels,
            "rows": {k: [float(v) for v in vs] for k, vs in self.rows.items()},
            "per_objective": {
                k: [[float(v) for v in vs] for vs in rows]
                for k, rows in self.per_objective.items()
            },
            "solver_flags": self.solver_flags,
        }

    def to_text(self) -> str:
        width = max(len(label) for label in self.model_labels) + 2
        head = " " * 16 + "".join(label.rjust(width) for label in self.model_labels)
        lines = [head]
        for robot in ROBOT_KINDS:
            if robot not in self.rows or not self.rows[robot]:
                continue
            cells = "".join(f"{v:.4f}".rjust(width) for v in self.rows[robot])
            lines.append(robot.ljust(16) + cells)
        return "\n".join(lines)


def run_benchmark(
    spec: GameSpec,
    solutions_by_model: dict,
    scenario_id: str = "",
    config_hash: str = "",
    grid_resolution: int = 0,
) -> BenchmarkReport:
    """Evaluate both robot kinds under every solved model.

    `solutions_by_model` maps a model label to a SolutionSet holding both
    the pragmatic and the literal tables for that model. Solver
    non-convergence flags are propagated into the report, not raised.
    """
    model_labels = list(solutions_by_model)
    rows: dict = {robot: [] for robot in ROBOT_KINDS}
    per_obj: dict = {robot: [] for robot in ROBOT_KINDS}
    flags: dict = {}
    for label, sols in solutions_by_model.items():
        for robot, human in (("cirl-pragmatic", "pedagogic"), ("irl-literal", "expert")):
            cond = Condition(robot=robot, human=human, model=sols.model, scenario_id=scenario_id)
            result = expected_value_exact(cond, sols, spec)
            rows[robot].append(float(result["aggregate"]))
            per_obj[robot].append([float(v) for v in result["per_objective"]])
        not_converged = [r.summary() for r in sols.reports if not r.converged]
        if not_converged:
            flags[label] = not_converged
    return BenchmarkReport(
        scenario_id=scenario_id,
        grid_resolution=grid_resolution,
        horizon=spec.horizon,
        config_hash=config_hash,
        model_labels=model_labels,
        rows=rows,
        per_objective=per_obj,
        solver_flags=flags,
    )
