"""Finite-horizon solvers for the hidden-objective collaboration game.

Three solution concepts live here:

  solve_cirl          The pragmatic-pedagogic equilibrium: value iteration
                      over state x belief-grid where every cell's backup is
                      a fixed point between the human's soft-max policy
                      (defined over the very values being computed) and the
                      robot's Bayesian belief transition (whose likelihood
                      is that policy).

  solve_full_info     The common-knowledge game for one objective: both
                      agents know the goal, the human soft-maxes over the
                      full-information values, no beliefs anywhere. This is
                      the expert model the literal baseline attributes to
                      the human.

  literal_robot_policy  Belief-state value iteration for a robot that
                      interprets human actions with the exogenous expert
                      likelihood above. No fixed point: the modeled human
                      ignores the robot's belief.

Per-cell fixed points are solved by damped iteration initialized from the
immediate reward. Initializing from the reward (rather than from the next
turn's values) anchors the iteration to the physical completion structure
of the game, which reliably selects the informative equilibrium; warm
starts inherit value ties that can lock cells into a degenerate fixed
point where no action carries information. Within a sweep the cells are
independent given the immutable next-turn table, and all per-cell
arithmetic is sequential, so results do not depend on how cells are
batched.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beliefs import BeliefGrid, RationalityModel, boltzmann, policy_over_rows, rational
from .game import GameSpec

__all__ = [
    "QFunction",
    "FullInfoQ",
    "LiteralSolution",
    "SolveReport",
    "SolutionSet",
    "robot_best_response",
    "batch_best_response",
    "backup_cell",
    "solve_cirl",
    "solve_full_info",
    "solve_full_info_all",
    "literal_robot_policy",
    "expert_policy_tables",
    "fixed_point_residual",
    "save_solutions",
    "load_solutions",
]

ARCHIVE_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class QFunction:
    """Equilibrium action values indexed by (turn, state, grid point, a_H, a_R, objective)."""

    values: np.ndarray  # (H, S, G, AH, AR, K)
    grid: BeliefGrid
    model: RationalityModel
    spec_name: str

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FullInfoQ:
    """Common-knowledge action values for a single objective: (turn, state, a_H, a_R)."""

    values: np.ndarray
    objective: int
    model: RationalityModel
    spec_name: str


@dataclass(frozen=True, eq=False)
class LiteralSolution:
    """Greedy policy and value table of the literal robot: (turn, state, grid point)."""

    values: np.ndarray
    greedy: np.ndarray
    grid: BeliefGrid
    model: RationalityModel
    spec_name: str


@dataclass
class SolveReport:
    """Convergence diagnostics for one solve."""

    spec_name: str
    model_label: str
    grid_resolution: int
    tol_fp: float
    max_iter: int
    damping: float
    sweep_max_residual: list = field(default_factory=list)  # newest sweep appended last
    sweep_iterations: list = field(default_factory=list)  # (max, mean) per sweep
    nonconverged_cells: list = field(default_factory=list)  # (t, s, g) tuples, capped
    wall_clock_seconds: float = 0.0

    @property
    def converged(self) -> bool:
        return not self.nonconverged_cells

    def summary(self) -> dict:
        return {
            "spec": self.spec_name,
            "model": self.model_label,
            "grid_resolution": self.grid_resolution,
            "tol_fp": self.tol_fp,
            "max_iter": self.max_iter,
            "damping": self.damping,
            "converged": self.converged,
            "n_nonconverged_cells": len(self.nonconverged_cells),
            "max_residual_per_sweep": [float(r) for r in self.sweep_max_residual],
            "iterations_per_sweep": [
                {"max": int(mx), "mean": float(mean)} for mx, mean in self.sweep_iterations
            ],
        }


def batch_best_response(
    q_cells: np.ndarray,
    beliefs: np.ndarray,
    model: RationalityModel,
    legal_h: np.ndarray,
    legal_r: np.ndarray,
):
    """Best responses for a batch of cells.

    `q_cells` is (n, AH, AR, K), `beliefs` (n, K), the legality masks
    (n, AH) and (n, AR). Returns (actions (n,), policies (n, AR, AH, K)).
    The arithmetic matches the solver's internal continuation exactly, so
    runtime action choices agree with the actions the solver assumed.
    """
    qm = np.moveaxis(q_cells, 1, 2)  # (n, AR, AH, K)
    pi = policy_over_rows(qm, model, legal_h[:, None, :])
    m = (pi * qm).sum(axis=2)  # (n, AR, K)
    ev = np.einsum("nrk,nk->nr", m, beliefs)
    ev = np.where(legal_r, ev, -np.inf)
    return ev.argmax(axis=1), pi


def robot_best_response(
    q_cell: np.ndarray,
    belief: np.ndarray,
    model: RationalityModel,
    legal_h: np.ndarray | None = None,
    legal_r: np.ndarray | None = None,
) -> int:
    """Robot action maximizing expected value under its belief.

    `q_cell` has shape (AH, AR, K). The expectation runs over the human's
    soft-max response to each candidate robot action and over the belief;
    ties go to the lowest action index.
    """
    q_cell = np.asarray(q_cell, dtype=float)[None]
    belief = np.asarray(belief, dtype=float)[None]
    AH, AR = q_cell.shape[1], q_cell.shape[2]
    lh = np.ones((1, AH), dtype=bool) if legal_h is None else np.asarray(legal_h, dtype=bool)[None]
    lr = np.ones((1, AR), dtype=bool) if legal_r is None else np.asarray(legal_r, dtype=bool)[None]
    actions, _ = batch_best_response(q_cell, belief, model, lh, lr)
    return int(actions[0])


class _Engine:
    """Vectorized sweep machinery shared by solve_cirl and backup_cell."""

    def __init__(self, spec: GameSpec, grid: BeliefGrid, model: RationalityModel,
                 tol_fp: float, max_iter: int, damping: float):
        if model.kind == "rational" and model.floor <= 0.0:
            raise ValueError("rational solves need a positive likelihood floor")
        self.spec = spec
        self.grid = grid
        self.model = model
        self.tol_fp = tol_fp
        self.max_iter = max_iter
        self.damping = damping
        self.S = spec.n_states
        self.G = len(grid)
        self.AH = spec.n_human_actions
        self.AR = spec.n_robot_actions
        self.K = spec.n_objectives
        self.deterministic = spec.is_deterministic()
        if self.deterministic:
            self.next_state = spec.next_state_table()
        # (C,) state and grid index per flattened cell, C = S * G
        self.cell_s = np.repeat(np.arange(self.S), self.G)
        self.cell_g = np.tile(np.arange(self.G), self.S)
        # legal pair mask in (s, AR, AH) layout used by the kernels
        self.legal_pair = spec.robot_legal[:, :, None] & spec.human_legal[:, None, :]

    def expected_next(self, next_q: np.ndarray) -> np.ndarray:
        """M[s, g, aR, k]: next-turn value of robot action aR under the human's
        soft-max response, per objective."""
        qm = np.moveaxis(next_q, 2, 3)  # (S, G, AR, AH, K)
        pi = policy_over_rows(qm, self.model, self.spec.human_legal[:, None, None, :])
        return (pi * qm).sum(axis=3)  # (S, G, AR, K)

    def apply_map(self, q: np.ndarray, cells: np.ndarray, m_next: np.ndarray | None) -> np.ndarray:
        """One application of the backup map to the cells' current values.

        `q` has shape (n_cells, AH, AR, K) and the result has the same
        shape: immediate reward plus discounted continuation through the
        belief transition induced by q itself.
        """
        spec, grid, model = self.spec, self.grid, self.model
        s_idx = self.cell_s[cells]
        r = spec.reward[s_idx]  # (A, AH, AR, K)
        if m_next is None:
            return np.broadcast_to(r, q.shape).copy()

        b = grid.points[self.cell_g[cells]]  # (A, K)
        qm = np.moveaxis(q, 1, 2)  # (A, AR, AH, K)
        pi = policy_over_rows(qm, model, spec.human_legal[s_idx][:, None, :])
        post = b[:, None, None, :] * pi  # (A, AR, AH, K)
        z = post.sum(axis=-1, keepdims=True)
        bprime = np.where(z > 0.0, post / np.where(z > 0.0, z, 1.0), b[:, None, None, :])
        gprime = grid.project_batch(bprime.reshape(-1, self.K)).reshape(bprime.shape[:-1])

        ev = np.zeros(q.shape[:1] + (self.AR, self.AH, self.K))
        flat_b = bprime.reshape(-1, self.K)
        flat_g = gprime.reshape(-1)
        if self.deterministic:
            s2 = np.moveaxis(self.next_state[s_idx], 1, 2).reshape(-1)  # (A*AR*AH,)
            ev = self._continuation(m_next, s2, flat_g, flat_b).reshape(ev.shape)
        else:
            for s2 in range(self.S):
                w = np.moveaxis(spec.transition[s_idx, :, :, s2], 1, 2)  # (A, AR, AH)
                if not w.any():
                    continue
                cont = self._continuation(
                    m_next, np.full(flat_g.shape, s2, dtype=np.int64), flat_g, flat_b
                ).reshape(ev.shape)
                ev += w[..., None] * cont
        q_new = r + spec.discount * np.moveaxis(ev, 1, 2)
        legal = np.moveaxis(self.legal_pair[s_idx], 1, 2)  # (A, AH, AR)
        return np.where(legal[..., None], q_new, r)

    def _continuation(self, m_next, s2, g2, b2) -> np.ndarray:
        """Value vector over objectives at (s2, g2) with belief weights b2.

        The next-turn robot action is recomputed as the best response at the
        projected cell, weighted by the exact posterior.
        """
        cand = m_next[s2, g2]  # (N, AR, K)
        evr = np.einsum("nrk,nk->nr", cand, b2)
        evr = np.where(self.spec.robot_legal[s2], evr, -np.inf)
        best = evr.argmax(axis=1)
        return cand[np.arange(cand.shape[0]), best]  # (N, K)

    def sweep(self, next_q: np.ndarray | None, cells: np.ndarray | None = None):
        """Solve the fixed point for every requested cell at one turn.

        Returns (values, residuals, iterations) with values shaped
        (n_cells, AH, AR, K).
        """
        if cells is None:
            cells = np.arange(self.S * self.G)
        m_next = None if next_q is None else self.expected_next(next_q)
        s_idx = self.cell_s[cells]
        q = np.ascontiguousarray(np.broadcast_to(
            self.spec.reward[s_idx], (len(cells), self.AH, self.AR, self.K)
        ).copy())
        residual = np.full(len(cells), np.inf)
        iterations = np.zeros(len(cells), dtype=np.int64)
        active = np.arange(len(cells))
        for it in range(1, self.max_iter + 1):
            q_new = self.apply_map(q[active], cells[active], m_next)
            delta = self.damping * (q_new - q[active])
            q[active] += delta
            res = np.abs(delta).reshape(len(active), -1).max(axis=1)
            residual[active] = res
            iterations[active] = it
            done = res < self.tol_fp
            active = active[~done]
            if active.size == 0:
                break
        return q, residual, iterations


def solve_cirl(
    spec: GameSpec,
    grid: BeliefGrid,
    model: RationalityModel,
    tol_fp: float = 1e-8,
    max_iter: int = 200,
    damping: float = 0.5,
) -> tuple[QFunction, SolveReport]:
    """Backward sweep over turns solving every (state, grid point) cell.

    The final turn's values equal the immediate reward exactly; earlier
    turns resolve the policy/belief-transition fixed point per cell.
    Non-convergence after max_iter is flagged in the report, not fatal.
    """
    if grid.n_objectives != spec.n_objectives:
        raise ValueError("grid and spec disagree on the number of objectives")
    start = time.perf_counter()
    engine = _Engine(spec, grid, model, tol_fp, max_iter, damping)
    H, S, G = spec.horizon, engine.S, engine.G
    values = np.zeros((H, S, G, engine.AH, engine.AR, engine.K))
    report = SolveReport(
        spec_name=spec.name,
        model_label=model.label(),
        grid_resolution=grid.resolution,
        tol_fp=tol_fp,
        max_iter=max_iter,
        damping=damping,
    )
    next_q = None
    for t in range(H - 1, -1, -1):
        q, residual, iterations = engine.sweep(next_q)
        values[t] = q.reshape(S, G, engine.AH, engine.AR, engine.K)
        report.sweep_max_residual.append(float(residual.max()))
        report.sweep_iterations.append((int(iterations.max()), float(iterations.mean())))
        bad = np.flatnonzero(residual >= tol_fp)
        for cell in bad[:50]:
            report.nonconverged_cells.append(
                (t, int(engine.cell_s[cell]), int(engine.cell_g[cell]))
            )
        next_q = values[t]
    report.wall_clock_seconds = time.perf_counter() - start
    values.setflags(write=False)
    qfn = QFunction(values=values, grid=grid, model=model, spec_name=spec.name)
    return qfn, report


def backup_cell(
    t: int,
    s: int,
    g: int,
    spec: GameSpec,
    grid: BeliefGrid,
    model: RationalityModel,
    next_q: np.ndarray | None,
    tol_fp: float = 1e-8,
    max_iter: int = 200,
    damping: float = 0.5,
):
    """Fixed point for a single (state, grid point) cell at turn t.

    `next_q` is the complete (S, G, AH, AR, K) table for turn t+1, or None
    when t is the final turn. Returns (q, residual, iterations) where q has
    shape (AH, AR, K). This runs the same kernel as `solve_cirl` restricted
    to one cell.
    """
    engine = _Engine(spec, grid, model, tol_fp, max_iter, damping)
    cells = np.array([s * len(grid) + g])
    q, residual, iterations = engine.sweep(next_q, cells)
    return q[0], float(residual[0]), int(iterations[0])


def fixed_point_residual(qfn: QFunction, spec: GameSpec) -> float:
    """Max distance the backup map moves the stored values, over all cells.

    Converged solves stay below twice the fixed-point tolerance.
    """
    engine = _Engine(spec, qfn.grid, qfn.model, 1e-8, 1, 1.0)
    H = qfn.horizon
    worst = 0.0
    cells = np.arange(engine.S * engine.G)
    for t in range(H - 1, -1, -1):
        next_q = qfn.values[t + 1] if t + 1 < H else None
        m_next = None if next_q is None else engine.expected_next(next_q)
        q = qfn.values[t].reshape(len(cells), engine.AH, engine.AR, engine.K)
        q_new = engine.apply_map(q, cells, m_next)
        worst = max(worst, float(np.abs(q_new - q).max()))
    return worst


def solve_full_info(spec: GameSpec, objective: int, model: RationalityModel) -> FullInfoQ:
    """Values of the game where the objective is common knowledge.

    The human soft-maxes over the same turn's values given the robot's
    action; the robot best-responds to that. Everything is belief-free, so
    each turn is a single backward application (no fixed point).
    """
    if not 0 <= objective < spec.n_objectives:
        raise IndexError(f"objective {objective} out of range")
    S, AH, AR = spec.n_states, spec.n_human_actions, spec.n_robot_actions
    H = spec.horizon
    r = spec.reward[:, :, :, objective]
    legal_pair = spec.human_legal[:, :, None] & spec.robot_legal[:, None, :]
    values = np.zeros((H, S, AH, AR))
    values[H - 1] = r
    for t in range(H - 2, -1, -1):
        nxt = values[t + 1]
        qm = np.moveaxis(nxt, 1, 2)[..., None]  # (S, AR, AH, 1)
        pi = policy_over_rows(qm, model, spec.human_legal[:, None, :])
        m_next = (pi * qm).sum(axis=2)[..., 0]  # (S, AR)
        ev = np.where(spec.robot_legal, m_next, -np.inf)
        w = m_next[np.arange(S), ev.argmax(axis=1)]  # (S,)
        cont = np.einsum("sabn,n->sab", spec.transition, w)
        values[t] = np.where(legal_pair, r + spec.discount * cont, r)
    values.setflags(write=False)
    return FullInfoQ(values=values, objective=objective, model=model, spec_name=spec.name)


def solve_full_info_all(spec: GameSpec, model: RationalityModel) -> np.ndarray:
    """Stacked full-information values for every objective: (H, S, AH, AR, K)."""
    stack = np.stack(
        [solve_full_info(spec, k, model).values for k in range(spec.n_objectives)], axis=-1
    )
    stack.setflags(write=False)
    return stack


def expert_policy_tables(full_q: np.ndarray, spec: GameSpec, model: RationalityModel) -> np.ndarray:
    """Expert-human soft-max per turn: (H, S, AR, AH, K).

    This is the exogenous likelihood the literal robot attributes to the
    human: the policy she would follow if the robot knew the objective.
    """
    qm = np.moveaxis(full_q, 2, 3)  # (H, S, AR, AH, K)
    return policy_over_rows(qm, model, spec.human_legal[None, :, None, :])


def literal_robot_policy(
    spec: GameSpec,
    grid: BeliefGrid,
    full_q: np.ndarray,
    model: RationalityModel,
) -> LiteralSolution:
    """Belief-state value iteration against the exogenous expert likelihood.

    The robot maximizes expected continuation value under its belief; the
    belief transition is plain Bayes with the expert policy as likelihood,
    so there is no fixed point anywhere. Returns the greedy policy and its
    value table over (turn, state, grid point).
    """
    if model.kind == "rational" and model.floor <= 0.0:
        raise ValueError("rational solves need a positive likelihood floor")
    S, AH, AR, K = spec.n_states, spec.n_human_actions, spec.n_robot_actions, spec.n_objectives
    H, G = spec.horizon, len(grid)
    pi_expert = expert_policy_tables(full_q, spec, model)  # (H, S, AR, AH, K)
    r_m = np.moveaxis(spec.reward, 1, 2)  # (S, AR, AH, K)
    deterministic = spec.is_deterministic()
    next_state = spec.next_state_table() if deterministic else None
    values = np.zeros((H, S, G))
    greedy = np.zeros((H, S, G), dtype=np.int64)
    b = grid.points  # (G, K)
    for t in range(H - 1, -1, -1):
        pi_t = pi_expert[t]  # (S, AR, AH, K)
        post = b[None, :, None, None, :] * pi_t[:, None, :, :, :]  # (S, G, AR, AH, K)
        z = post.sum(axis=-1)  # (S, G, AR, AH): marginal likelihood of each human action
        imm = np.einsum("gk,srak->sgra", b, pi_t * r_m)
        if t == H - 1:
            ev = imm
        else:
            zsafe = np.where(z > 0.0, z, 1.0)
            bprime = post / zsafe[..., None]
            gprime = grid.project_batch(bprime.reshape(-1, K)).reshape(z.shape)
            v_next = values[t + 1]
            if deterministic:
                s2 = np.broadcast_to(np.moveaxis(next_state, 1, 2)[:, None, :, :], z.shape)
                cont = v_next[s2.reshape(-1), gprime.reshape(-1)].reshape(z.shape)
            else:
                cont = np.zeros(z.shape)
                for s2 in range(S):
                    w = np.moveaxis(spec.transition[:, :, :, s2], 1, 2)[:, None, :, :]
                    if not w.any():
                        continue
                    cont += w * v_next[s2, gprime]
            ev = imm + spec.discount * z * cont
        ev_r = ev.sum(axis=-1)  # (S, G, AR)
        ev_r = np.where(spec.robot_legal[:, None, :], ev_r, -np.inf)
        greedy[t] = ev_r.argmax(axis=-1)
        values[t] = np.take_along_axis(ev_r, greedy[t][..., None], axis=-1)[..., 0]
    values.setflags(write=False)
    greedy.setflags(write=False)
    return LiteralSolution(values=values, greedy=greedy, grid=grid, model=model, spec_name=spec.name)


@dataclass(eq=False)
class SolutionSet:
    """Everything the evaluator, CLI and service need for one solved scenario."""

    spec_name: str
    model: RationalityModel
    grid: BeliefGrid | None = None
    pragmatic: QFunction | None = None
    full_info: np.ndarray | None = None  # (H, S, AH, AR, K)
    literal: LiteralSolution | None = None
    config: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)


def save_solutions(solutions: SolutionSet, path: str | Path) -> None:
    arrays: dict = {}
    meta = {
        "format_version": ARCHIVE_FORMAT_VERSION,
        "spec_name": solutions.spec_name,
        "model": {
            "kind": solutions.model.kind,
            "beta": solutions.model.beta if np.isfinite(solutions.model.beta) else None,
            "floor": solutions.model.floor,
            "tie_tol": solutions.model.tie_tol,
        },
        "grid_resolution": solutions.grid.resolution if solutions.grid else None,
        "n_objectives": solutions.grid.n_objectives if solutions.grid else None,
        "config": solutions.config,
        "reports": [r.summary() for r in solutions.reports],
    }
    if solutions.pragmatic is not None:
        arrays["pragmatic"] = solutions.pragmatic.values
    if solutions.full_info is not None:
        arrays["full_info"] = solutions.full_info
    if solutions.literal is not None:
        arrays["literal_values"] = solutions.literal.values
        arrays["literal_greedy"] = solutions.literal.greedy
    np.savez_compressed(Path(path), meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_solutions(path: str | Path) -> SolutionSet:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format_version") != ARCHIVE_FORMAT_VERSION:
            raise ValueError(f"unsupported archive version: {meta.get('format_version')!r}")
        m = meta["model"]
        if m["kind"] == "rational":
            model = rational(m["floor"], m.get("tie_tol", 1e-6))
        else:
            model = boltzmann(m["beta"], m["floor"])
        grid = None
        if meta.get("grid_resolution"):
            grid = BeliefGrid.build(meta["grid_resolution"], meta["n_objectives"])
        out = SolutionSet(
            spec_name=meta["spec_name"], model=model, grid=grid, config=meta.get("config", {})
        )
        if "pragmatic" in data:
            out.pragmatic = QFunction(
                values=data["pragmatic"], grid=grid, model=model, spec_name=out.spec_name
            )
        if "full_info" in data:
            out.full_info = data["full_info"]
        if "literal_values" in data:
            out.literal = LiteralSolution(
                values=data["literal_values"],
                greedy=data["literal_greedy"],
                grid=grid,
                model=model,
                spec_name=out.spec_name,
            )
    return out
