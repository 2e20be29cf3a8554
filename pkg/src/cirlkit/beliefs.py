"""Beliefs over hidden objectives.

Houses the noisy-rational action model (soft-max with rationality
coefficient beta, or an argmax model with a small likelihood floor), the
Bayesian belief update, the belief transition that composes the two, and
the regular simplex lattice used by the belief-state solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InconsistentObservationError",
    "RationalityModel",
    "boltzmann",
    "rational",
    "boltzmann_policy",
    "policy_over_rows",
    "bayes_update",
    "belief_transition",
    "BeliefGrid",
]


class InconsistentObservationError(ValueError):
    """The observed action has zero likelihood under every supported objective."""


@dataclass(frozen=True)
class RationalityModel:
    """How the human chooses actions given a row of action values.

    kind "boltzmann": p(a) proportional to exp(beta * q[a]); beta > 0 is the
    rationality coefficient (beta -> 0 indifference, beta -> inf argmax).

    kind "rational": all probability mass on the argmax, floored at `floor`
    and renormalized so that off-argmax actions keep a strictly positive
    likelihood and Bayesian updates stay defined even when the observed
    human deviates. Values within `tie_tol` of the maximum count as tied
    and the lowest action index wins; the tolerance sits well above the
    perturbation the floor itself injects into solved values (~floor per
    turn) and well below real strategic value differences, so ties that
    are ties in exact arithmetic are broken deterministically rather than
    by accumulated noise.

    The floor also applies to the boltzmann kind (it is a no-op at the
    default floor of 0). It must stay below 1/n_actions.
    """

    kind: str
    beta: float = 1.0
    floor: float = 0.0
    tie_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.kind not in ("boltzmann", "rational"):
            raise ValueError(f"unknown rationality kind: {self.kind!r}")
        if self.kind == "boltzmann" and not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be finite and positive")
        if self.floor < 0:
            raise ValueError("likelihood floor must be non-negative")
        if self.tie_tol < 0:
            raise ValueError("tie tolerance must be non-negative")

    def label(self) -> str:
        if self.kind == "rational":
            return "rational"
        return f"boltzmann(beta={self.beta:g})"


def boltzmann(beta: float, floor: float = 0.0) -> RationalityModel:
    return RationalityModel("boltzmann", beta=beta, floor=floor)


def rational(floor: float = 1e-9, tie_tol: float = 1e-6) -> RationalityModel:
    return RationalityModel("rational", beta=float("inf"), floor=floor, tie_tol=tie_tol)


def _check_floor(model: RationalityModel, n_legal: int) -> None:
    if model.floor >= 1.0 / n_legal:
        raise ValueError(
            f"likelihood floor {model.floor} must be below 1/{n_legal} "
            "(the number of available actions)"
        )


def boltzmann_policy(
    q_row: np.ndarray, model: RationalityModel, legal: np.ndarray | None = None
) -> np.ndarray:
    """Action distribution over one row of action values.

    Returns a vector over all actions; entries at illegal actions are zero.
    Soft-max is computed with max-subtraction so large beta*q cannot
    overflow. Ties under the rational kind go to the lowest action index.
    """
    q_row = np.asarray(q_row, dtype=float)
    if q_row.ndim != 1 or q_row.size == 0:
        raise ValueError("q_row must be a non-empty vector")
    if legal is None:
        legal = np.ones(q_row.size, dtype=bool)
    legal = np.asarray(legal, dtype=bool)
    if not legal.any():
        raise ValueError("at least one action must be legal")
    if not np.isfinite(q_row[legal]).all():
        raise ValueError("q_row contains non-finite values")
    _check_floor(model, int(legal.sum()))

    z = np.where(legal, q_row, -np.inf)
    if model.kind == "boltzmann":
        z = model.beta * z
        p = np.exp(z - z.max())
    else:
        p = np.zeros(q_row.size)
        p[int(np.argmax(z >= z.max() - model.tie_tol))] = 1.0
    p /= p.sum()
    if model.floor > 0.0:
        p = np.where(legal, np.maximum(p, model.floor), 0.0)
        p /= p.sum()
    return p


def policy_over_rows(
    q: np.ndarray, model: RationalityModel, legal: np.ndarray | None = None
) -> np.ndarray:
    """Vectorized `boltzmann_policy` over stacked value rows.

    `q` has shape (..., A, K): one value row per trailing objective, with
    the action axis second to last. `legal` broadcasts against (..., A).
    Matches the scalar reference exactly (same masking and summation).
    """
    q = np.asarray(q, dtype=float)
    if legal is None:
        mask = np.ones(q.shape, dtype=bool)
        z = q.copy()
    else:
        mask = np.broadcast_to(np.asarray(legal, dtype=bool)[..., None], q.shape)
        z = np.where(mask, q, -np.inf)
    if model.kind == "boltzmann":
        z = model.beta * z
        zmax = z.max(axis=-2, keepdims=True)
        p = np.exp(z - zmax)
    else:
        zmax = z.max(axis=-2, keepdims=True)
        idx = (z >= zmax - model.tie_tol).argmax(axis=-2, keepdims=True)
        p = np.zeros_like(q)
        np.put_along_axis(p, idx, 1.0, axis=-2)
        p = np.where(mask, p, 0.0)
    p = p / p.sum(axis=-2, keepdims=True)
    if model.floor > 0.0:
        p = np.where(mask, np.maximum(p, model.floor), 0.0)
        p = p / p.sum(axis=-2, keepdims=True)
    return p


def bayes_update(belief: np.ndarray, likelihood: np.ndarray) -> np.ndarray:
    """Posterior proportional to likelihood * prior, normalized.

    Raises InconsistentObservationError when the normalizer is zero, i.e.
    the observation is impossible under every objective the belief supports.
    """
    belief = np.asarray(belief, dtype=float)
    likelihood = np.asarray(likelihood, dtype=float)
    if belief.shape != likelihood.shape:
        raise ValueError("belief and likelihood must have the same shape")
    if (likelihood < 0).any():
        raise ValueError("likelihood must be non-negative")
    post = belief * likelihood
    z = post.sum()
    if z <= 0.0:
        raise InconsistentObservationError(
            "observation has zero likelihood under every supported objective"
        )
    return post / z


def belief_transition(
    belief: np.ndarray,
    a_h: int,
    q_slice: np.ndarray,
    model: RationalityModel,
    legal: np.ndarray | None = None,
) -> np.ndarray:
    """Deterministic belief transition after observing human action `a_h`.

    `q_slice` has shape (A_H, K): the value rows the human is assumed to
    soft-max over, one per objective. The likelihood of the observed action
    under each objective is the corresponding policy probability.
    """
    q_slice = np.asarray(q_slice, dtype=float)
    if q_slice.ndim != 2:
        raise ValueError("q_slice must have shape (n_human_actions, n_objectives)")
    n_actions, n_obj = q_slice.shape
    if not 0 <= a_h < n_actions:
        raise IndexError(f"human action {a_h} out of range")
    likelihood = np.empty(n_obj)
    for k in range(n_obj):
        likelihood[k] = boltzmann_policy(q_slice[:, k], model, legal)[a_h]
    return bayes_update(belief, likelihood)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    """Regular lattice over the probability simplex.

    Contains every belief whose entries are integer multiples of
    1/resolution, enumerated in lexicographic order of the integer
    lattice coordinates. Projection maps an arbitrary belief to a nearest
    grid point in L1 distance via largest-remainder rounding; among exact
    ties the lexicographically smallest lattice point (lowest grid index)
    wins.
    """

    resolution: int
    n_objectives: int
    lattice: np.ndarray  # (G, K) int
    points: np.ndarray  # (G, K) float
    _radix_table: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, resolution: int, n_objectives: int) -> "BeliefGrid":
        if resolution < 1 or n_objectives < 1:
            raise ValueError("resolution and n_objectives must be positive")
        lattice = np.array(list(_compositions(resolution, n_objectives)), dtype=np.int64)
        points = lattice.astype(float) / resolution
        lattice.setflags(write=False)
        points.setflags(write=False)
        grid = cls(resolution, n_objectives, lattice, points)
        size = (resolution + 1) ** n_objectives
        if size <= 50_000_000:
            table = np.full(size, -1, dtype=np.int64)
            table[lattice @ grid._radix()] = np.arange(len(lattice))
            table.setflags(write=False)
            object.__setattr__(grid, "_radix_table", table)
        return grid

    def __len__(self) -> int:
        return self.points.shape[0]

    def _radix(self) -> np.ndarray:
        return (self.resolution + 1) ** np.arange(self.n_objectives, dtype=np.int64)

    def index_of(self, lattice_point) -> int:
        """Index of an exact lattice point given as integer coordinates."""
        key = np.asarray([int(v) for v in lattice_point], dtype=np.int64)
        if key.shape != (self.n_objectives,) or key.sum() != self.resolution or (key < 0).any():
            raise KeyError(
                f"{tuple(lattice_point)} is not a lattice point at resolution {self.resolution}"
            )
        return int(self._indices_of(key[None, :])[0])

    def _indices_of(self, lattice_points: np.ndarray) -> np.ndarray:
        if self._radix_table is not None:
            return self._radix_table[lattice_points @ self._radix()]
        lookup = {tuple(row): i for i, row in enumerate(np.asarray(self.lattice))}
        return np.array([lookup[tuple(row)] for row in lattice_points], dtype=np.int64)

    def project(self, belief: np.ndarray) -> int:
        """Grid index of an L1-nearest point (deterministic tie-breaking)."""
        belief = np.asarray(belief, dtype=float)
        if belief.shape != (self.n_objectives,):
            raise ValueError(f"belief must have shape ({self.n_objectives},)")
        return int(self.project_batch(belief[None, :])[0])

    def project_batch(self, beliefs: np.ndarray) -> np.ndarray:
        """Vectorized projection of a (N, K) stack of beliefs.

        Scales each belief by the resolution, floors it, and distributes
        the leftover units to the coordinates with the largest remainders
        (largest-remainder rounding), which yields an exact L1 minimizer.
        Among equal remainders the leftover units go to the latest
        coordinates, which makes the chosen lattice point lexicographically
        smallest among the exact-arithmetic minimizers.
        """
        beliefs = np.asarray(beliefs, dtype=float)
        if beliefs.ndim != 2 or beliefs.shape[1] != self.n_objectives:
            raise ValueError("beliefs must have shape (n, n_objectives)")
        m, k = self.resolution, self.n_objectives
        u = m * np.clip(beliefs, 0.0, 1.0)
        f = np.floor(u).astype(np.int64)
        rem = u - f
        budget = np.clip(m - f.sum(axis=1), 0, k)  # leftover units to round up
        cols = np.broadcast_to(np.arange(k), rem.shape)
        order = np.lexsort((-cols, -rem), axis=1)  # remainder desc, then index desc
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, cols.copy(), axis=1)
        n = f + (ranks < budget[:, None])
        return self._indices_of(n)


def project_to_grid(belief: np.ndarray, grid: BeliefGrid) -> int:
    """Functional alias for `BeliefGrid.project`."""
    return grid.project(belief)
