from __future__ import annotations

import numpy as np
import pytest

from cirlkit import (
    BeliefGrid,
    GameSpec,
    boltzmann,
    get_scenario,
    literal_robot_policy,
    solve_cirl,
    solve_full_info_all,
)
from cirlkit.solver import SolutionSet

# Seeds whose brute-force fixed point is unique (the oracle verifies this by
# iterating from several initializations), making the solver comparison
# well-posed. Screened once and frozen.
MICRO_SEEDS = [0, 1, 2, 4, 5, 6, 7, 8, 9, 10, 11, 13, 14, 15, 16, 18, 20, 21, 23, 25]


def micro_game(seed: int, horizon: int = 2, discount: float = 0.9) -> GameSpec:
    """Random 2-state / 2-action / 2-objective game with stochastic transitions."""
    rng = np.random.default_rng(seed)
    S, AH, AR, K = 2, 2, 2, 2
    transition = rng.dirichlet(np.ones(S), size=(S, AH, AR))
    reward = rng.random((S, AH, AR, K))
    prior = np.zeros((S, K))
    prior[0] = rng.dirichlet(np.ones(K))
    return GameSpec(
        name=f"micro-{seed}",
        states=("s0", "s1"),
        human_actions=("a", "b"),
        robot_actions=("x", "y"),
        transition=transition,
        objectives=("t0", "t1"),
        reward=reward,
        prior=prior,
        discount=discount,
        horizon=horizon,
        human_legal=np.ones((S, AH), dtype=bool),
        robot_legal=np.ones((S, AR), dtype=bool),
    )


def solve_scenario(scenario, model, grid_resolution=None) -> SolutionSet:
    spec = scenario.world.spec
    grid = BeliefGrid.build(grid_resolution or scenario.grid_resolution, spec.n_objectives)
    qfn, report = solve_cirl(spec, grid, model)
    full = solve_full_info_all(spec, model)
    lit = literal_robot_policy(spec, grid, full, model)
    sols = SolutionSet(
        spec_name=spec.name, model=model, grid=grid,
        pragmatic=qfn, full_info=full, literal=lit,
    )
    sols.reports.append(report)
    return sols


@pytest.fixture(scope="session")
def soup_salad():
    return get_scenario("soup-salad")


@pytest.fixture(scope="session")
def soup_salad_solutions(soup_salad):
    return solve_scenario(soup_salad, soup_salad.model)


@pytest.fixture(scope="session")
def four_recipe():
    return get_scenario("four-recipe")


FOUR_RECIPE_SOLVE_SECONDS = 0.0


@pytest.fixture(scope="session")
def four_recipe_solutions(four_recipe):
    """Solutions for the full benchmark grid; solved once per test session."""
    import time

    global FOUR_RECIPE_SOLVE_SECONDS
    models = {
        "boltzmann(beta=1)": boltzmann(1.0),
        "boltzmann(beta=2.5)": boltzmann(2.5),
        "boltzmann(beta=5)": boltzmann(5.0),
        "rational": four_recipe.model,
    }
    start = time.perf_counter()
    out = {label: solve_scenario(four_recipe, model) for label, model in models.items()}
    FOUR_RECIPE_SOLVE_SECONDS = time.perf_counter() - start
    return out
