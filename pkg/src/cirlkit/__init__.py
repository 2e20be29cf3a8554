"""Cooperative hidden-objective games: solvers, simulators and benchmarks.

The package builds and solves two-player collaboration games where only
the human knows the objective. The robot maintains a Bayesian belief over
objectives and plans over it; the human is modeled as noisily rational
against the very values being solved for, which makes her actions
deliberately informative and the robot's reading of them pragmatic.
"""

from .beliefs import (
    BeliefGrid,
    InconsistentObservationError,
    RationalityModel,
    bayes_update,
    belief_transition,
    boltzmann,
    boltzmann_policy,
    project_to_grid,
    rational,
)
from .chefworld import ChefWorld, DomainError, Ingredient, Recipe, build_chefworld
from .evaluate import (
    BenchmarkReport,
    Condition,
    EpisodeRunner,
    EpisodeTrace,
    StochasticTransitionsError,
    expected_value_exact,
    monte_carlo_value,
    run_benchmark,
    simulate_episode,
)
from .game import GameSpec, TurnStructure, TURN_ORDER, Violation, legal_actions, step, validate_game
from .scenarios import SCENARIOS, Scenario, get_scenario
from .solver import (
    FullInfoQ,
    LiteralSolution,
    QFunction,
    SolutionSet,
    SolveReport,
    backup_cell,
    fixed_point_residual,
    literal_robot_policy,
    load_solutions,
    robot_best_response,
    save_solutions,
    solve_cirl,
    solve_full_info,
    solve_full_info_all,
)

__version__ = "0.1.0"
