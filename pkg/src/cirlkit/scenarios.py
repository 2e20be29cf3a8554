"""Built-in benchmark scenarios.

Two scenarios ship with the package:

  soup-salad    Two recipes, six turns, robot starts convinced the human
                wants salad when she may want soup. The interesting case:
                the only way the human can reveal "soup" is by *not*
                chopping spinach at the right moment, which a pragmatic
                robot reads correctly and a literal one does not.

  four-recipe   Four overlapping recipes, ten turns, uniform prior. The
                benchmark grid compares the pragmatic equilibrium against
                the literal baseline across human rationality models.
"""

from __future__ import annotations

from dataclasses import dataclass

from .beliefs import RationalityModel, rational
from .chefworld import ChefWorld, Ingredient, Recipe, build_chefworld

__all__ = ["Scenario", "SCENARIOS", "get_scenario", "standard_ingredients"]


def standard_ingredients() -> tuple[Ingredient, ...]:
    """Tomatoes, bread and spinach with the usual actor restrictions.

    Either actor can chop or slice; only the robot can puree tomatoes or
    toast bread. The ingredient order matters: action indices follow it,
    and deterministic tie-breaking picks the lowest index, so work shared
    by many recipes (tomatoes, bread) is preferred over the
    recipe-revealing spinach chop whenever values are tied.
    """
    return (
        Ingredient(
            "tomatoes",
            states=("absent", "chopped", "pureed"),
            actors=({"H", "R"}, {"R"}),
            labels=("chop tomatoes", "puree tomatoes"),
        ),
        Ingredient(
            "bread",
            states=("absent", "sliced", "toasted"),
            actors=({"H", "R"}, {"R"}),
            labels=("slice bread", "toast bread"),
        ),
        Ingredient(
            "spinach",
            states=("absent", "chopped"),
            actors=({"H", "R"},),
            labels=("chop spinach",),
        ),
    )


SOUP = Recipe("soup", {"spinach": "absent", "tomatoes": "pureed", "bread": "toasted"})
SALAD = Recipe("salad", {"spinach": "chopped", "tomatoes": "chopped", "bread": "toasted"})
# The two extra benchmark recipes overlap pairwise with soup and salad.
# Salad and tomato salad are deliberate near-twins: the human-doable work is
# the same three steps for both, and they differ only in which robot-only
# finisher they need (toast vs puree), each of which destroys the other
# recipe. A human modeled as an expert (robot-already-knows) never has a
# reason to act differently for the two, so only pragmatic reasoning can
# tell them apart.
TOAST_PLATE = Recipe(
    "toast plate", {"spinach": "absent", "tomatoes": "absent", "bread": "toasted"}
)
TOMATO_SALAD = Recipe(
    "tomato salad", {"spinach": "chopped", "tomatoes": "pureed", "bread": "sliced"}
)


@dataclass(frozen=True)
class Scenario:
    """A named domain plus the solver defaults used everywhere it appears."""

    id: str
    description: str
    world: ChefWorld
    grid_resolution: int
    model: RationalityModel

    @property
    def horizon(self) -> int:
        return self.world.spec.horizon


def _soup_salad() -> Scenario:
    # The kitchen starts mid-task (tomatoes chopped, bread sliced): every
    # preparation step still useful for soup is robot-only, so a human who
    # wants soup can only communicate by deliberately idling while a human
    # who wants salad would chop the spinach herself. Idling is therefore
    # the soup signal, which a pragmatic robot reads and a literal robot
    # (modeling the human as an expert who expects the robot to know the
    # goal, and so is indifferent about helping) cannot.
    world = build_chefworld(
        standard_ingredients(),
        (SOUP, SALAD),
        horizon=6,
        discount=1.0,
        recipe_prior=(0.2, 0.8),
        initial={"spinach": "absent", "tomatoes": "chopped", "bread": "sliced"},
        name="soup-salad",
    )
    return Scenario(
        id="soup-salad",
        description=(
            "Two recipes over six turns from a half-prepared kitchen; the "
            "robot starts 80% convinced the goal is salad."
        ),
        world=world,
        grid_resolution=20,
        model=rational(),
    )


def _four_recipe() -> Scenario:
    world = build_chefworld(
        standard_ingredients(),
        (SOUP, SALAD, TOAST_PLATE, TOMATO_SALAD),
        horizon=10,
        discount=1.0,
        name="four-recipe",
    )
    return Scenario(
        id="four-recipe",
        description="Four overlapping recipes over ten turns with a uniform prior.",
        world=world,
        grid_resolution=10,
        model=rational(),
    )


_BUILDERS = {"soup-salad": _soup_salad, "four-recipe": _four_recipe}


def get_scenario(scenario_id: str) -> Scenario:
    try:
        builder = _BUILDERS[scenario_id]
    except KeyError:
        raise KeyError(f"unknown scenario {scenario_id!r}; available: {sorted(_BUILDERS)}")
    return builder()


SCENARIOS = tuple(_BUILDERS)
