"""ChefWorld: household meal preparation compiled to a flat game.

Ingredients advance through ordered preparation states via actor-restricted
actions; recipes are exact joint target states. The compiled game has one
state per kitchen configuration plus a single absorbing "done" state that
the kitchen enters as soon as it matches any recipe's target. The reward
for objective theta is 1 exactly on the turn the kitchen first reaches
theta's target, so with discount 1 the expected value equals the
probability of cooking the intended meal.

Compilation rules:
  - "wait" is action index 0 for both actors; deterministic tie-breaking
    elsewhere in the stack therefore favors idling over acting.
  - an action's precondition is checked against the state at the start of
    the turn, so a two-step preparation cannot happen within one turn even
    if the two actors split it;
  - when both actors fire the same transition in one turn the effect is
    applied once (effects are idempotent state-sets);
  - actions whose precondition fails are illegal; in the flat encoding they
    appear as self-loops with zero reward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import GameSpec

__all__ = [
    "DomainError",
    "Ingredient",
    "Recipe",
    "ChefWorld",
    "build_chefworld",
    "load_factored",
    "save_factored",
]

FACTORED_FORMAT_VERSION = 1
WAIT = 0


class DomainError(ValueError):
    """A factored domain that cannot be compiled."""


@dataclass(frozen=True)
class Ingredient:
    """An ingredient with ordered preparation states.

    `actors[i]` names who may advance the ingredient from states[i] to
    states[i+1]; `labels[i]` is the action name for that step.
    """

    name: str
    states: tuple[str, ...]
    actors: tuple[frozenset, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actors", tuple(frozenset(a) for a in self.actors))
        if len(self.states) < 2:
            raise DomainError(f"ingredient {self.name!r} needs at least 2 states")
        if len(self.actors) != len(self.states) - 1:
            raise DomainError(
                f"ingredient {self.name!r}: need one actor set per adjacent transition"
            )
        for i, actors in enumerate(self.actors):
            if not actors or not actors <= {"H", "R"}:
                raise DomainError(
                    f"ingredient {self.name!r} transition {i}: actors must be a "
                    "non-empty subset of {'H', 'R'}"
                )
        labels = self.labels or tuple(
            f"{self.name}: {self.states[i]} -> {self.states[i + 1]}"
            for i in range(len(self.states) - 1)
        )
        if len(labels) != len(self.states) - 1:
            raise DomainError(f"ingredient {self.name!r}: need one label per transition")
        object.__setattr__(self, "labels", tuple(labels))


@dataclass(frozen=True)
class Recipe:
    """A named joint target: one required preparation state per ingredient.

    Requiring an ingredient to stay "absent" is expressed the same way as
    any other target state.
    """

    name: str
    targets: dict

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", dict(self.targets))


@dataclass(frozen=True)
class _Effect:
    ingredient: int
    from_state: int  # precondition: ingredient is exactly here at turn start


@dataclass(frozen=True, eq=False)
class ChefWorld:
    """A compiled domain plus the factored bookkeeping the UI and service need."""

    spec: GameSpec
    ingredients: tuple[Ingredient, ...]
    recipes: tuple[Recipe, ...]
    initial_kitchen: tuple[int, ...]
    target_kitchens: tuple[tuple[int, ...], ...]
    done_state: int
    human_effects: tuple  # per human action: _Effect or None for wait
    robot_effects: tuple
    _kitchen_index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_kitchens(self) -> int:
        return self.done_state

    def kitchen_of_state(self, s: int) -> tuple[int, ...] | None:
        """Per-ingredient state indices, or None for the absorbing done state."""
        if s == self.done_state:
            return None
        dims = [len(ing.states) for ing in self.ingredients]
        return tuple(int(v) for v in np.unravel_index(s, dims))

    def state_of_kitchen(self, kitchen) -> int:
        dims = [len(ing.states) for ing in self.ingredients]
        return int(np.ravel_multi_index(tuple(int(v) for v in kitchen), dims))

    def kitchen_labels(self, s: int) -> dict:
        kitchen = self.kitchen_of_state(s)
        if kitchen is None:
            return {ing.name: "done" for ing in self.ingredients}
        return {
            ing.name: ing.states[kitchen[i]] for i, ing in enumerate(self.ingredients)
        }

    def successor_kitchen(self, s: int, a_h: int, a_r: int) -> tuple[int, ...] | None:
        """Joint effect of one turn before any absorption into the done state."""
        kitchen = self.kitchen_of_state(s)
        if kitchen is None:
            return None
        out = list(kitchen)
        for effect in (self.human_effects[a_h], self.robot_effects[a_r]):
            if effect is not None and kitchen[effect.ingredient] == effect.from_state:
                out[effect.ingredient] = effect.from_state + 1
        return tuple(out)

    def recipe_index(self, name: str) -> int:
        for k, recipe in enumerate(self.recipes):
            if recipe.name == name:
                return k
        raise KeyError(f"unknown recipe {name!r}")


def _target_kitchen(recipe: Recipe, ingredients) -> tuple[int, ...]:
    by_name = {ing.name: ing for ing in ingredients}
    for ing_name in recipe.targets:
        if ing_name not in by_name:
            raise DomainError(f"recipe {recipe.name!r} references unknown ingredient {ing_name!r}")
    kitchen = []
    for ing in ingredients:
        if ing.name not in recipe.targets:
            raise DomainError(f"recipe {recipe.name!r} does not constrain {ing.name!r}")
        state_name = recipe.targets[ing.name]
        if state_name not in ing.states:
            raise DomainError(
                f"recipe {recipe.name!r}: {state_name!r} is not a state of {ing.name!r}"
            )
        kitchen.append(ing.states.index(state_name))
    return tuple(kitchen)


def build_chefworld(
    ingredients,
    recipes,
    horizon: int,
    discount: float = 1.0,
    recipe_prior=None,
    initial=None,
    name: str = "chefworld",
) -> ChefWorld:
    """Compile ingredients and recipes into a flat GameSpec.

    The prior fixes the initial kitchen (all ingredients in their first
    state unless overridden) and is uniform over recipes unless
    `recipe_prior` is given.
    """
    ingredients = tuple(ingredients)
    recipes = tuple(recipes)
    if not ingredients or not recipes:
        raise DomainError("need at least one ingredient and one recipe")
    names = [ing.name for ing in ingredients]
    if len(set(names)) != len(names):
        raise DomainError("duplicate ingredient names")
    if len({r.name for r in recipes}) != len(recipes):
        raise DomainError("duplicate recipe names")

    dims = [len(ing.states) for ing in ingredients]
    n_kitchens = int(np.prod(dims))
    done = n_kitchens
    S = n_kitchens + 1
    K = len(recipes)

    human_effects: list = [None]
    robot_effects: list = [None]
    human_names = ["wait"]
    robot_names = ["wait"]
    for i, ing in enumerate(ingredients):
        for j in range(len(ing.states) - 1):
            effect = _Effect(i, j)
            if "H" in ing.actors[j]:
                human_effects.append(effect)
                human_names.append(ing.labels[j])
            if "R" in ing.actors[j]:
                robot_effects.append(effect)
                robot_names.append(ing.labels[j])
    AH, AR = len(human_effects), len(robot_effects)

    targets = tuple(_target_kitchen(r, ingredients) for r in recipes)
    target_states = {np.ravel_multi_index(t, dims): k for k, t in enumerate(targets)}
    if len(target_states) != K:
        raise DomainError("two recipes share the same joint target state")

    if initial is None:
        initial_kitchen = tuple(0 for _ in ingredients)
    else:
        initial_kitchen = tuple(
            ing.states.index(initial[ing.name]) if ing.name in initial else 0
            for ing in ingredients
        )
    s0 = int(np.ravel_multi_index(initial_kitchen, dims))

    if recipe_prior is None:
        theta_prior = np.full(K, 1.0 / K)
    else:
        theta_prior = np.asarray(recipe_prior, dtype=float)
        if theta_prior.shape != (K,) or (theta_prior < 0).any():
            raise DomainError("recipe prior must be a non-negative vector over recipes")
        theta_prior = theta_prior / theta_prior.sum()

    transition = np.zeros((S, AH, AR, S))
    reward = np.zeros((S, AH, AR, K))
    human_legal = np.zeros((S, AH), dtype=bool)
    robot_legal = np.zeros((S, AR), dtype=bool)
    human_legal[:, WAIT] = True
    robot_legal[:, WAIT] = True

    def applicable(effect, kitchen) -> bool:
        return effect is None or kitchen[effect.ingredient] == effect.from_state

    for s in range(n_kitchens):
        kitchen = tuple(int(v) for v in np.unravel_index(s, dims))
        for ah, eff_h in enumerate(human_effects):
            human_legal[s, ah] |= applicable(eff_h, kitchen)
        for ar, eff_r in enumerate(robot_effects):
            robot_legal[s, ar] |= applicable(eff_r, kitchen)
        for ah, eff_h in enumerate(human_effects):
            for ar, eff_r in enumerate(robot_effects):
                if not (applicable(eff_h, kitchen) and applicable(eff_r, kitchen)):
                    transition[s, ah, ar, s] = 1.0  # illegal joint action: self-loop
                    continue
                nxt = list(kitchen)
                for eff in (eff_h, eff_r):
                    if eff is not None and kitchen[eff.ingredient] == eff.from_state:
                        nxt[eff.ingredient] = eff.from_state + 1
                flat = int(np.ravel_multi_index(tuple(nxt), dims))
                hit = target_states.get(flat)
                if hit is not None and flat != s:
                    reward[s, ah, ar, hit] = 1.0
                    transition[s, ah, ar, done] = 1.0
                else:
                    transition[s, ah, ar, flat] = 1.0
    transition[done, :, :, done] = 1.0  # done state absorbs under every action

    prior = np.zeros((S, K))
    prior[s0] = theta_prior

    state_names = []
    for s in range(n_kitchens):
        kitchen = np.unravel_index(s, dims)
        state_names.append(
            "|".join(f"{ing.name}={ing.states[kitchen[i]]}" for i, ing in enumerate(ingredients))
        )
    state_names.append("done")

    spec = GameSpec(
        name=name,
        states=tuple(state_names),
        human_actions=tuple(human_names),
        robot_actions=tuple(robot_names),
        transition=transition,
        objectives=tuple(r.name for r in recipes),
        reward=reward,
        prior=prior,
        discount=discount,
        horizon=horizon,
        human_legal=human_legal,
        robot_legal=robot_legal,
        metadata={"kind": "chefworld", "initial_state": s0, "done_state": done},
    )
    return ChefWorld(
        spec=spec,
        ingredients=ingredients,
        recipes=recipes,
        initial_kitchen=initial_kitchen,
        target_kitchens=targets,
        done_state=done,
        human_effects=tuple(human_effects),
        robot_effects=tuple(robot_effects),
    )


def save_factored(world: ChefWorld, path: str | Path) -> None:
    doc = {
        "format_version": FACTORED_FORMAT_VERSION,
        "name": world.spec.name,
        "ingredients": [
            {
                "name": ing.name,
                "states": list(ing.states),
                "transitions": [
                    {
                        "from": ing.states[i],
                        "to": ing.states[i + 1],
                        "actors": sorted(ing.actors[i]),
                        "label": ing.labels[i],
                    }
                    for i in range(len(ing.states) - 1)
                ],
            }
            for ing in world.ingredients
        ],
        "recipes": [{"name": r.name, "targets": r.targets} for r in world.recipes],
        "horizon": world.spec.horizon,
        "discount": world.spec.discount,
        "recipe_prior": world.spec.objective_prior().tolist(),
        "initial": {
            ing.name: ing.states[world.initial_kitchen[i]]
            for i, ing in enumerate(world.ingredients)
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_factored(path: str | Path) -> ChefWorld:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FACTORED_FORMAT_VERSION:
        raise DomainError(f"unsupported factored format version: {version!r}")
    ingredients = []
    for entry in doc["ingredients"]:
        states = tuple(entry["states"])
        transitions = entry["transitions"]
        if len(transitions) != len(states) - 1:
            raise DomainError(f"ingredient {entry['name']!r}: transition list does not cover states")
        for i, tr in enumerate(transitions):
            if tr["from"] != states[i] or tr["to"] != states[i + 1]:
                raise DomainError(
                    f"ingredient {entry['name']!r}: transitions must follow the state order"
                )
        ingredients.append(
            Ingredient(
                name=entry["name"],
                states=states,
                actors=tuple(frozenset(tr["actors"]) for tr in transitions),
                labels=tuple(tr.get("label", f"{entry['name']}: {tr['from']} -> {tr['to']}") for tr in transitions),
            )
        )
    recipes = [Recipe(r["name"], r["targets"]) for r in doc["recipes"]]
    return build_chefworld(
        ingredients,
        recipes,
        horizon=int(doc["horizon"]),
        discount=float(doc.get("discount", 1.0)),
        recipe_prior=doc.get("recipe_prior"),
        initial=doc.get("initial"),
        name=doc.get("name", "chefworld"),
    )
