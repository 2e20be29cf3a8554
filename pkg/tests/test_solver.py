from __future__ import annotations

import numpy as np
import pytest

from cirlkit import (
    BeliefGrid,
    boltzmann,
    rational,
    robot_best_response,
    solve_cirl,
    solve_full_info,
    solve_full_info_all,
    literal_robot_policy,
)
from cirlkit.solver import (
    backup_cell,
    batch_best_response,
    fixed_point_residual,
    load_solutions,
    save_solutions,
    SolutionSet,
)
from cirlkit.game import GameSpec

from .conftest import MICRO_SEEDS, micro_game
from .oracles import BruteForceSolver, best_response, shortest_joint_plan


class TestRobotBestResponse:
    def test_single_action(self):
        q = np.random.default_rng(0).random((3, 1, 2))
        assert robot_best_response(q, np.array([0.5, 0.5]), boltzmann(1.0)) == 0

    def test_dominant_action(self):
        q = np.zeros((2, 3, 2))
        q[:, 1, :] = 5.0  # action 1 dominates for every (a_H, objective)
        assert robot_best_response(q, np.array([0.3, 0.7]), boltzmann(2.0)) == 1

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            q = rng.normal(size=(2, 2, 2))
            b = rng.dirichlet(np.ones(2))
            model = boltzmann(rng.uniform(0.2, 4)) if rng.random() < 0.5 else rational()
            got = robot_best_response(q, b, model)
            want = best_response(q.tolist(), list(b), model)
            assert got == want

    def test_respects_robot_legality(self):
        q = np.zeros((2, 2, 1))
        q[:, 1, 0] = 1.0
        a = robot_best_response(
            q, np.array([1.0]), boltzmann(1.0), legal_r=np.array([True, False])
        )
        assert a == 0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(43)
        q = rng.normal(size=(20, 3, 4, 2))
        b = rng.dirichlet(np.ones(2), size=20)
        legal_h = np.ones((20, 3), dtype=bool)
        legal_r = rng.random((20, 4)) < 0.8
        legal_r[:, 0] = True
        for model in (boltzmann(2.0), rational()):
            batch, _ = batch_best_response(q, b, model, legal_h, legal_r)
            for i in range(20):
                single = robot_best_response(q[i], b[i], model, legal_h[i], legal_r[i])
                assert batch[i] == single


class TestBackupCell:
    def test_final_turn_equals_reward_in_one_iteration(self):
        spec = micro_game(3)
        grid = BeliefGrid.build(4, 2)
        q, residual, iters = backup_cell(1, 0, 2, spec, grid, boltzmann(1.0), None)
        np.testing.assert_array_equal(q, spec.reward[0])
        assert residual == 0.0 and iters == 1

    def test_zero_reward_game_has_zero_fixed_point(self):
        spec = micro_game(5)
        spec = GameSpec(
            name="zero", states=spec.states, human_actions=spec.human_actions,
            robot_actions=spec.robot_actions, transition=spec.transition,
            objectives=spec.objectives, reward=np.zeros_like(spec.reward),
            prior=spec.prior, discount=spec.discount, horizon=spec.horizon,
            human_legal=spec.human_legal, robot_legal=spec.robot_legal,
        )
        grid = BeliefGrid.build(4, 2)
        qfn, report = solve_cirl(spec, grid, boltzmann(1.0))
        assert report.converged
        np.testing.assert_array_equal(qfn.values, np.zeros_like(qfn.values))

    def test_matches_full_sweep(self):
        spec = micro_game(7)
        grid = BeliefGrid.build(4, 2)
        model = boltzmann(1.0)
        qfn, _ = solve_cirl(spec, grid, model)
        for (s, g) in [(0, 0), (1, 2), (0, 4)]:
            q, _, _ = backup_cell(0, s, g, spec, grid, model, qfn.values[1])
            np.testing.assert_array_equal(q, qfn.values[0, s, g])


class TestMicroGameOracle:
    def test_solver_matches_brute_force(self):
        # Seeds are screened so every cell's fixed point is unique: the
        # oracle iterates plainly from several initializations and checks
        # they coincide, which makes the comparison well-posed.
        grid = BeliefGrid.build(4, 2)
        model = boltzmann(1.0)
        worst = 0.0
        for seed in MICRO_SEEDS:
            spec = micro_game(seed)
            oracle = BruteForceSolver(spec, 4, model).solve(seed)
            qfn, report = solve_cirl(spec, grid, model)
            assert report.converged
            for (t, s, g), cell in oracle.items():
                gap = np.abs(qfn.values[t, s, g] - np.array(cell)).max()
                worst = max(worst, gap)
        assert worst <= 1e-6


class TestSolveCirl:
    def test_single_objective_equals_full_information(self):
        pan_spec = micro_game(2)
        spec = GameSpec(
            name="single", states=pan_spec.states, human_actions=pan_spec.human_actions,
            robot_actions=pan_spec.robot_actions, transition=pan_spec.transition,
            objectives=("only",), reward=pan_spec.reward[:, :, :, :1],
            prior=pan_spec.prior[:, :1] / pan_spec.prior[:, :1].sum(),
            discount=0.9, horizon=4,
            human_legal=pan_spec.human_legal, robot_legal=pan_spec.robot_legal,
        )
        grid = BeliefGrid.build(4, 1)
        model = boltzmann(1.5)
        qfn, _ = solve_cirl(spec, grid, model)
        full = solve_full_info(spec, 0, model)
        np.testing.assert_allclose(qfn.values[:, :, 0, :, :, 0], full.values, atol=1e-7)

    def test_zero_discount_gives_immediate_reward(self):
        spec = micro_game(9, discount=0.0, horizon=3)
        grid = BeliefGrid.build(4, 2)
        qfn, report = solve_cirl(spec, grid, boltzmann(1.0))
        assert report.converged
        for t in range(3):
            for g in range(len(grid)):
                np.testing.assert_allclose(qfn.values[t, :, g], spec.reward, atol=1e-12)

    def test_values_bounded_for_chefworld(self, soup_salad_solutions):
        v = soup_salad_solutions.pragmatic.values
        assert v.min() >= -1e-12 and v.max() <= 1.0 + 1e-9

    def test_final_turn_equals_reward_regardless_of_discount(self, soup_salad, soup_salad_solutions):
        spec = soup_salad.world.spec
        v = soup_salad_solutions.pragmatic.values
        H = spec.horizon
        for g in range(0, len(soup_salad_solutions.grid), 7):
            np.testing.assert_array_equal(v[H - 1, :, g], spec.reward)

    def test_fixed_point_verification(self, soup_salad, soup_salad_solutions):
        # re-applying the backup map moves converged values by < 2 * tol
        residual = fixed_point_residual(soup_salad_solutions.pragmatic, soup_salad.world.spec)
        assert residual < 2e-8

    def test_equilibrium_likelihood_self_consistency(self, soup_salad, soup_salad_solutions):
        # the belief transition at a converged cell uses exactly the policy
        # of that cell's returned values: recomputing the posterior from the
        # stored table reproduces the successor beliefs the backup used,
        # which fixed_point_residual already exercises end to end; here we
        # check the likelihood itself on a sample of cells
        from cirlkit.beliefs import belief_transition, policy_over_rows

        spec = soup_salad.world.spec
        qfn = soup_salad_solutions.pragmatic
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = int(rng.integers(spec.horizon))
            s = int(rng.integers(spec.n_states))
            g = int(rng.integers(len(qfn.grid)))
            a_r = int(rng.choice(np.flatnonzero(spec.robot_legal[s])))
            q_slice = qfn.values[t, s, g, :, a_r, :]
            pi = policy_over_rows(q_slice, qfn.model, spec.human_legal[s])
            for a_h in np.flatnonzero(spec.human_legal[s]):
                b = qfn.grid.points[g]
                posterior = belief_transition(
                    b, int(a_h), q_slice, qfn.model, spec.human_legal[s]
                )
                by_hand = b * pi[int(a_h)]
                np.testing.assert_allclose(posterior, by_hand / by_hand.sum(), atol=1e-12)

    def test_rational_solve_requires_positive_floor(self):
        spec = micro_game(0)
        with pytest.raises(ValueError):
            solve_cirl(spec, BeliefGrid.build(4, 2), rational(floor=0.0))


class TestFullInfo:
    def test_horizon_one_is_reward(self):
        spec = micro_game(11, horizon=1)
        full = solve_full_info(spec, 1, boltzmann(2.0))
        np.testing.assert_array_equal(full.values[0], spec.reward[:, :, :, 1])

    def test_zero_discount_is_reward(self):
        spec = micro_game(13, discount=0.0, horizon=3)
        full = solve_full_info(spec, 0, boltzmann(2.0))
        for t in range(3):
            np.testing.assert_allclose(full.values[t], spec.reward[:, :, :, 0], atol=1e-12)

    def test_rational_value_one_when_recipe_reachable(self, four_recipe):
        # with a rational pair and full information, any recipe reachable
        # within the horizon is worth 1 from the start
        spec = four_recipe.world.spec
        model = four_recipe.model
        s0 = spec.initial_state()
        for theta in range(spec.n_objectives):
            assert shortest_joint_plan(spec, theta) <= spec.horizon
            full = solve_full_info(spec, theta, model)
            a_r = robot_best_response(
                full.values[0, s0][:, :, None], np.ones(1), model,
                spec.human_legal[s0], spec.robot_legal[s0],
            )
            best = full.values[0, s0, :, a_r].max()
            assert best >= 1.0 - 1e-6


class TestLiteral:
    def test_single_objective_matches_full_info_actions(self):
        base = micro_game(15)
        spec = GameSpec(
            name="single", states=base.states, human_actions=base.human_actions,
            robot_actions=base.robot_actions, transition=base.transition,
            objectives=("only",), reward=base.reward[:, :, :, :1],
            prior=base.prior[:, :1] / base.prior[:, :1].sum(),
            discount=0.9, horizon=3,
            human_legal=base.human_legal, robot_legal=base.robot_legal,
        )
        model = boltzmann(1.0)
        grid = BeliefGrid.build(4, 1)
        full = solve_full_info_all(spec, model)
        lit = literal_robot_policy(spec, grid, full, model)
        for t in range(3):
            for s in range(spec.n_states):
                want, _ = batch_best_response(
                    full[t, s][None], np.ones((1, 1)), model,
                    spec.human_legal[s][None], spec.robot_legal[s][None],
                )
                assert lit.greedy[t, s, 0] == want[0]

    def test_uninformative_observation_keeps_belief(self, four_recipe, four_recipe_solutions):
        # the expert model is silent at the start: a wait carries no
        # information, so the posterior stays at the prior
        from cirlkit.solver import expert_policy_tables

        spec = four_recipe.world.spec
        sols = four_recipe_solutions["rational"]
        pi = expert_policy_tables(sols.full_info, spec, sols.model)
        s0 = spec.initial_state()
        like = pi[0, s0, 0, 0, :]  # robot waits, human waits
        assert np.ptp(like) <= 1e-9  # identical likelihood across objectives

    def test_literal_values_bounded(self, four_recipe_solutions):
        for sols in four_recipe_solutions.values():
            v = sols.literal.values
            assert v.min() >= -1e-9 and v.max() <= 1.0 + 1e-9


class TestSolutionArchive:
    def test_roundtrip(self, tmp_path, soup_salad_solutions):
        path = tmp_path / "solutions.npz"
        save_solutions(soup_salad_solutions, path)
        loaded = load_solutions(path)
        np.testing.assert_array_equal(
            loaded.pragmatic.values, soup_salad_solutions.pragmatic.values
        )
        np.testing.assert_array_equal(loaded.full_info, soup_salad_solutions.full_info)
        np.testing.assert_array_equal(
            loaded.literal.greedy, soup_salad_solutions.literal.greedy
        )
        assert loaded.model == soup_salad_solutions.model
        assert loaded.grid.resolution == soup_salad_solutions.grid.resolution

    def test_unknown_version_rejected(self, tmp_path, soup_salad_solutions):
        import json
        import numpy as np

        path = tmp_path / "solutions.npz"
        save_solutions(soup_salad_solutions, path)
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            arrays = {k: data[k] for k in data.files if k != "meta"}
        meta["format_version"] = 99
        np.savez(
            path,
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            **arrays,
        )
        with pytest.raises(ValueError):
            load_solutions(path)
