from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from cirlkit import Condition, simulate_episode
from cirlkit.service import SolutionsStore, create_app, replay_journal

pytestmark = pytest.mark.service


@pytest.fixture(scope="module")
def store(soup_salad_solutions_module):
    scenario, solutions = soup_salad_solutions_module
    s = SolutionsStore()
    s.add(scenario, solutions)
    return s


@pytest.fixture(scope="module")
def soup_salad_solutions_module():
    from cirlkit import get_scenario

    from .conftest import solve_scenario

    scenario = get_scenario("soup-salad")
    return scenario, solve_scenario(scenario, scenario.model)


@pytest.fixture()
def client(store):
    return TestClient(create_app(store))


def start(client, mode="cirl", recipe="soup", seed=0):
    res = client.post(
        "/sessions",
        json={"scenario": "soup-salad", "mode": mode, "true_recipe": recipe, "seed": seed},
    )
    assert res.status_code == 201, res.text
    return res.json()


class TestScenarios:
    def test_listing(self, client):
        doc = client.get("/scenarios").json()
        assert len(doc) == 1
        entry = doc[0]
        assert entry["id"] == "soup-salad"
        assert entry["recipes"] == ["soup", "salad"]
        assert set(entry["modes"]) == {"cirl", "irl"}


class TestCreateSession:
    def test_initial_summary(self, client):
        doc = start(client)
        assert doc["turn"] == 0
        assert doc["status"] == "active"
        assert doc["robot_action"] is not None  # robot proposes before the human acts
        assert abs(sum(doc["belief"]) - 1.0) <= 1e-9
        assert doc["state"]["tomatoes"] == "chopped"
        assert "wait" in doc["legal_human_actions"]
        assert doc["true_recipe"] == "soup"

    def test_unknown_scenario(self, client):
        res = client.post("/sessions", json={"scenario": "nope"})
        assert res.status_code == 404
        assert res.json()["code"] == "unknown_scenario"

    def test_unknown_recipe(self, client):
        res = client.post(
            "/sessions", json={"scenario": "soup-salad", "true_recipe": "pizza"}
        )
        assert res.status_code == 400
        assert res.json()["code"] == "unknown_recipe"

    def test_random_recipe_seeded(self, client):
        picks = {
            start(client, recipe="random", seed=7)["true_recipe"] for _ in range(3)
        }
        assert len(picks) == 1  # same seed, same recipe


class TestSubmitAction:
    def test_full_pragmatic_game(self, client):
        doc = start(client)
        sid = doc["session_id"]
        while doc["status"] == "active":
            doc = client.post(
                f"/sessions/{sid}/action", json={"action": "wait", "turn": doc["turn"]}
            ).json()
            assert abs(sum(doc["belief"]) - 1.0) <= 1e-9
        assert doc["status"] == "succeeded"
        soup = doc["objectives"].index("soup")
        assert doc["belief"][soup] > 0.5

    def test_illegal_action_lists_legal(self, client):
        doc = start(client)
        res = client.post(
            f"/sessions/{doc['session_id']}/action",
            json={"action": "chop tomatoes", "turn": 0},
        )
        assert res.status_code == 400
        body = res.json()
        assert body["code"] == "illegal_action"
        assert "wait" in body["legal_actions"]

    def test_turn_echo_conflict(self, client):
        doc = start(client)
        sid = doc["session_id"]
        ok = client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": 0})
        assert ok.status_code == 200
        stale = client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": 0})
        assert stale.status_code == 409
        assert stale.json()["code"] == "turn_mismatch"

    def test_finished_session_conflicts(self, client):
        doc = start(client)
        sid = doc["session_id"]
        while doc["status"] == "active":
            doc = client.post(
                f"/sessions/{sid}/action", json={"action": "wait", "turn": doc["turn"]}
            ).json()
        res = client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": doc["turn"]})
        assert res.status_code == 409
        assert res.json()["code"] == "finished"
        after = client.get(f"/sessions/{sid}").json()
        assert after["turn"] == doc["turn"]  # unchanged

    def test_concurrent_submissions_serialize(self, store):
        # both threads submit for turn 0: exactly one wins
        client = TestClient(create_app(store))
        doc = start(client)
        sid = doc["session_id"]
        results = []

        def submit():
            res = client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": 0})
            results.append(res.status_code)

        threads = [threading.Thread(target=submit) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [200, 409]


class TestGetSession:
    def test_trace_grows_with_turns(self, client):
        doc = start(client)
        sid = doc["session_id"]
        for turn in range(2):
            client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": turn})
        view = client.get(f"/sessions/{sid}").json()
        assert len(view["trace"]) == 2
        assert view["trace"][0]["human_action"] == "wait"

    def test_unknown_session(self, client):
        res = client.get("/sessions/does-not-exist")
        assert res.status_code == 404


class TestReplayEquivalence:
    def test_session_trace_matches_simulator(self, client, store):
        # drive the service with a scripted human, then replay the same
        # script through the simulator: traces must be bit-identical
        entry = store.get("soup-salad")
        spec = entry.scenario.world.spec
        doc = start(client, mode="cirl", recipe="soup", seed=3)
        sid = doc["session_id"]
        script = []
        while doc["status"] == "active":
            action = "wait"
            script.append(spec.human_actions.index(action))
            doc = client.post(
                f"/sessions/{sid}/action", json={"action": action, "turn": doc["turn"]}
            ).json()
        view = client.get(f"/sessions/{sid}").json()

        cond = Condition("cirl-pragmatic", "pedagogic", entry.solutions.model,
                         scenario_id="soup-salad")
        sim = simulate_episode(cond, entry.solutions, spec, 0, seed=3, script=script)
        assert sim.status == view["status"]
        assert len(sim.turns) == len(view["trace"])
        for rec, turn in zip(sim.turns, view["trace"]):
            assert spec.human_actions[rec.human_action] == turn["human_action"]
            assert spec.robot_actions[rec.robot_action] == turn["robot_action"]
            assert rec.belief == turn["belief"]  # exact float equality
            assert rec.rewards == turn["rewards"]

    def test_journal_replay_rebuilds_session(self, store, tmp_path):
        client = TestClient(create_app(store, journal_dir=str(tmp_path)))
        doc = start(client, seed=5)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": 0})
        client.post(f"/sessions/{sid}/action", json={"action": "wait", "turn": 1})
        view = client.get(f"/sessions/{sid}").json()

        rebuilt = replay_journal(tmp_path / f"{sid}.jsonl", store)
        assert rebuilt.runner.t == 2
        assert rebuilt.runner.trace.to_json() == json.dumps(
            json.loads(rebuilt.runner.trace.to_json()), sort_keys=True
        )
        assert [float(b) for b in rebuilt.runner.belief] == view["belief"]

        # a fresh app pointed at the same journal resurrects the session
        client2 = TestClient(create_app(store, journal_dir=str(tmp_path)))
        view2 = client2.get(f"/sessions/{sid}").json()
        assert view2["turn"] == 2
        assert view2["belief"] == view["belief"]
