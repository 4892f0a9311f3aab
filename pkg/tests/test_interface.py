import json
import os
import time

import pytest
from fastapi.testclient import TestClient

from skynav.cli import main
from skynav.service import create_app
from skynav.world import save_scene

from conftest import walled_goal_scene


def suite_config_doc(episodes=2):
    return {
        "schema": "suite/1",
        "scenes": [{"archetype": "park", "seed": 7},
                   {"archetype": "office", "seed": 5}],
        "episodes_per_scene": episodes,
        "seed": 42,
        "max_steps": 250,
        "profile": "ORACLE",
    }


def ablate_config_doc():
    return {
        "schema": "ablate/1",
        "suite": {
            "schema": "suite/1",
            "scenes": [{"archetype": "park", "seed": 7}],
            "episodes_per_scene": 2,
            "seed": 42,
        },
        "rows": [
            {"name": "closed", "profile": "CLOSED_VOCAB_80"},
            {"name": "precise", "profile": "OPEN_VOCAB_PRECISE"},
            {"name": "corrupted", "profile": "ORACLE", "corrupt_rate": 0.5},
        ],
    }


class TestCliRun:
    def test_successful_park_run(self, tmp_path, capsys):
        out = tmp_path / "log.jsonl"
        code = main(["run", "--archetype", "park", "--scene-seed", "7",
                     "--instruction", "take off, fly to the fountain, then land",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "outcome=success" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        assert json.loads(lines[0])["schema"] == "log/1"
        assert json.loads(lines[-1])["outcome"] == "success"

    def test_missing_scene_file(self, tmp_path, capsys):
        code = main(["run", "--scene", str(tmp_path / "nope.json"),
                     "--instruction", "fly to the car"])
        assert code == 1
        assert "does not exist" in capsys.readouterr().err

    def test_unparsable_instruction_is_config_error(self, capsys):
        code = main(["run", "--archetype", "park", "--scene-seed", "7",
                     "--instruction", "do a barrel roll"])
        assert code == 1

    def test_unknown_profile(self, capsys):
        code = main(["run", "--archetype", "park", "--scene-seed", "7",
                     "--instruction", "fly to the fountain",
                     "--profile", "MAGIC"])
        assert code == 1

    def test_unreachable_goal_exits_2(self, tmp_path, capsys):
        scene_path = tmp_path / "walled.json"
        save_scene(walled_goal_scene(), str(scene_path))
        out = tmp_path / "log.jsonl"
        code = main(["run", "--scene", str(scene_path),
                     "--instruction", "fly to the red box",
                     "--out", str(out)])
        assert code == 2
        tail = json.loads(out.read_text().splitlines()[-1])
        assert tail["outcome"] == "failure"
        assert tail["reason"] == "unreachable"

    def test_plot_writes_figure(self, tmp_path):
        out = tmp_path / "log.jsonl"
        code = main(["run", "--archetype", "park", "--scene-seed", "7",
                     "--instruction", "fly to the fountain",
                     "--out", str(out), "--plot"])
        assert code == 0
        assert (tmp_path / "log.png").exists()


class TestCliSuite:
    def test_suite_outputs(self, tmp_path, capsys):
        config = tmp_path / "suite.json"
        config.write_text(json.dumps(suite_config_doc()))
        out_dir = tmp_path / "results"
        code = main(["suite", "--config", str(config),
                     "--out-dir", str(out_dir)])
        assert code == 0
        for name in ("suite.json", "suite.csv", "suite.txt", "suite.png"):
            assert (out_dir / name).exists(), name
        doc = json.loads((out_dir / "suite.json").read_text())
        assert doc["schema"] == "suite/1"
        assert len(doc["per_scene"]) == 2
        assert "overall" in capsys.readouterr().out

    def test_bad_config_exits_1(self, tmp_path, capsys):
        config = tmp_path / "suite.json"
        config.write_text("{not json")
        assert main(["suite", "--config", str(config)]) == 1

    def test_missing_config_exits_1(self, tmp_path):
        assert main(["suite", "--config", str(tmp_path / "nope.json")]) == 1


class TestCliAblate:
    def test_matrix_outputs(self, tmp_path, capsys):
        config = tmp_path / "ablate.json"
        config.write_text(json.dumps(ablate_config_doc()))
        out_dir = tmp_path / "ablation"
        code = main(["ablate", "--config", str(config),
                     "--out-dir", str(out_dir)])
        assert code == 0
        csv_lines = (out_dir / "ablation.csv").read_text().splitlines()
        assert csv_lines[0].startswith("design_choice,profile,corrupt_rate")
        assert len(csv_lines) == 1 + 3  # one row per design choice
        assert (out_dir / "ablation.png").exists()

    def test_empty_rows_exits_1(self, tmp_path, capsys):
        doc = ablate_config_doc()
        doc["rows"] = []
        config = tmp_path / "ablate.json"
        config.write_text(json.dumps(doc))
        assert main(["ablate", "--config", str(config)]) == 1


class TestCliScene:
    def test_scene_generation(self, tmp_path):
        out = tmp_path / "scene.json"
        assert main(["scene", "--archetype", "warehouse", "--seed", "3",
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["schema"] == "scene/1"


@pytest.fixture
def client():
    app = create_app(pace=0.0)
    with TestClient(app) as c:
        yield c


def create_session(client, **overrides):
    body = {"schema": "session/1", "archetype": "park", "scene_seed": 7,
            "seed": 3}
    body.update(overrides)
    response = client.post("/sessions", json=body)
    assert response.status_code == 200, response.text
    return response.json()


def wait_status(client, session_id, target, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/sessions/{session_id}/state").json()
        if state["status"] == target:
            return state
        time.sleep(0.01)
    raise AssertionError(f"session never reached {target}")


class TestService:
    def test_create_and_full_mission(self, client):
        doc = create_session(client)
        assert doc["status"] == "awaiting_instruction"
        assert doc["scene"]["schema"] == "scene/1"
        sid = doc["session_id"]
        response = client.post(
            f"/sessions/{sid}/instruction",
            json={"schema": "instruction/1",
                  "text": "take off, fly to the fountain, then land"})
        assert response.status_code == 200
        echo = response.json()
        kinds = [sg["kind"] for sg in echo["subgoals"]]
        assert kinds == ["TAKEOFF", "NAVIGATE_TO", "LAND"]
        state = wait_status(client, sid, "finished")
        assert state["outcome"] == "success"
        assert all(sg["done"] for sg in state["subgoals"])
        log = client.get(f"/sessions/{sid}/log")
        assert log.status_code == 200
        tail = json.loads(log.text.splitlines()[-1])
        assert tail["outcome"] == "success"

    def test_gibberish_names_clause(self, client):
        doc = create_session(client)
        sid = doc["session_id"]
        response = client.post(
            f"/sessions/{sid}/instruction",
            json={"schema": "instruction/1", "text": "do a barrel roll"})
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert detail["error"] == "unparsable_clause"
        assert detail["clause"] == "do a barrel roll"
        state = client.get(f"/sessions/{sid}/state").json()
        assert state["status"] == "awaiting_instruction"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/abc/state").status_code == 404
        assert client.post("/sessions/abc/pause").status_code == 404

    def test_unknown_fields_rejected(self, client):
        response = client.post("/sessions", json={
            "schema": "session/1", "archetype": "park", "telemetry": True})
        assert response.status_code == 422

    def test_instruction_conflict_while_running(self, client):
        doc = create_session(client, max_steps=2000)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/instruction",
                    json={"schema": "instruction/1",
                          "text": "take off, fly to the fountain, then land"})
        response = client.post(
            f"/sessions/{sid}/instruction",
            json={"schema": "instruction/1", "text": "land"})
        # Either it conflicts mid-run or the episode already finished.
        state = client.get(f"/sessions/{sid}/state").json()
        if state["status"] in ("running", "paused"):
            assert response.status_code == 409

    def test_pause_freezes_pose_and_stream(self, client):
        doc = create_session(client, max_steps=5000)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/instruction",
                    json={"schema": "instruction/1",
                          "text": "take off, fly to the fountain, then land"})
        response = client.post(f"/sessions/{sid}/pause")
        assert response.status_code == 200
        assert response.json()["status"] == "paused"
        poses = []
        with client.stream("GET", f"/sessions/{sid}/stream?frames=3") as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    frame = json.loads(line[len("data: "):])
                    assert frame["schema"] == "state/1"
                    poses.append(json.dumps(frame["pose"]))
        assert len(poses) == 3
        assert len(set(poses)) == 1
        resumed = client.post(f"/sessions/{sid}/resume")
        assert resumed.json()["status"] == "running"
        wait_status(client, sid, "finished")

    def test_step_while_paused_advances_once(self, client):
        doc = create_session(client, max_steps=5000)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/instruction",
                    json={"schema": "instruction/1",
                          "text": "take off, fly to the fountain, then land"})
        client.post(f"/sessions/{sid}/pause")
        before = client.get(f"/sessions/{sid}/state").json()["step"]
        client.post(f"/sessions/{sid}/step")
        deadline = time.time() + 2.0
        after = before
        while time.time() < deadline and after == before:
            after = client.get(f"/sessions/{sid}/state").json()["step"]
            time.sleep(0.01)
        assert after == before + 1

    def test_abort_and_reset(self, client):
        doc = create_session(client, max_steps=5000)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/instruction",
                    json={"schema": "instruction/1",
                          "text": "take off, fly to the fountain, then land"})
        client.post(f"/sessions/{sid}/pause")
        response = client.post(f"/sessions/{sid}/abort")
        assert response.json()["status"] == "finished"
        log = client.get(f"/sessions/{sid}/log")
        assert log.status_code == 200
        assert json.loads(log.text.splitlines()[-1])["reason"] == "aborted"
        reset = client.post(f"/sessions/{sid}/reset")
        assert reset.json()["status"] == "awaiting_instruction"
        assert client.get(f"/sessions/{sid}/log").status_code == 409

    def test_log_409_before_finish(self, client):
        doc = create_session(client)
        sid = doc["session_id"]
        assert client.get(f"/sessions/{sid}/log").status_code == 409

    def test_reset_only_from_finished(self, client):
        doc = create_session(client)
        sid = doc["session_id"]
        assert client.post(f"/sessions/{sid}/reset").status_code == 409
