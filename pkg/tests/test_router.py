import pytest
from fastapi.testclient import TestClient

from roadcast import config
from roadcast.router import create_app

from conftest import T3_NETWORK, T3_PATHS

AUTH = {"Authorization": "Bearer test-token"}


@pytest.fixture
def client(monkeypatch, tmp_path):
    monkeypatch.setattr(config, "RUNS_DIR", tmp_path / "runs")
    monkeypatch.setattr(config, "API_TOKEN", "test-token")
    return TestClient(create_app())


@pytest.fixture
def body(write_inputs):
    files = write_inputs(network=T3_NETWORK, paths=T3_PATHS)
    return {"subcommand": "plan-mincost", "network": files["network"], "paths": files["paths"], "lam": 0.5}


def test_health(client):
    assert client.get("/health").json()["modules"] == {"roadcast": "active"}
    assert client.get("/roadcast/health").json()["status"] == "ready"


def test_runs_need_token(client, body):
    assert client.post("/roadcast/runs", json=body).status_code == 401
    wrong = {"Authorization": "Bearer nope"}
    assert client.get("/roadcast/runs", headers=wrong).status_code == 401


def test_submit_fetch_replay(client, body):
    res = client.post("/roadcast/runs", json=body, headers=AUTH)
    assert res.status_code == 200
    record = res.json()
    assert record["ok"] and record["exit_code"] == 0
    assert record["report"]["headline"]["value"] == 1.0

    run_id = record["run_id"]
    stored = client.get(f"/roadcast/runs/{run_id}", headers=AUTH).json()
    assert stored["report"]["status"] == "success"
    assert stored["manifest"]["subcommand"] == "plan-mincost"

    listing = client.get("/roadcast/runs", headers=AUTH).json()
    assert listing["count"] == 1 and listing["runs"][0]["run_id"] == run_id

    replayed = client.post(f"/roadcast/runs/{run_id}/replay", headers=AUTH).json()
    assert replayed["identical"] is True


def test_planner_failure_is_a_record(client, body):
    record = client.post("/roadcast/runs", json={**body, "lam": 0.9}, headers=AUTH).json()
    assert not record["ok"]
    assert record["exit_code"] == 4
    assert record["error"].startswith("INFEASIBLE")


def test_missing_lambda_is_rejected(client, body):
    del body["lam"]
    assert client.post("/roadcast/runs", json=body, headers=AUTH).status_code == 422


def test_unknown_and_malformed_run_ids(client):
    assert client.get("/roadcast/runs/nothere", headers=AUTH).status_code == 404
    assert client.get("/roadcast/runs/bad.id", headers=AUTH).status_code == 400


def test_sweep_endpoint(client, body):
    spec = {"base": body, "flag": "lambda", "values": [0.3, 0.5], "seeds": [0]}
    report = client.post("/roadcast/sweeps", json=spec, headers=AUTH).json()
    assert report["status"] == "success"
    assert [row["mean"] for row in report["rows"]] == [1.0, 1.0]
