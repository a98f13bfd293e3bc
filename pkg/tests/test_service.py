import numpy as np
import pytest
from fastapi.testclient import TestClient

from ncsched.config import experiment_to_dict, load_experiment
from ncsched.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def tiny_payload():
    cfg = load_experiment(
        "experiment1",
        overrides=(
            "env.horizon=20",
            "dqn.hidden_units=16",
            "dqn.replay_capacity=128",
            "dqn.warmup_transitions=16",
            "dqn.minibatch_size=8",
            "training.epochs=2",
            "training.monte_carlo_runs=2",
            "training.master_seed=5",
        ),
    )
    return experiment_to_dict(cfg)


def test_health(client):
    data = client.get("/health").json()
    assert data["status"] == "ok"
    assert data["service"] == "ncsched"


def test_riccati_endpoint(client):
    subsystem = {
        "name": "scalar",
        "A": [[1.2]], "B": [[1.0]], "C": [[1.0]],
        "W": [[0.1]], "V": [[0.1]],
        "x0_mean": [1.0], "X0": [[1.0]],
        "Q": [[1.0]], "R": [[1.0]], "Qf": [[1.0]],
    }
    data = client.post(
        "/riccati", json={"subsystem": subsystem, "horizon": 1, "include_sequences": True}
    ).json()
    assert data["S0"][0][0] == pytest.approx(1.72, abs=1e-12)
    assert data["L0"][0][0] == pytest.approx(0.6, abs=1e-12)
    assert data["Gamma0"][0][0] == pytest.approx(0.72, abs=1e-12)
    assert data["spectral_radius"] == pytest.approx(1.2, abs=1e-6)
    assert len(data["S"]) == 2 and len(data["L"]) == 1


def test_oracle_endpoint_matches_library(client, tiny_payload):
    from ncsched.baselines import PeriodicSchedule, expected_schedule_loss
    from ncsched.config import experiment_from_dict
    from ncsched.env import build_gain_schedules

    resp = client.post(
        "/oracle",
        json={"env": tiny_payload["env"], "schedule": {"sequence": [[1], [2], [3]]}},
    )
    assert resp.status_code == 200
    data = resp.json()
    cfg = experiment_from_dict(tiny_payload)
    gains = build_gain_schedules(cfg.env)
    expected = expected_schedule_loss(
        cfg.env, gains, PeriodicSchedule(((1,), (2,), (3,)))
    )
    assert data["expected_loss"] == pytest.approx(expected, rel=1e-12)
    assert data["expected_loss"] == pytest.approx(
        data["baseline_loss"] + data["error_term"], rel=1e-12
    )


def test_oracle_endpoint_rejects_bad_subset(client, tiny_payload):
    resp = client.post(
        "/oracle",
        json={"env": tiny_payload["env"], "schedule": {"sequence": [[1, 2]]}},
    )
    assert resp.status_code == 400
    assert "subset" in resp.json()["detail"]


def test_search_endpoint(client, tiny_payload):
    resp = client.post("/search", json={"env": tiny_payload["env"], "p_min": 2, "p_max": 3})
    assert resp.status_code == 200
    data = resp.json()
    assert data["candidates"] == 9 + 27
    assert len(data["per_period"]) == 2
    assert data["expected_loss"] == min(r["expected_loss"] for r in data["per_period"])


def test_search_budget_guard(client, tiny_payload):
    resp = client.post(
        "/search", json={"env": tiny_payload["env"], "p_min": 2, "p_max": 11, "budget": 10}
    )
    assert resp.status_code == 400
    assert "budget" in resp.json()["detail"].lower()


def test_train_eval_allocate_roundtrip(client, tiny_payload, tmp_path):
    out = tmp_path / "svc-train"
    resp = client.post(
        "/train", json={"config": tiny_payload, "wait": True, "output_dir": str(out)}
    )
    assert resp.status_code == 200
    job = resp.json()
    assert job["status"] == "done"
    ckpt_path = job["result"]["checkpoint"]

    resp = client.post(
        "/eval", json={"config": tiny_payload, "checkpoint": ckpt_path, "runs": 2}
    )
    assert resp.status_code == 200
    data = resp.json()
    assert np.isfinite(data["mean_loss"])
    assert len(data["allocation"]) == 3
    assert sum(data["allocation"]) == pytest.approx(1.0)
    assert data["spectral_radii"][0] > 1.0 > data["spectral_radii"][1]

    resp = client.post(
        "/allocate", json={"checkpoint": ckpt_path, "error_vector": [0.5] * 6}
    )
    assert resp.status_code == 200
    alloc = resp.json()
    assert alloc["action"] in (0, 1, 2)
    assert len(alloc["subset"]) == 1
    assert len(alloc["q_values"]) == 3

    resp = client.post(
        "/allocate", json={"checkpoint": ckpt_path, "error_vector": [0.5] * 4}
    )
    assert resp.status_code == 400


def test_async_job_lifecycle(client, tiny_payload, tmp_path):
    out = tmp_path / "svc-async"
    resp = client.post(
        "/train", json={"config": tiny_payload, "wait": False, "output_dir": str(out)}
    )
    assert resp.status_code == 200
    job_id = resp.json()["id"]
    import time

    for _ in range(200):
        status = client.get(f"/jobs/{job_id}").json()
        if status["status"] in ("done", "failed"):
            break
        time.sleep(0.05)
    assert status["status"] == "done"
    assert status["result"]["epochs"] == 2

    assert client.get("/jobs/nope").status_code == 404


def test_mc_endpoint(client, tiny_payload, tmp_path):
    resp = client.post(
        "/mc",
        json={"config": tiny_payload, "wait": True, "output_dir": str(tmp_path / "svc-mc")},
    )
    assert resp.status_code == 200
    result = resp.json()["result"]
    assert result["runs"] == 2
    assert result["epochs"] == 2


def test_eval_shape_mismatch_rejected(client, tiny_payload, tmp_path):
    out = tmp_path / "svc-train2"
    job = client.post(
        "/train", json={"config": tiny_payload, "wait": True, "output_dir": str(out)}
    ).json()
    bigger = dict(tiny_payload)
    bigger = {**tiny_payload, "env": {**tiny_payload["env"], "channels": 2}}
    resp = client.post(
        "/eval",
        json={"config": bigger, "checkpoint": job["result"]["checkpoint"], "runs": 1},
    )
    assert resp.status_code == 400


def test_invalid_config_rejected(client, tiny_payload):
    bad = {**tiny_payload, "dqn": {**tiny_payload["dqn"], "discount": 1.5}}
    resp = client.post("/train", json={"config": bad, "wait": True})
    assert resp.status_code == 400
    assert "discount" in resp.json()["detail"]
