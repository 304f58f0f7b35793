import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from snftransfer import (SystemState, myopic_policy, policy_iteration_average,
                         rpr_policy, two_step_policy)
from snftransfer.fixtures import example_instance
from snftransfer.service import create_app


@pytest.fixture(scope="module")
def client():
    app = create_app(example_instance(1))
    with TestClient(app) as c:
        yield c


def test_health_reports_version_and_instance(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert len(body["instance"]) == 12
    assert body["version"]


def test_instance_metadata(client):
    r = client.get("/instance")
    assert r.status_code == 200
    body = r.json()
    assert body["num_facilities"] == 2
    assert body["facility_labels"] == ["SNF1", "SNF2"]


def test_five_snf_fixture_labels_and_type_names():
    from snftransfer.fixtures import case_instance

    app = create_app(case_instance("case5"))
    with TestClient(app) as c:
        body = c.get("/instance").json()
        assert body["facility_labels"] == ["A", "B", "C", "D", "E"]
        assert body["type_labels"] == ["UM", "JS", "CM", "CS"]
        r = c.post("/recommend", json={"patient_type": "CM",
                                       "availability": [True] * 5,
                                       "policy": "myopic"})
        assert r.status_code == 200
        assert r.json()["facility"] == "D"


def test_policies_before_and_after_solve(client):
    before = client.get("/policies").json()["policies"]
    assert {"myopic", "rpr", "two_step"} <= set(before)
    assert "optimal" not in before
    r = client.post("/solve", json={})
    assert r.status_code == 200
    assert r.json()["gain"] == pytest.approx(2.9, abs=0.1)
    after = client.get("/policies").json()["policies"]
    assert "optimal" in after


def test_recommend_published_actions(client):
    client.post("/solve", json={})
    req = {"patient_type": 2, "availability": [True, True], "policy": "myopic"}
    r = client.post("/recommend", json=req)
    assert r.status_code == 200
    assert r.json()["action"] == 2
    assert r.json()["facility"] == "SNF2"
    r = client.post("/recommend", json={**req, "policy": "optimal"})
    assert r.json()["action"] == 1


def test_recommend_loss_flagged(client):
    r = client.post("/recommend", json={"patient_type": 1,
                                        "availability": [False, False],
                                        "policy": "rpr"})
    assert r.status_code == 200
    assert r.json()["action"] == 0
    assert r.json()["loss"] is True
    assert r.json()["facility"] == "loss"


def test_recommend_includes_score_breakdowns(client):
    r = client.post("/recommend", json={"patient_type": 1,
                                        "availability": [True, True],
                                        "policy": "rpr"})
    expl = r.json()["explanation"]
    assert expl["feasible_actions"] == [0, 1, 2]
    chosen = r.json()["action"]
    totals = {int(a): sb["total"] for a, sb in expl["rpr"].items()}
    assert min(totals, key=totals.get) == chosen


def test_malformed_body_is_400(client):
    r = client.post("/recommend", content=b"{not json",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400


def test_semantic_errors_are_422(client):
    r = client.post("/recommend", json={"patient_type": 9,
                                        "availability": [True, True],
                                        "policy": "myopic"})
    assert r.status_code == 422
    r = client.post("/recommend", json={"patient_type": 1,
                                        "availability": [True],
                                        "policy": "myopic"})
    assert r.status_code == 422
    r = client.post("/recommend", json={"patient_type": 1,
                                        "availability": [True, True],
                                        "policy": "sorcery"})
    assert r.status_code == 422


def test_recommendations_consistent_with_library_policies():
    inst = example_instance(2)
    app = create_app(inst)
    with TestClient(app) as c:
        c.post("/solve", json={})
        expected = {
            "myopic": myopic_policy(inst),
            "rpr": rpr_policy(inst),
            "two_step": two_step_policy(inst, 0.75),
            "optimal": policy_iteration_average(inst).policy,
        }
        for name, pol in expected.items():
            for i in range(1, inst.num_types + 1):
                for bits in range(inst.num_avail_patterns):
                    avail = [bool((bits >> (inst.num_facilities - j)) & 1)
                             for j in range(1, inst.num_facilities + 1)]
                    r = c.post("/recommend", json={"patient_type": i,
                                                   "availability": avail,
                                                   "policy": name})
                    st = SystemState(patient=i,
                                     avail=(1, *(1 if b else 0 for b in avail)))
                    assert r.json()["action"] == pol.action(inst, st), (name, st)


def test_concurrent_identical_requests_agree(client):
    req = {"patient_type": 2, "availability": [True, True], "policy": "myopic"}
    results = []

    def hit():
        results.append(client.post("/recommend", json=req).json()["action"])

    threads = [threading.Thread(target=hit) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == [2] * 8


def test_decision_log_appended(tmp_path):
    log = tmp_path / "decisions.csv"
    app = create_app(example_instance(1), decision_log=str(log))
    with TestClient(app) as c:
        c.post("/recommend", json={"patient_type": 1, "availability": [True, False],
                                   "policy": "myopic"})
        c.post("/recommend", json={"patient_type": 2, "availability": [False, False],
                                   "policy": "rpr"})
    lines = log.read_text().strip().splitlines()
    assert len(lines) == 2
    first = lines[0].split(",")
    assert first[1:] == ["1", "10", "myopic", "1"]
    assert lines[1].split(",")[1:] == ["2", "00", "rpr", "0"]


def test_real_socket_round_trip():
    """The advisor must work over an actual HTTP connection, not only the
    in-process test transport."""
    import socket

    import uvicorn

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    app = create_app(example_instance(1))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started:
            if time.time() > deadline:
                raise TimeoutError("server did not start")
            time.sleep(0.02)
        base = f"http://127.0.0.1:{port}"
        assert httpx.get(base + "/health", timeout=5).status_code == 200
        r = httpx.post(base + "/recommend",
                       json={"patient_type": 2, "availability": [True, True],
                             "policy": "myopic"}, timeout=5)
        assert r.json()["action"] == 2
    finally:
        server.should_exit = True
        thread.join(timeout=5)
