import numpy as np
import pytest
from fastapi.testclient import TestClient

from drgl import sbm_graph, save_graph
from drgl.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc") / "sbm"
    g, labels = sbm_graph(n=60, classes=2, p_intra=0.2, p_inter=0.02,
                          feature_dim=4, feature_shift=1.0, seed=0)
    save_graph(root, g, labels)
    return root


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_inspect(client, dataset):
    resp = client.post("/datasets/inspect", json={"path": str(dataset)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n"] == 60 and body["M"] == 2
    assert body["directed_edges"] == 2 * body["undirected_pairs"]
    missing = client.post("/datasets/inspect", json={"path": str(dataset) + "x"})
    assert missing.status_code == 400
    assert missing.json()["detail"]["code"] == "config_error"


def test_lfd_solver_endpoint(client):
    req = {
        "embeddings": [[0.0, 0.0], [4.0, 0.0]],
        "labels": [0, 1],
        "dro": {"radii": 0.0, "radius_rule": "absolute"},
        "return_gradients": True,
    }
    body = client.post("/solver/lfd", json=req).json()
    assert body["total_margin"] == pytest.approx(2.0)
    assert body["worst_case_risk"] == pytest.approx(0.0)
    assert np.array(body["weights"]) == pytest.approx(np.eye(2))
    assert body["embedding_gradient"] is not None
    bad = client.post("/solver/lfd", json={"embeddings": [[0.0]], "labels": [0, 1]})
    assert bad.status_code == 400


def test_eval_endpoint_roundtrip(client, dataset):
    cfg = {"dataset": str(dataset), "shots": 3, "repetitions": 2,
           "train": {"epochs": 2, "learning_rate": 1e-3,
                     "dro": {"radius_fraction": 0.3}},
           "classifier": {"kind": "knn", "k": 3}}
    a = client.post("/experiments/eval", json=cfg).json()
    b = client.post("/experiments/eval", json=cfg).json()
    assert a["table"] == b["table"]
    assert a["report_lines"] == b["report_lines"]
    assert a["table"][0]["mean"] == pytest.approx(
        np.mean(a["table"][0]["accuracies"]))
    assert a["checkpoint_b64"]


def test_validation_errors_are_422(client, dataset):
    cfg = {"dataset": str(dataset), "shots": 0}
    assert client.post("/experiments/eval", json=cfg).status_code == 422
    cfg2 = {"dataset": str(dataset), "mode": "other"}
    assert client.post("/experiments/eval", json=cfg2).status_code == 422


def test_sweep_endpoint(client, dataset):
    cfg = {"dataset": str(dataset), "shots": 3, "repetitions": 1,
           "train": {"epochs": 2, "learning_rate": 1e-3,
                     "dro": {"radius_fraction": 0.3}},
           "classifier": {"kind": "knn", "k": 3},
           "sweep": {"noise_grid": [{"sigma_multiplier": 0.0},
                                    {"edge_removal_rate": 0.3}],
                     "modes": ["vanilla", "drgl"]}}
    body = client.post("/experiments/sweep", json=cfg).json()
    assert len(body["table"]) == 4


def test_viz_endpoint(client, dataset):
    cfg = {"dataset": str(dataset), "shots": 3, "repetitions": 1,
           "train": {"epochs": 2, "learning_rate": 1e-3,
                     "dro": {"radius_fraction": 0.3}},
           "classifier": {"kind": "softmax", "head_epochs": 30}}
    body = client.post("/viz", json=cfg).json()
    assert body["viz_csv"].startswith("node,x,y,true,predicted")
    viz_lines = [l for l in body["report_lines"] if l["record"] == "viz"]
    assert len(viz_lines) == 1 and viz_lines[0]["fallback"] is False


def test_selftest_endpoint(client):
    body = client.post("/selftest", json={}).json()
    assert body["passed"] is True
    names = {c["name"] for c in body["checks"]}
    assert "zero_budget_identity" in names
