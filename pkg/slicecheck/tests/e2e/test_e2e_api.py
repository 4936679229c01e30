import pytest

from slicecheck.cluster import ResultsStore
from slicecheck.intents import Outcome, Verdict, VerdictStats

pytestmark = pytest.mark.e2e

H1 = {"vmName": "h1", "ip": "1", "mac": "", "modelKey": "a"}
H3 = {"vmName": "h3", "ip": "3", "mac": "", "modelKey": "c"}
REACH = {"id": "api-r", "type": 7, "intent_parameters": {"origin_set": [H1], "target_set": [H3]}}


def test_register_and_list_intents(client):
    resp = client.post("/intents", json=[REACH, {"id": "api-loops", "type": 1}])
    assert resp.status_code == 201
    assert resp.get_json()["registered"] == ["api-r", "api-loops"]
    listed = client.get("/intents").get_json()
    ids = [d["id"] for d in listed["intents"]]
    assert {"api-r", "api-loops"} <= set(ids)


def test_register_rejects_bad_documents(client):
    resp = client.post("/intents", json={"id": "x"})
    assert resp.status_code == 400
    body = resp.get_json()
    assert body["ok"] is False
    assert body["kind"] == "SchemaViolation"

    resp = client.post("/intents", json={"id": "x", "type": 42})
    assert resp.get_json()["kind"] == "UnknownIntentType"

    resp = client.post("/intents", data="not json", content_type="text/plain")
    assert resp.status_code == 400


def test_verify_a_posted_intent(client, api_store):
    resp = client.post("/verify", json=REACH)
    assert resp.status_code == 200
    body = resp.get_json()
    assert body["verdict"]["outcome"] == "Holds"
    assert body["rules_modeled"] == 3


def test_verify_a_registered_intent(client, api_store):
    client.post("/intents", json=REACH)
    resp = client.post("/verify", json={"intent_id": "api-r"})
    assert resp.status_code == 200
    assert resp.get_json()["verdict"]["intent_id"] == "api-r"


def test_verify_unknown_intent_id(client, api_store):
    resp = client.post("/verify", json={"intent_id": "never-registered"})
    assert resp.status_code == 404
    assert resp.get_json()["kind"] == "NotFound"


def test_verdicts_and_report(client, temp_dirs):
    results = ResultsStore(temp_dirs["results"])
    results.write_verdict(1, Verdict("a", Outcome.HOLDS, stats=VerdictStats(1, 2, 3)))
    results.write_verdict(
        1,
        Verdict("b", Outcome.VIOLATED, witness={"vertices": [], "terminal": {"kind": "Dropped"}}),
    )

    body = client.get("/verdicts/1").get_json()
    assert set(body["verdicts"]) >= {"a", "b"}
    assert body["verdicts"]["b"]["outcome"] == "Violated"
    assert client.get("/verdicts/1/a").get_json()["verdict"]["outcome"] == "Holds"
    assert client.get("/verdicts/1/zzz").status_code == 404
    assert client.get("/verdicts/99").status_code == 404

    resp = client.get("/report.pdf?generation=1")
    assert resp.status_code == 200
    assert resp.mimetype == "application/pdf"
    assert resp.data.startswith(b"%PDF")


def test_report_without_verdicts(app, client, tmp_path, monkeypatch):
    monkeypatch.setitem(app.config, "RESULTS_ROOT", str(tmp_path / "empty"))
    resp = client.get("/report.pdf")
    assert resp.status_code == 404
    assert resp.get_json()["ok"] is False
