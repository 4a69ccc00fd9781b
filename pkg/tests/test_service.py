"""Decision service: endpoint behavior, error codes, WAL recovery, parity."""

import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from adboin12.engine import TrialState
from adboin12.quasibeta import OutcomeCounts2x2
from adboin12.rules import DesignParams
from adboin12.service import ConductService, make_server

PARAMS = DesignParams(num_doses=5, max_n=18, stop_rule_enabled=False)


@pytest.fixture()
def server():
    srv = make_server(PARAMS, host="127.0.0.1", port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _url(srv, path):
    return f"http://127.0.0.1:{srv.server_address[1]}{path}"


def _get(srv, path):
    with urllib.request.urlopen(_url(srv, path)) as resp:
        return resp.status, json.loads(resp.read())


def _post(srv, path, body):
    req = urllib.request.Request(
        _url(srv, path),
        data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_design_and_tables_endpoints(server):
    status, design = _get(server, "/design")
    assert status == 200
    assert design["params"]["num_doses"] == 5
    assert design["schema_version"] == 1
    status, tables = _get(server, "/tables")
    assert status == 200
    assert [r["n"] for r in tables["safety"]] == [3, 6, 9, 12, 15]
    assert {tuple(r.values()) for r in tables["expansion"]} >= {(3, 0, 1), (9, 3, 5)}
    assert sorted(r["rank"] for r in tables["rds"]) == list(range(1, len(tables["rds"]) + 1))


def test_cohort_then_decision_matches_engine(server):
    status, reply = _post(server, "/cohort", {"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    assert status == 200
    assert reply["decision"]["action"] == "escalate"
    assert reply["decision"]["next_dose"] == 2

    status, rec = _get(server, "/decision")
    assert status == 200
    assert rec["next_dose"] == 2
    assert rec["next_cohort_size"] == 3

    # parity with a locally reconstructed engine fed the same cohort
    local = TrialState(PARAMS)
    local.record_cohort(1, OutcomeCounts2x2(a=1, c=2))
    local.next_decision()
    status, remote_state = _get(server, "/state")
    assert remote_state["doses"] == local.to_dict()["doses"]
    assert remote_state["pending_dose"] == local.pending_dose


def test_whatif_does_not_mutate_state(server):
    _post(server, "/cohort", {"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    _, before = _get(server, "/state")
    status, preview = _post(server, "/whatif", {"dose": 2, "a": 2, "b": 0, "c": 1, "d": 0})
    assert status == 200
    assert preview["decision"]["action"] in ("stay", "escalate", "deescalate")
    _, after = _get(server, "/state")
    assert before == after


def test_whatif_matches_committed_outcome(server):
    _post(server, "/cohort", {"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    body = {"dose": 2, "a": 2, "b": 0, "c": 1, "d": 0}
    _, preview = _post(server, "/whatif", body)
    _, committed = _post(server, "/cohort", body)
    assert preview["decision"] == committed["decision"]


def test_out_of_order_submissions_get_409(server):
    status, err = _post(server, "/cohort", {"dose": 3, "a": 0, "b": 0, "c": 3, "d": 0})
    assert status == 409
    assert err["error"]["code"] == "DOSE_MISMATCH"
    status, err = _post(server, "/cohort", {"dose": 1, "a": 4, "b": 0, "c": 0, "d": 0})
    assert status == 409
    assert err["error"]["code"] == "COHORT_SIZE_MISMATCH"


def test_schema_violations_get_400(server):
    status, err = _post(server, "/cohort", {"dose": 1, "a": 1})
    assert status == 400
    assert err["error"]["code"] == "SCHEMA_INVALID"
    status, err = _post(server, "/cohort", {"dose": 1, "a": -1, "b": 0, "c": 4, "d": 0})
    assert status == 400
    req = urllib.request.Request(
        _url(server, "/cohort"), data=b"{not json", method="POST"
    )
    try:
        urllib.request.urlopen(req)
        raised = False
    except urllib.error.HTTPError as exc:
        raised = True
        assert exc.code == 400
        assert json.loads(exc.read())["error"]["code"] == "BAD_JSON"
    assert raised


def test_unknown_route_404(server):
    status, err = _post(server, "/nope", {})
    assert status == 404
    try:
        urllib.request.urlopen(_url(server, "/nada"))
        raised = False
    except urllib.error.HTTPError as exc:
        raised = True
        assert exc.code == 404
    assert raised


def test_post_on_stopped_trial_conflicts_but_whatif_previews(server):
    _post(server, "/cohort", {"dose": 1, "a": 0, "b": 3, "c": 0, "d": 0})  # 3/3 tox
    _, rec = _get(server, "/decision")
    assert rec["trial_stopped"] is True
    status, err = _post(server, "/cohort", {"dose": 1, "a": 0, "b": 0, "c": 3, "d": 0})
    assert status == 409
    assert err["error"]["code"] == "TRIAL_STOPPED"
    status, preview = _post(server, "/whatif", {"dose": 1, "a": 3, "b": 0, "c": 0, "d": 0})
    assert status == 200
    assert preview["decision"] is None
    assert preview["trial_stopped"] is True


def test_reset_restores_fresh_trial(server):
    _post(server, "/cohort", {"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    status, reply = _post(server, "/reset", {})
    assert status == 200
    assert reply["state"]["enrolled_total"] == 0
    _, rec = _get(server, "/decision")
    assert rec["next_dose"] == PARAMS.start_dose
    assert rec["next_cohort_size"] == PARAMS.base_cohort


def test_audit_endpoint_lists_events(server):
    _post(server, "/cohort", {"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    _, audit = _get(server, "/audit")
    events = [entry["event"] for entry in audit["audit"]]
    assert events == ["cohort", "decision"]


# ---------------------------------------------------------------------------
# write-ahead log recovery
# ---------------------------------------------------------------------------

def test_wal_replay_reconstructs_state(tmp_path):
    service = ConductService(PARAMS, state_dir=str(tmp_path))
    service.cohort({"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    service.cohort({"dose": 2, "a": 2, "b": 0, "c": 1, "d": 0})
    expected = service.get_state()

    recovered = ConductService(PARAMS, state_dir=str(tmp_path))
    got = recovered.get_state()
    # timestamps differ between runs; decisions and counts must not
    for doc in (expected, got):
        for entry in doc["audit"]:
            entry.pop("ts", None)
    assert got == expected


def test_wal_records_reset(tmp_path):
    service = ConductService(PARAMS, state_dir=str(tmp_path))
    service.cohort({"dose": 1, "a": 1, "b": 0, "c": 2, "d": 0})
    service.reset()
    recovered = ConductService(PARAMS, state_dir=str(tmp_path))
    assert recovered.get_state()["enrolled_total"] == 0
    lines = (tmp_path / "wal.jsonl").read_text().strip().splitlines()
    assert [json.loads(l)["op"] for l in lines] == ["cohort", "reset"]


def test_rejected_mutations_never_reach_wal(tmp_path):
    service = ConductService(PARAMS, state_dir=str(tmp_path))
    try:
        service.cohort({"dose": 4, "a": 1, "b": 0, "c": 2, "d": 0})
    except Exception:
        pass
    assert not (tmp_path / "wal.jsonl").exists() or not (
        tmp_path / "wal.jsonl"
    ).read_text().strip()


# ---------------------------------------------------------------------------
# randomized decision parity: service vs direct engine
# ---------------------------------------------------------------------------

def test_service_engine_parity_on_random_sessions():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        service = ConductService(PARAMS)
        engine = TrialState(PARAMS)
        while engine.status == "active":
            size = engine.pending_size
            tox = rng.random(size) < 0.3
            eff = rng.random(size) < 0.5
            a = int(np.count_nonzero(eff & ~tox))
            b = int(np.count_nonzero(eff & tox))
            d = int(np.count_nonzero(~eff & tox))
            body = {"dose": engine.pending_dose, "a": a, "b": b, "c": size - a - b - d, "d": d}
            reply = service.cohort(body)
            engine.record_cohort(body["dose"], OutcomeCounts2x2(a=a, b=b, c=body["c"], d=d))
            decision = engine.next_decision()
            assert reply["decision"] == decision.to_dict()
