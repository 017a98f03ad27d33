from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from reqqa.service import create_app


@pytest.fixture
def client(evaluated_store):
    app = create_app(evaluated_store)
    with TestClient(app) as test_client:
        yield test_client


def auth(reviewer="alice"):
    return {"Authorization": f"Bearer {reviewer}"}


def open_session(client, reviewer="alice"):
    response = client.post("/v1/sessions", json={"project_id": "stopwatch"}, headers=auth(reviewer))
    assert response.status_code == 201
    return response.json()


def submit(client, session_id, task, verdict="Fulfills", reviewer="alice", **fields):
    body = {
        "requirement_id": task["requirement_id"],
        "characteristic": task["characteristic"],
        "verdict": verdict,
        **fields,
    }
    return client.post(f"/v1/sessions/{session_id}/votes", json=body, headers=auth(reviewer))


def drive_phase(client, session_id, phase, reviewer="alice"):
    while True:
        envelope = client.get(f"/v1/sessions/{session_id}/next-task", headers=auth(reviewer)).json()
        if envelope["phase"] != phase or envelope["task"] is None:
            return envelope
        task = envelope["task"]
        fields = {}
        if phase == "Bound":
            fields["plausibility"] = "Plausible"
            if "llm_improved_text" in task:
                fields["improvement_rating"] = "Improvement"
        response = submit(client, session_id, task, reviewer=reviewer, **fields)
        assert response.status_code == 201, response.text


def test_projects_listing(client):
    body = client.get("/v1/projects").json()
    assert body["projects"][0]["id"] == "stopwatch"
    assert body["projects"][0]["requirement_count"] == 10
    assert body["projects"][0]["evaluated"] is True


def test_characteristics_endpoint_serves_definitions(client):
    body = client.get("/v1/characteristics").json()
    assert len(body["characteristics"]) == 9
    assert body["characteristics"][6]["key"] == "Singular"
    assert "only one aspect" in body["characteristics"][6]["definition"]


def test_session_requires_token(client):
    response = client.post("/v1/sessions", json={"project_id": "stopwatch"})
    assert response.status_code == 401


def test_reviewer_body_must_match_token(client):
    response = client.post(
        "/v1/sessions",
        json={"project_id": "stopwatch", "reviewer_id": "mallory"},
        headers=auth("alice"),
    )
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "reviewer-mismatch"


def test_unknown_project_404(client):
    response = client.post("/v1/sessions", json={"project_id": "ghost"}, headers=auth())
    assert response.status_code == 404


def test_unevaluated_project_rejected(store, stopwatch):
    store.save_project(stopwatch)
    with TestClient(create_app(store)) as client:
        response = client.post("/v1/sessions", json={"project_id": "stopwatch"}, headers=auth())
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "project-not-evaluated"


def test_independent_task_payload_has_no_model_keys(client):
    session = open_session(client)
    envelope = client.get(
        f"/v1/sessions/{session['session_id']}/next-task", headers=auth()
    ).json()
    task = envelope["task"]
    assert envelope["phase"] == "Independent"
    assert set(task) == {
        "session_id",
        "phase",
        "requirement_id",
        "requirement_text",
        "characteristic",
        "characteristic_definition",
        "scope_description",
        "position",
        "total",
    }


def test_assessment_fetch_forbidden_during_independent(client):
    session = open_session(client)
    response = client.get(
        f"/v1/sessions/{session['session_id']}/assessment",
        params={"requirement_id": "r1", "characteristic": "Singular"},
        headers=auth(),
    )
    assert response.status_code == 403
    assert response.json()["error"]["code"] == "phase-violation"


def test_duplicate_vote_is_409(client):
    session = open_session(client)
    envelope = client.get(f"/v1/sessions/{session['session_id']}/next-task", headers=auth()).json()
    task = envelope["task"]
    assert submit(client, session["session_id"], task).status_code == 201
    response = submit(client, session["session_id"], task)
    assert response.status_code == 409
    assert response.json()["error"]["code"] == "duplicate-vote"


def test_foreign_session_is_unauthorized(client):
    session = open_session(client, "alice")
    response = client.get(
        f"/v1/sessions/{session['session_id']}/next-task", headers=auth("bob")
    )
    assert response.status_code == 401


def test_token_map_restricts_and_renames(evaluated_store):
    app = create_app(evaluated_store, token_map={"secret-token": "alice"})
    with TestClient(app) as client:
        refused = client.post(
            "/v1/sessions", json={"project_id": "stopwatch"}, headers=auth("alice")
        )
        assert refused.status_code == 401
        accepted = client.post(
            "/v1/sessions",
            json={"project_id": "stopwatch"},
            headers={"Authorization": "Bearer secret-token"},
        )
        assert accepted.status_code == 201
        assert accepted.json()["session_id"].endswith("alice")


def test_full_wire_flow_blindness_and_phase_flip(client, evaluated_store):
    matrix = evaluated_store.load_matrix("stopwatch")
    explanations = [a.explanation for a in matrix.values()]
    improvements = [a.improved_text for a in matrix.values() if a.improved_text]

    session = open_session(client)
    session_id = session["session_id"]
    transcript: list[str] = []

    while True:
        raw = client.get(f"/v1/sessions/{session_id}/next-task", headers=auth())
        transcript.append(raw.text)
        envelope = raw.json()
        if envelope["phase"] != "Independent":
            break
        vote_response = submit(client, session_id, envelope["task"], verdict="Violates")
        transcript.append(vote_response.text)
        progress = client.get(f"/v1/sessions/{session_id}/progress", headers=auth())
        transcript.append(progress.text)

    independent_traffic = "".join(transcript[:-1])
    for secret in explanations + improvements:
        assert json.dumps(secret)[1:-1] not in independent_traffic

    # the first bound task carries all three model fields
    first_bound = json.loads(transcript[-1])
    assert first_bound["phase"] == "Bound"
    task = first_bound["task"]
    assert task["llm_verdict"] in ("Fulfills", "Violates")
    assert task["llm_explanation"] in explanations
    assert task["llm_improved_text"] in improvements

    drive_phase(client, session_id, "Bound")
    progress = client.get(f"/v1/sessions/{session_id}/progress", headers=auth()).json()
    assert progress["phase"] == "Completed"
    assert progress["bound"] == {"done": 90, "total": 90}


def test_votes_carry_phase_tags_in_store(client, evaluated_store):
    session = open_session(client, "carol")
    drive_phase(client, session["session_id"], "Independent", reviewer="carol")
    votes = evaluated_store.load_votes("stopwatch", reviewer_id="carol")
    assert len(votes) == 90
    assert {v.phase.value for v in votes} == {"Independent"}


def test_invalid_enum_value_is_400(client):
    session = open_session(client)
    envelope = client.get(f"/v1/sessions/{session['session_id']}/next-task", headers=auth()).json()
    response = submit(client, session["session_id"], envelope["task"], verdict="Maybe")
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "invalid-value"


def test_report_endpoint_serves_markdown_and_csv(client):
    markdown = client.get("/v1/projects/stopwatch/report")
    assert markdown.status_code == 200
    assert "Requirements quality report" in markdown.text
    assert "pending" in markdown.text  # no ground truth yet

    csv_report = client.get("/v1/projects/stopwatch/report", params={"format": "csv"})
    assert csv_report.status_code == 200
    first_line = csv_report.text.splitlines()[0]
    assert first_line == "project_id,requirement_id,characteristic,source,label"
    assert len(csv_report.text.splitlines()) == 91  # header + 90 llm rows
