"""HTTP API for the review workflow.

Thin layer over ReviewProtocol: every state change routes through protocol
operations and the service adds no rules of its own. Phase blindness is a
wire-level guarantee here — independent-phase payloads are built without the
model fields, so no serialization path can leak them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import ProtocolError, ReqQaError
from .model import (
    Characteristic,
    ImprovementRating,
    Phase,
    Plausibility,
    ReviewerVote,
    VoteVerdict,
    characteristic_catalog,
)
from .protocol import ReviewProtocol
from .reports import render_csv, render_markdown
from .store import Store

_STATUS_BY_CODE = {
    "unknown-project": 404,
    "unknown-session": 404,
    "missing-cell": 404,
    "phase-violation": 403,
    "duplicate-vote": 409,
    "unauthorized": 401,
}


class SessionRequest(BaseModel):
    project_id: str
    reviewer_id: Optional[str] = None


class VoteRequest(BaseModel):
    requirement_id: str
    characteristic: str
    verdict: str
    plausibility: Optional[str] = None
    improvement_rating: Optional[str] = None
    supersedes: Optional[str] = None


def _error_response(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=_STATUS_BY_CODE.get(code, 400),
        content={"error": {"code": code, "message": message}},
    )


def create_app(
    store: Store,
    token_map: Optional[dict[str, str]] = None,
    ui_dir: Optional[Path] = None,
    randomize_order: bool = False,
) -> FastAPI:
    app = FastAPI(title="reqqa review service", version="1")
    protocol = ReviewProtocol(store, randomize_order=randomize_order)

    def reviewer_from_token(authorization: Optional[str] = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise ProtocolError("unauthorized", "missing bearer token")
        token = authorization.removeprefix("Bearer ").strip()
        if not token:
            raise ProtocolError("unauthorized", "empty bearer token")
        if token_map is not None:
            if token not in token_map:
                raise ProtocolError("unauthorized", "unknown token")
            return token_map[token]
        return token

    @app.exception_handler(ReqQaError)
    async def handle_domain_error(request: Request, exc: ReqQaError) -> JSONResponse:
        message = exc.args[0] if exc.args else exc.code
        return _error_response(exc.code, message)

    @app.get("/v1/characteristics")
    def get_characteristics() -> dict:
        return {
            "characteristics": [
                {"key": entry.key.value, "definition": entry.definition}
                for entry in characteristic_catalog()
            ]
        }

    @app.get("/v1/projects")
    def list_projects() -> dict:
        projects = []
        for project_id in store.list_projects():
            project = store.load_project(project_id)
            projects.append(
                {
                    "id": project.id,
                    "name": project.name,
                    "scope_description": project.scope_description,
                    "requirement_count": len(project.requirements),
                    "evaluated": store.has_matrix(project.id),
                }
            )
        return {"projects": projects}

    @app.post("/v1/sessions", status_code=201)
    def open_session(
        body: SessionRequest, reviewer: str = Depends(reviewer_from_token)
    ) -> dict:
        if body.reviewer_id is not None and body.reviewer_id != reviewer:
            raise ProtocolError(
                "reviewer-mismatch", "reviewer_id does not match the bearer token"
            )
        session = protocol.open_session(body.project_id, reviewer)
        return protocol.progress(session) | {"project_id": session.project_id}

    @app.get("/v1/sessions/{session_id}/next-task")
    def next_task(session_id: str, reviewer: str = Depends(reviewer_from_token)) -> dict:
        session = _owned_session(session_id, reviewer)
        task = protocol.next_task(session)
        return {
            "phase": session.phase.value,
            "task": task.to_payload() if task else None,
        }

    @app.get("/v1/sessions/{session_id}/progress")
    def progress(session_id: str, reviewer: str = Depends(reviewer_from_token)) -> dict:
        return protocol.progress(_owned_session(session_id, reviewer))

    @app.get("/v1/sessions/{session_id}/assessment")
    def assessment(
        session_id: str,
        requirement_id: str,
        characteristic: str,
        reviewer: str = Depends(reviewer_from_token),
    ) -> dict:
        session = _owned_session(session_id, reviewer)
        cell = (requirement_id, _parse_enum(Characteristic, characteristic))
        record = protocol.assessment_for_cell(session, cell)
        payload = {
            "requirement_id": record.requirement_id,
            "characteristic": record.characteristic.value,
            "llm_verdict": record.verdict.value,
            "llm_explanation": record.explanation,
        }
        if record.improved_text is not None:
            payload["llm_improved_text"] = record.improved_text
        return payload

    @app.post("/v1/sessions/{session_id}/votes", status_code=201)
    def submit_vote(
        session_id: str, body: VoteRequest, reviewer: str = Depends(reviewer_from_token)
    ) -> dict:
        session = _owned_session(session_id, reviewer)
        vote = ReviewerVote(
            reviewer_id=session.reviewer_id,
            requirement_id=body.requirement_id,
            characteristic=_parse_enum(Characteristic, body.characteristic),
            phase=Phase(session.phase.value),
            verdict=_parse_enum(VoteVerdict, body.verdict),
            plausibility=_parse_enum(Plausibility, body.plausibility)
            if body.plausibility
            else None,
            improvement_rating=_parse_enum(ImprovementRating, body.improvement_rating)
            if body.improvement_rating
            else None,
        )
        updated = protocol.submit_vote(session, vote, supersedes=body.supersedes)
        return protocol.progress(updated)

    @app.get("/v1/projects/{project_id}/report")
    def report(project_id: str, phase: Optional[str] = None, format: str = "md") -> PlainTextResponse:
        project = store.load_project(project_id)
        matrix = store.load_matrix(project_id)
        ground_truths = {}
        for p in (Phase.INDEPENDENT, Phase.BOUND):
            labels = store.load_ground_truth(project_id, p)
            if labels:
                ground_truths[p] = {
                    (label.requirement_id, label.characteristic): label for label in labels
                }
        phase_filter = _parse_enum(Phase, phase.capitalize()) if phase else None
        if format == "csv":
            return PlainTextResponse(
                render_csv(project, matrix, ground_truths), media_type="text/csv"
            )
        bound_votes = [v for v in store.load_votes(project_id) if v.phase is Phase.BOUND]
        return PlainTextResponse(
            render_markdown(project, matrix, ground_truths, bound_votes, phase_filter),
            media_type="text/markdown",
        )

    def _owned_session(session_id: str, reviewer: str):
        session = protocol.get_session(session_id)
        if session.reviewer_id != reviewer:
            raise ProtocolError("unauthorized", "session belongs to a different reviewer")
        return session

    def _parse_enum(enum_cls, value: str):
        try:
            return enum_cls(value)
        except ValueError:
            raise ProtocolError(
                "invalid-value", f"{value!r} is not a valid {enum_cls.__name__}"
            ) from None

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
