"""Two-phase human review workflow.

Phase one (independent): the reviewer classifies every cell with no access to
any model output — the task payloads built here simply do not carry those
fields, and the one read operation that would expose them refuses before the
bound phase. Phase two (bound): the reviewer sees the model verdict,
explanation, and suggested improvement for the same cells, re-classifies, and
rates plausibility (and the improvement, where one exists).

Votes are append-only. A correction must name the vote it supersedes and is
stored as a new record; only the latest vote per (reviewer, cell, phase)
counts toward ground truth.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Optional

from .errors import ProtocolError
from .model import (
    Characteristic,
    GroundTruthLabel,
    LabelBasis,
    LlmAssessment,
    Phase,
    Project,
    ReviewerVote,
    SessionPhase,
    Verdict,
    VoteVerdict,
    characteristic_definition,
)
from .pipeline import CellId, cell_order
from .store import Store

DEFAULT_MIN_REVIEWERS = 4


def majority_label(
    votes: list[ReviewerVote], min_reviewers: int = DEFAULT_MIN_REVIEWERS
) -> GroundTruthLabel:
    """Derive one cell's ground-truth label from reviewer votes.

    A strict majority of Fulfills or Violates decides the label. Everything
    else — ties, strict Uncertain majorities, pluralities — conservatively
    labels the cell Violates: a cell reviewers cannot settle needs attention.
    """
    if len(votes) < min_reviewers:
        raise ProtocolError(
            "insufficient-reviewers",
            f"need at least {min_reviewers} votes, got {len(votes)}",
        )
    cells = {(v.requirement_id, v.characteristic, v.phase) for v in votes}
    if len(cells) != 1:
        raise ProtocolError("mixed-cells", "votes span more than one cell or phase")
    requirement_id, characteristic, _ = next(iter(cells))
    n = len(votes)
    fulfills = sum(1 for v in votes if v.verdict is VoteVerdict.FULFILLS)
    violates = sum(1 for v in votes if v.verdict is VoteVerdict.VIOLATES)
    if fulfills * 2 > n:
        label, basis = Verdict.FULFILLS, LabelBasis.STRICT_MAJORITY
    elif violates * 2 > n:
        label, basis = Verdict.VIOLATES, LabelBasis.STRICT_MAJORITY
    else:
        label, basis = Verdict.VIOLATES, LabelBasis.TIE_OR_UNCERTAIN_DEFAULT
    return GroundTruthLabel(
        requirement_id=requirement_id,
        characteristic=characteristic,
        label=label,
        vote_count=n,
        basis=basis,
    )


@dataclass(frozen=True)
class ReviewSession:
    session_id: str
    project_id: str
    reviewer_id: str
    phase: SessionPhase
    completed_independent: frozenset[CellId]
    completed_bound: frozenset[CellId]
    total_cells: int

    def completed(self, phase: Phase) -> frozenset[CellId]:
        return self.completed_independent if phase is Phase.INDEPENDENT else self.completed_bound


@dataclass(frozen=True)
class ReviewTask:
    """One cell presented for judgment; model fields only in the bound phase."""

    session_id: str
    phase: Phase
    requirement_id: str
    requirement_text: str
    characteristic: Characteristic
    characteristic_definition: str
    scope_description: str
    position: int
    total: int
    llm_verdict: Optional[Verdict] = None
    llm_explanation: Optional[str] = None
    llm_improved_text: Optional[str] = None

    def to_payload(self) -> dict:
        """Wire form. Model keys are absent — not blanked — outside Bound."""
        payload = {
            "session_id": self.session_id,
            "phase": self.phase.value,
            "requirement_id": self.requirement_id,
            "requirement_text": self.requirement_text,
            "characteristic": self.characteristic.value,
            "characteristic_definition": self.characteristic_definition,
            "scope_description": self.scope_description,
            "position": self.position,
            "total": self.total,
        }
        if self.phase is Phase.BOUND:
            payload["llm_verdict"] = self.llm_verdict.value if self.llm_verdict else None
            payload["llm_explanation"] = self.llm_explanation
            if self.llm_improved_text is not None:
                payload["llm_improved_text"] = self.llm_improved_text
        return payload


def _safe(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text) or "x"


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def latest_votes(
    votes: list[ReviewerVote], phase: Optional[Phase] = None
) -> dict[tuple[str, CellId], ReviewerVote]:
    """Latest vote per (reviewer, cell), honoring supersede lineage order."""
    out: dict[tuple[str, CellId], ReviewerVote] = {}
    for vote in votes:  # store returns votes in vote_id order (per-reviewer sequence)
        if phase is not None and vote.phase is not phase:
            continue
        out[(vote.reviewer_id, vote.cell)] = vote
    return out


class ReviewProtocol:
    """Session lifecycle, vote intake, and ground-truth derivation over a store."""

    def __init__(
        self,
        store: Store,
        min_reviewers: int = DEFAULT_MIN_REVIEWERS,
        randomize_order: bool = False,
    ) -> None:
        self.store = store
        self.min_reviewers = min_reviewers
        # off by default: every reviewer walks the shared questionnaire order;
        # when on, each reviewer gets their own stable shuffle (same in both
        # phases, stable across resumes)
        self.randomize_order = randomize_order
        # review runs against an evaluated, owned matrix; reads are snapshot
        # consistent, so one load per project per protocol instance suffices
        self._matrix_cache: dict[str, dict[CellId, LlmAssessment]] = {}

    def _task_order(self, project: Project, reviewer_id: str) -> list[CellId]:
        order = cell_order(project)
        if self.randomize_order:
            rng = random.Random(f"{project.id}:{reviewer_id}")
            rng.shuffle(order)
        return order

    def _matrix(self, project_id: str) -> dict[CellId, LlmAssessment]:
        if project_id not in self._matrix_cache:
            self._matrix_cache[project_id] = self.store.load_matrix(project_id)
        return self._matrix_cache[project_id]

    # -- sessions --

    def open_session(self, project_id: str, reviewer_id: str) -> ReviewSession:
        """Open (or resume) the reviewer's session for a project.

        Requires an evaluated project: the bound phase needs the persisted
        assessment matrix, so the protocol refuses to start without one.
        """
        project = self.store.load_project(project_id)
        if not self.store.has_matrix(project_id):
            raise ProtocolError(
                "project-not-evaluated",
                f"project {project_id!r} has no persisted assessment matrix",
            )
        session_id = f"{_safe(project_id)}__{_safe(reviewer_id)}"
        record = self.store.load_session(project_id, session_id)
        if record is None:
            self.store.save_session(
                project_id,
                session_id,
                {
                    "session_id": session_id,
                    "project_id": project_id,
                    "reviewer_id": reviewer_id,
                    "opened_at": _utc_now(),
                },
            )
        return self._build_session(project, session_id, reviewer_id)

    def _build_session(self, project: Project, session_id: str, reviewer_id: str) -> ReviewSession:
        order = cell_order(project)
        votes = self.store.load_votes(project.id, reviewer_id=reviewer_id)
        independent = frozenset(
            cell for (_, cell) in latest_votes(votes, Phase.INDEPENDENT)
        )
        bound = frozenset(cell for (_, cell) in latest_votes(votes, Phase.BOUND))
        cells = set(order)
        if cells - independent:
            phase = SessionPhase.INDEPENDENT
        elif cells - bound:
            phase = SessionPhase.BOUND
        else:
            phase = SessionPhase.COMPLETED
        return ReviewSession(
            session_id=session_id,
            project_id=project.id,
            reviewer_id=reviewer_id,
            phase=phase,
            completed_independent=independent & cells,
            completed_bound=bound & cells,
            total_cells=len(order),
        )

    def get_session(self, session_id: str) -> ReviewSession:
        for project_id in self.store.list_projects():
            record = self.store.load_session(project_id, session_id)
            if record is not None:
                project = self.store.load_project(project_id)
                return self._build_session(project, session_id, record["reviewer_id"])
        raise ProtocolError("unknown-session", f"no session {session_id!r}")

    # -- tasks --

    def next_task(self, session: ReviewSession) -> Optional[ReviewTask]:
        """The first unvoted cell of the current phase, or None when done."""
        if session.phase is SessionPhase.COMPLETED:
            return None
        phase = Phase(session.phase.value)
        project = self.store.load_project(session.project_id)
        order = self._task_order(project, session.reviewer_id)
        done = session.completed(phase)
        pending = [cell for cell in order if cell not in done]
        if not pending:
            return None
        requirement_id, characteristic = pending[0]
        requirement = project.requirement(requirement_id)
        task = ReviewTask(
            session_id=session.session_id,
            phase=phase,
            requirement_id=requirement_id,
            requirement_text=requirement.text,
            characteristic=characteristic,
            characteristic_definition=characteristic_definition(characteristic),
            scope_description=project.scope_description,
            position=len(order) - len(pending) + 1,
            total=len(order),
        )
        if phase is Phase.BOUND:
            assessment = self._assessment(session.project_id, (requirement_id, characteristic))
            task = replace(
                task,
                llm_verdict=assessment.verdict,
                llm_explanation=assessment.explanation,
                llm_improved_text=assessment.improved_text,
            )
        return task

    def _assessment(self, project_id: str, cell: CellId) -> LlmAssessment:
        matrix = self._matrix(project_id)
        if cell not in matrix:
            raise ProtocolError(
                "missing-cell",
                f"no persisted assessment for cell {cell[0]}/{cell[1].value}",
            )
        return matrix[cell]

    def assessment_for_cell(self, session: ReviewSession, cell: CellId) -> LlmAssessment:
        """Bound-phase read of the model's output for one cell.

        Refused during the independent phase: this is the enforcement point
        for reviewer blindness.
        """
        if session.phase is SessionPhase.INDEPENDENT:
            raise ProtocolError(
                "phase-violation",
                "model assessments are not visible during the independent phase",
            )
        return self._assessment(session.project_id, cell)

    # -- votes --

    def submit_vote(
        self,
        session: ReviewSession,
        vote: ReviewerVote,
        supersedes: Optional[str] = None,
    ) -> ReviewSession:
        """Validate, persist (append-only), and advance the session phase."""
        if vote.reviewer_id != session.reviewer_id:
            raise ProtocolError(
                "reviewer-mismatch",
                f"vote by {vote.reviewer_id!r} in session of {session.reviewer_id!r}",
            )
        if session.phase is SessionPhase.COMPLETED or vote.phase.value != session.phase.value:
            raise ProtocolError(
                "phase-mismatch",
                f"session is in phase {session.phase.value}, vote is for {vote.phase.value}",
            )
        project = self.store.load_project(session.project_id)
        if vote.cell not in set(cell_order(project)):
            raise ProtocolError(
                "unknown-cell", f"cell {vote.requirement_id}/{vote.characteristic.value} not in project"
            )
        field_violations = vote.field_violations()
        if field_violations:
            first = field_violations[0]
            raise ProtocolError(first.code, first.message)
        if vote.phase is Phase.BOUND:
            assessment = self._assessment(session.project_id, vote.cell)
            if assessment.improved_text is not None and vote.improvement_rating is None:
                raise ProtocolError(
                    "missing-improvement-rating",
                    "the model suggested an improvement for this cell; it must be rated",
                )
            if assessment.improved_text is None and vote.improvement_rating is not None:
                raise ProtocolError(
                    "unexpected-improvement-rating",
                    "no improvement was suggested for this cell",
                )

        existing = latest_votes(
            self.store.load_votes(session.project_id, reviewer_id=session.reviewer_id),
            vote.phase,
        ).get((session.reviewer_id, vote.cell))
        if existing is not None:
            if supersedes is None:
                raise ProtocolError(
                    "duplicate-vote",
                    f"cell {vote.requirement_id}/{vote.characteristic.value} already voted in "
                    f"{vote.phase.value}; name the vote to supersede to correct it",
                )
            if supersedes != existing.vote_id:
                raise ProtocolError(
                    "supersede-mismatch",
                    f"latest vote for this cell is {existing.vote_id}, not {supersedes}",
                )
        elif supersedes is not None:
            raise ProtocolError("supersede-mismatch", "no prior vote to supersede")

        stamped = ReviewerVote(
            reviewer_id=vote.reviewer_id,
            requirement_id=vote.requirement_id,
            characteristic=vote.characteristic,
            phase=vote.phase,
            verdict=vote.verdict,
            plausibility=vote.plausibility,
            improvement_rating=vote.improvement_rating,
            vote_id=self.store.next_vote_id(session.project_id, session.reviewer_id),
            supersedes=supersedes,
            submitted_at=_utc_now(),
        )
        self.store.append_vote(session.project_id, stamped)
        return self._build_session(project, session.session_id, session.reviewer_id)

    def progress(self, session: ReviewSession) -> dict:
        return {
            "session_id": session.session_id,
            "phase": session.phase.value,
            "independent": {
                "done": len(session.completed_independent),
                "total": session.total_cells,
            },
            "bound": {"done": len(session.completed_bound), "total": session.total_cells},
        }

    # -- ground truth --

    def ground_truth(
        self, project_id: str, phase: Phase, min_reviewers: Optional[int] = None
    ) -> dict[CellId, GroundTruthLabel]:
        """Majority-vote labels for every cell of the project in one phase."""
        floor = self.min_reviewers if min_reviewers is None else min_reviewers
        project = self.store.load_project(project_id)
        order = cell_order(project)
        per_cell: dict[CellId, list[ReviewerVote]] = {cell: [] for cell in order}
        for (_, cell), vote in latest_votes(self.store.load_votes(project_id), phase).items():
            if cell in per_cell:
                per_cell[cell].append(vote)
        undervoted = [cell for cell in order if len(per_cell[cell]) < floor]
        if undervoted:
            raise ProtocolError(
                "incomplete-coverage",
                f"{len(undervoted)} cell(s) have fewer than {floor} votes in {phase.value}",
                cells=[(rid, c.value) for rid, c in undervoted],
            )
        return {cell: majority_label(per_cell[cell], floor) for cell in order}
