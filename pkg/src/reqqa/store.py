"""File-based persistence and project import.

One directory per project under the store root:

    <root>/<project_id>/
        project.json      checksummed project record
        matrix/           one checksummed file per evaluated cell
        sessions/         one file per review session
        votes/            append-only, one file per vote, never rewritten
        ground_truth/     derived labels per phase
        reports/          rendered report files

Every record wraps its payload with a content checksum; a mismatch on load is
reported as corruption rather than silently accepted. Writes go through a
temp-file + fsync + rename sequence so concurrent readers never see a torn
file and crashed writers leave no partial records.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import uuid
from pathlib import Path
from typing import Iterable, Optional

from .errors import StoreError
from .model import (
    Characteristic,
    GroundTruthLabel,
    LlmAssessment,
    Phase,
    Project,
    Requirement,
    RequirementKind,
    ReviewerVote,
    validate_project,
)


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def _checksum(payload: object) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(text)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


def write_record(path: Path, payload: object) -> None:
    _atomic_write(path, canonical_json({"checksum": _checksum(payload), "payload": payload}))


def read_record(path: Path) -> object:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise StoreError("io-error", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StoreError("corrupt-record", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "payload" not in doc or "checksum" not in doc:
        raise StoreError("corrupt-record", f"{path} is not a checksummed record")
    if _checksum(doc["payload"]) != doc["checksum"]:
        raise StoreError("corrupt-record", f"checksum mismatch in {path}")
    return doc["payload"]


# --- project import / export -------------------------------------------------


def import_native(document: bytes | str) -> Project:
    """Parse the native JSON project format; unknown fields survive round-trip."""
    text = document.decode("utf-8") if isinstance(document, bytes) else document
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(
            "parse-error",
            f"invalid project document at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from exc
    if not isinstance(doc, dict):
        raise StoreError("parse-error", "project document must be a JSON object")
    try:
        project = Project.from_dict(doc)
    except (ValueError, KeyError, TypeError) as exc:
        raise StoreError("parse-error", f"malformed project document: {exc}") from exc
    violations = validate_project(project)
    if violations:
        raise StoreError(
            "validation-failed",
            "; ".join(f"{v.code}: {v.message}" for v in violations),
            violations=violations,
        )
    return project


def export_native(project: Project) -> bytes:
    """Canonical byte form; export(import(doc)) is a fixed point."""
    return canonical_json(project.to_dict()).encode("utf-8")


# separator ":" or tab takes optional trailing space; "." demands one so that
# dotted ids like "FR1.1" or "3.1" do not split early
_PLAIN_LINE_RE = re.compile(r"^\s*([A-Za-z0-9][A-Za-z0-9_.-]*?)\s*(?::\s*|\.\s+|\t\s*)(\S.*?)\s*$")
_NON_FUNCTIONAL_RE = re.compile(r"non[\s-]*functional", re.IGNORECASE)
_FUNCTIONAL_RE = re.compile(r"functional", re.IGNORECASE)


def import_plaintext(text: str, scope: str, name: str, project_id: Optional[str] = None) -> Project:
    """Import a line-oriented requirements document.

    Each requirement line is ``<id><separator><statement>`` with separator
    ":", "." or a tab. Section headers containing "functional" or
    "non-functional" switch the kind of subsequent lines; before any header
    the kind defaults to functional. Other lines are ignored as prose.
    """
    requirements: list[Requirement] = []
    seen: set[str] = set()
    kind = RequirementKind.FUNCTIONAL
    for line in text.splitlines():
        match = _PLAIN_LINE_RE.match(line)
        if match:
            rid, statement = match.group(1), match.group(2)
            if rid in seen:
                raise StoreError("duplicate-id", f"requirement id {rid!r} appears more than once", id=rid)
            seen.add(rid)
            requirements.append(Requirement(id=rid, text=statement, kind=kind))
            continue
        if _NON_FUNCTIONAL_RE.search(line):
            kind = RequirementKind.NON_FUNCTIONAL
        elif _FUNCTIONAL_RE.search(line):
            kind = RequirementKind.FUNCTIONAL
    if not requirements:
        raise StoreError("no-requirements", "no requirement lines found in document")
    project = Project(
        id=project_id or _slug(name),
        name=name,
        scope_description=scope,
        requirements=tuple(requirements),
    )
    violations = validate_project(project)
    if violations:
        raise StoreError(
            "validation-failed",
            "; ".join(f"{v.code}: {v.message}" for v in violations),
            violations=violations,
        )
    return project


def _slug(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug or "project"


def cell_key(requirement_id: str, characteristic: Characteristic) -> str:
    return f"{requirement_id}__{characteristic.value}"


class Store:
    """Directory-backed persistence for projects, matrices, sessions, votes."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        # (mtime_ns, size) -> payload; safe because writers replace atomically
        # and vote records are never rewritten at all
        self._cache: dict[Path, tuple[tuple[int, int], object]] = {}
        # votes parsed once per filename; append-only store, records immutable
        self._vote_cache: dict[Path, dict[str, ReviewerVote]] = {}

    def _read(self, path: Path) -> object:
        try:
            stat = path.stat()
        except OSError as exc:
            raise StoreError("io-error", f"cannot read {path}: {exc}") from exc
        stamp = (stat.st_mtime_ns, stat.st_size)
        hit = self._cache.get(path)
        if hit is not None and hit[0] == stamp:
            return hit[1]
        payload = read_record(path)
        self._cache[path] = (stamp, payload)
        return payload

    # -- projects --

    def project_dir(self, project_id: str) -> Path:
        return self.root / project_id

    def save_project(self, project: Project) -> None:
        write_record(self.project_dir(project.id) / "project.json", project.to_dict())

    def load_project(self, project_id: str) -> Project:
        path = self.project_dir(project_id) / "project.json"
        if not path.exists():
            raise StoreError("unknown-project", f"no project {project_id!r} in store", project_id=project_id)
        return Project.from_dict(self._read(path))  # type: ignore[arg-type]

    def list_projects(self) -> list[str]:
        if not self.root.exists():
            return []
        out = [p.parent.name for p in sorted(self.root.glob("*/project.json"))]
        return sorted(out)

    # -- assessment matrix --

    def _matrix_dir(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "matrix"

    def save_cell(self, project_id: str, assessment: LlmAssessment) -> None:
        path = self._matrix_dir(project_id) / (
            cell_key(assessment.requirement_id, assessment.characteristic) + ".json"
        )
        write_record(path, assessment.to_dict())

    def has_cell(self, project_id: str, requirement_id: str, characteristic: Characteristic) -> bool:
        return (self._matrix_dir(project_id) / (cell_key(requirement_id, characteristic) + ".json")).exists()

    def load_matrix(self, project_id: str) -> dict[tuple[str, Characteristic], LlmAssessment]:
        directory = self._matrix_dir(project_id)
        cells: dict[tuple[str, Characteristic], LlmAssessment] = {}
        if not directory.exists():
            return cells
        for path in sorted(directory.glob("*.json")):
            assessment = LlmAssessment.from_dict(self._read(path))  # type: ignore[arg-type]
            cells[(assessment.requirement_id, assessment.characteristic)] = assessment
        return cells

    def has_matrix(self, project_id: str) -> bool:
        directory = self._matrix_dir(project_id)
        return directory.exists() and any(directory.glob("*.json"))

    # -- sessions --

    def _sessions_dir(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "sessions"

    def save_session(self, project_id: str, session_id: str, payload: dict) -> None:
        write_record(self._sessions_dir(project_id) / f"{session_id}.json", payload)

    def load_session(self, project_id: str, session_id: str) -> Optional[dict]:
        path = self._sessions_dir(project_id) / f"{session_id}.json"
        if not path.exists():
            return None
        return self._read(path)  # type: ignore[return-value]

    def list_sessions(self, project_id: str) -> list[dict]:
        directory = self._sessions_dir(project_id)
        if not directory.exists():
            return []
        return [self._read(p) for p in sorted(directory.glob("*.json"))]  # type: ignore[misc]

    # -- votes (append-only) --

    def _votes_dir(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "votes"

    def next_vote_id(self, project_id: str, reviewer_id: str) -> str:
        existing = self.load_votes(project_id, reviewer_id=reviewer_id)
        seq = 1 + max((int(v.vote_id.rsplit("-", 1)[1]) for v in existing), default=0)
        return f"{reviewer_id}-{seq:06d}"

    def append_vote(self, project_id: str, vote: ReviewerVote) -> None:
        if not vote.vote_id:
            raise StoreError("io-error", "vote has no vote_id assigned")
        path = self._votes_dir(project_id) / f"{vote.vote_id}.json"
        if path.exists():
            raise StoreError("io-error", f"vote record {vote.vote_id} already exists", vote_id=vote.vote_id)
        write_record(path, vote.to_dict())

    def load_votes(self, project_id: str, reviewer_id: Optional[str] = None) -> list[ReviewerVote]:
        directory = self._votes_dir(project_id)
        if not directory.exists():
            return []
        parsed = self._vote_cache.setdefault(directory, {})
        names = sorted(path.name for path in directory.glob("*.json"))
        for name in names:
            if name not in parsed:
                parsed[name] = ReviewerVote.from_dict(read_record(directory / name))  # type: ignore[arg-type]
        votes = [parsed[name] for name in names]
        if reviewer_id is not None:
            votes = [v for v in votes if v.reviewer_id == reviewer_id]
        return votes

    # -- ground truth --

    def save_ground_truth(self, project_id: str, phase: Phase, labels: Iterable[GroundTruthLabel]) -> None:
        payload = [label.to_dict() for label in labels]
        write_record(
            self.project_dir(project_id) / "ground_truth" / f"{phase.value.lower()}.json", payload
        )

    def load_ground_truth(self, project_id: str, phase: Phase) -> Optional[list[GroundTruthLabel]]:
        path = self.project_dir(project_id) / "ground_truth" / f"{phase.value.lower()}.json"
        if not path.exists():
            return None
        payload = self._read(path)
        return [GroundTruthLabel.from_dict(doc) for doc in payload]  # type: ignore[union-attr]

    # -- reports --

    def reports_dir(self, project_id: str) -> Path:
        path = self.project_dir(project_id) / "reports"
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_report(self, project_id: str, filename: str, content: str) -> Path:
        path = self.reports_dir(project_id) / filename
        _atomic_write(path, content)
        return path
