"""Domain types: projects, requirements, the quality-characteristic catalog,
assessments, reviewer votes, and derived labels.

All types are immutable values; validation returns violation records instead
of raising so callers can report every problem at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Optional


class Characteristic(str, Enum):
    """The nine per-requirement quality dimensions, in catalog order."""

    APPROPRIATE = "Appropriate"
    COMPLETE = "Complete"
    CONFORMING = "Conforming"
    CORRECT = "Correct"
    FEASIBLE = "Feasible"
    NECESSARY = "Necessary"
    SINGULAR = "Singular"
    UNAMBIGUOUS = "Unambiguous"
    VERIFIABLE = "Verifiable"


class RequirementKind(str, Enum):
    FUNCTIONAL = "Functional"
    NON_FUNCTIONAL = "NonFunctional"


class Verdict(str, Enum):
    """Binary assessment outcome; there is no third state at this level."""

    FULFILLS = "Fulfills"
    VIOLATES = "Violates"


class VoteVerdict(str, Enum):
    """Reviewer judgment; unlike the model, reviewers may abstain."""

    FULFILLS = "Fulfills"
    VIOLATES = "Violates"
    UNCERTAIN = "Uncertain"


class Phase(str, Enum):
    INDEPENDENT = "Independent"
    BOUND = "Bound"


class SessionPhase(str, Enum):
    INDEPENDENT = "Independent"
    BOUND = "Bound"
    COMPLETED = "Completed"


class Plausibility(str, Enum):
    PLAUSIBLE = "Plausible"
    IMPLAUSIBLE = "Implausible"
    NEUTRAL = "Neutral"


class ImprovementRating(str, Enum):
    IMPROVEMENT = "Improvement"
    NO_IMPROVEMENT = "NoImprovement"
    UNSURE = "Unsure"


class LabelBasis(str, Enum):
    STRICT_MAJORITY = "StrictMajority"
    TIE_OR_UNCERTAIN_DEFAULT = "TieOrUncertainDefault"


@dataclass(frozen=True)
class QualityCharacteristic:
    key: Characteristic
    definition: str


@lru_cache(maxsize=1)
def characteristic_catalog() -> tuple[QualityCharacteristic, ...]:
    """The nine catalog entries with their bundled definitions, fixed order.

    Definitions live in a data file so an alternative standard's wording can
    be swapped without touching code; the prompt builder injects them verbatim.
    """
    raw = resources.files("reqqa.data").joinpath("characteristics.json").read_text("utf-8")
    doc = json.loads(raw)
    entries = tuple(
        QualityCharacteristic(key=Characteristic(item["key"]), definition=item["definition"])
        for item in doc["characteristics"]
    )
    if [e.key for e in entries] != list(Characteristic):
        raise RuntimeError("characteristic catalog out of sync with enumeration")
    if any(not e.definition.strip() for e in entries):
        raise RuntimeError("characteristic catalog contains an empty definition")
    return entries


def characteristic_definition(key: Characteristic) -> str:
    for entry in characteristic_catalog():
        if entry.key is key:
            return entry.definition
    raise KeyError(key)


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    kind: RequirementKind = RequirementKind.FUNCTIONAL
    extra: tuple[tuple[str, object], ...] = ()

    def to_dict(self) -> dict:
        doc = {"id": self.id, "text": self.text, "kind": self.kind.value}
        doc.update(dict(self.extra))
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Requirement":
        known = {"id", "text", "kind"}
        extra = tuple(sorted((k, v) for k, v in doc.items() if k not in known))
        return cls(
            id=str(doc.get("id", "")),
            text=str(doc.get("text", "")),
            kind=RequirementKind(doc.get("kind", "Functional")),
            extra=extra,
        )


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    scope_description: str
    requirements: tuple[Requirement, ...]
    extra: tuple[tuple[str, object], ...] = ()

    def requirement(self, requirement_id: str) -> Requirement:
        for req in self.requirements:
            if req.id == requirement_id:
                return req
        raise KeyError(requirement_id)

    def to_dict(self) -> dict:
        doc = {
            "id": self.id,
            "name": self.name,
            "scope_description": self.scope_description,
            "requirements": [r.to_dict() for r in self.requirements],
        }
        doc.update(dict(self.extra))
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Project":
        known = {"id", "name", "scope_description", "requirements"}
        extra = tuple(sorted((k, v) for k, v in doc.items() if k not in known))
        return cls(
            id=str(doc.get("id", "")),
            name=str(doc.get("name", "")),
            scope_description=str(doc.get("scope_description", "")),
            requirements=tuple(Requirement.from_dict(r) for r in doc.get("requirements", [])),
            extra=extra,
        )


@dataclass(frozen=True)
class Violation:
    """One failed invariant; violations are data, not exceptions."""

    code: str
    message: str
    subject: str = ""


def validate_project(project: Project) -> list[Violation]:
    """Check every Project/Requirement invariant; empty result means valid."""
    violations: list[Violation] = []
    if not project.id.strip():
        violations.append(Violation("project-id-empty", "project id must be non-empty", project.id))
    if not project.scope_description.strip():
        violations.append(
            Violation("scope-empty", "project scope description must be non-empty", project.id)
        )
    if not project.requirements:
        violations.append(
            Violation("no-requirements", "project must contain at least one requirement", project.id)
        )
    seen: set[str] = set()
    for req in project.requirements:
        if not req.id.strip():
            violations.append(Violation("requirement-id-empty", "requirement id must be non-empty", req.id))
        elif req.id in seen:
            violations.append(
                Violation("duplicate-id", f"requirement id {req.id!r} appears more than once", req.id)
            )
        else:
            seen.add(req.id)
        if not req.text.strip():
            violations.append(
                Violation("empty-text", f"requirement {req.id!r} has empty text", req.id)
            )
    return violations


@dataclass(frozen=True)
class ModelMeta:
    model_id: str
    temperature: float
    max_new_tokens: int
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_new_tokens": self.max_new_tokens,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelMeta":
        return cls(
            model_id=doc["model_id"],
            temperature=float(doc["temperature"]),
            max_new_tokens=int(doc["max_new_tokens"]),
            timestamp=doc["timestamp"],
        )


@dataclass(frozen=True)
class LlmAssessment:
    """Parsed model output for one (requirement, characteristic) cell.

    ``raw_response`` is preserved byte-exact for audit. ``improved_text`` is
    expected on Violates verdicts; an improvement offered alongside a Fulfills
    verdict is retained but flagged as spurious.
    """

    requirement_id: str
    characteristic: Characteristic
    verdict: Verdict
    explanation: str
    raw_response: str
    improved_text: Optional[str] = None
    spurious_improvement: bool = False
    model_meta: Optional[ModelMeta] = None

    def to_dict(self) -> dict:
        return {
            "requirement_id": self.requirement_id,
            "characteristic": self.characteristic.value,
            "verdict": self.verdict.value,
            "explanation": self.explanation,
            "improved_text": self.improved_text,
            "spurious_improvement": self.spurious_improvement,
            "raw_response": self.raw_response,
            "model_meta": self.model_meta.to_dict() if self.model_meta else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LlmAssessment":
        meta = doc.get("model_meta")
        return cls(
            requirement_id=doc["requirement_id"],
            characteristic=Characteristic(doc["characteristic"]),
            verdict=Verdict(doc["verdict"]),
            explanation=doc["explanation"],
            raw_response=doc["raw_response"],
            improved_text=doc.get("improved_text"),
            spurious_improvement=bool(doc.get("spurious_improvement", False)),
            model_meta=ModelMeta.from_dict(meta) if meta else None,
        )


@dataclass(frozen=True)
class ReviewerVote:
    """One human judgment for one cell in one phase.

    Plausibility and improvement ratings belong to the bound phase only; the
    protocol layer enforces when each is required.
    """

    reviewer_id: str
    requirement_id: str
    characteristic: Characteristic
    phase: Phase
    verdict: VoteVerdict
    plausibility: Optional[Plausibility] = None
    improvement_rating: Optional[ImprovementRating] = None
    vote_id: str = ""
    supersedes: Optional[str] = None
    submitted_at: str = ""

    @property
    def cell(self) -> tuple[str, Characteristic]:
        return (self.requirement_id, self.characteristic)

    def field_violations(self) -> list[Violation]:
        """Phase-local field-presence rules (the matrix-dependent rule lives
        in the protocol layer, which knows whether an improvement exists)."""
        violations: list[Violation] = []
        if self.phase is Phase.INDEPENDENT:
            if self.plausibility is not None:
                violations.append(
                    Violation("unexpected-field", "plausibility is a bound-phase field", self.vote_id)
                )
            if self.improvement_rating is not None:
                violations.append(
                    Violation("unexpected-field", "improvement_rating is a bound-phase field", self.vote_id)
                )
        else:
            if self.plausibility is None:
                violations.append(
                    Violation("missing-plausibility", "bound votes must rate explanation plausibility", self.vote_id)
                )
        return violations

    def to_dict(self) -> dict:
        return {
            "reviewer_id": self.reviewer_id,
            "requirement_id": self.requirement_id,
            "characteristic": self.characteristic.value,
            "phase": self.phase.value,
            "verdict": self.verdict.value,
            "plausibility": self.plausibility.value if self.plausibility else None,
            "improvement_rating": self.improvement_rating.value if self.improvement_rating else None,
            "vote_id": self.vote_id,
            "supersedes": self.supersedes,
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReviewerVote":
        return cls(
            reviewer_id=doc["reviewer_id"],
            requirement_id=doc["requirement_id"],
            characteristic=Characteristic(doc["characteristic"]),
            phase=Phase(doc["phase"]),
            verdict=VoteVerdict(doc["verdict"]),
            plausibility=Plausibility(doc["plausibility"]) if doc.get("plausibility") else None,
            improvement_rating=(
                ImprovementRating(doc["improvement_rating"]) if doc.get("improvement_rating") else None
            ),
            vote_id=doc.get("vote_id", ""),
            supersedes=doc.get("supersedes"),
            submitted_at=doc.get("submitted_at", ""),
        )


@dataclass(frozen=True)
class GroundTruthLabel:
    requirement_id: str
    characteristic: Characteristic
    label: Verdict
    vote_count: int
    basis: LabelBasis

    def to_dict(self) -> dict:
        return {
            "requirement_id": self.requirement_id,
            "characteristic": self.characteristic.value,
            "label": self.label.value,
            "vote_count": self.vote_count,
            "basis": self.basis.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruthLabel":
        return cls(
            requirement_id=doc["requirement_id"],
            characteristic=Characteristic(doc["characteristic"]),
            label=Verdict(doc["label"]),
            vote_count=int(doc["vote_count"]),
            basis=LabelBasis(doc["basis"]),
        )


@dataclass(frozen=True)
class AgreementReport:
    """Agreement and flaw-detection metrics for one (ground truth, model) pair."""

    kappa: float
    observed_agreement: float
    expected_agreement: float
    band: str
    precision: Optional[float]
    recall: Optional[float]
    sigma_req: dict = field(default_factory=dict)
    sigma_qc: dict = field(default_factory=dict)
    sample_count: int = 0
