"""Extract structured assessments and generated requirements from raw model text.

The labeled-line convention (VERDICT / EXPLANATION / IMPROVED) is the wire
format our prompts request. Models drift, so matching is lenient by default:
labels are case-insensitive and a handful of verdict synonyms are accepted.
Parsing is total — any input yields either a value or a ParseError, never an
unhandled exception.
"""

from __future__ import annotations

import re
from typing import Optional

from .errors import ParseError
from .model import (
    Characteristic,
    LlmAssessment,
    ModelMeta,
    Requirement,
    RequirementKind,
    Verdict,
)

_LABEL_RE = re.compile(r"^\s*(verdict|explanation|improved)\s*:\s*(.*)$", re.IGNORECASE)

_FULFILLS_WORDS = {"fulfilled", "fulfills", "fulfil", "fulfills.", "yes"}
_VIOLATES_WORDS = {"violated", "violates", "violate", "violates.", "no"}
_STRICT_FULFILLS = {"FULFILLED"}
_STRICT_VIOLATES = {"VIOLATED"}


def _classify_verdict(value: str, strict: bool) -> tuple[Optional[Verdict], bool]:
    """Map the text after ``VERDICT:`` to (verdict, ambiguous).

    ``ambiguous`` is set when the value asserts both options at once.
    """
    if strict:
        token = value.strip()
        if token in _STRICT_FULFILLS:
            return Verdict.FULFILLS, False
        if token in _STRICT_VIOLATES:
            return Verdict.VIOLATES, False
        return None, False
    words = {w.strip(".,;:!\"'()").lower() for w in value.split()}
    hit_f = bool(words & _FULFILLS_WORDS)
    hit_v = bool(words & _VIOLATES_WORDS)
    if hit_f and hit_v:
        return None, True
    if hit_f:
        return Verdict.FULFILLS, False
    if hit_v:
        return Verdict.VIOLATES, False
    return None, False


def parse_assessment(
    raw: str,
    requirement_id: str,
    characteristic: Characteristic,
    *,
    strict: bool = False,
    model_meta: Optional[ModelMeta] = None,
) -> LlmAssessment:
    """Parse one evaluation response into an LlmAssessment.

    Labels must start a line; text inside an explanation that merely mentions
    a label word is not treated as a label. Multi-line explanation/improvement
    blocks run until the next recognized label or end of text.
    """
    if not isinstance(raw, str):
        raise ParseError("no-verdict", "response is not text", raw=repr(raw))

    verdicts_seen: list[Verdict] = []
    ambiguous = False
    explanation_parts: list[str] = []
    improved_parts: list[str] = []
    current: Optional[str] = None  # which block continuation lines belong to

    for line in raw.splitlines():
        match = _LABEL_RE.match(line)
        if not match:
            if current == "explanation":
                explanation_parts.append(line)
            elif current == "improved":
                improved_parts.append(line)
            continue
        label = match.group(1).lower()
        value = match.group(2)
        if label == "verdict":
            current = None
            verdict, both = _classify_verdict(value, strict)
            if both:
                ambiguous = True
            elif verdict is not None:
                verdicts_seen.append(verdict)
        elif label == "explanation":
            current = "explanation"
            explanation_parts.append(value)
        else:
            current = "improved"
            improved_parts.append(value)

    if ambiguous or len(set(verdicts_seen)) > 1:
        raise ParseError(
            "ambiguous-verdict",
            f"response asserts both verdict options for {requirement_id}/{characteristic.value}",
            raw=raw,
        )
    if not verdicts_seen:
        raise ParseError(
            "no-verdict",
            f"no recognizable verdict line for {requirement_id}/{characteristic.value}",
            raw=raw,
        )
    verdict = verdicts_seen[0]

    explanation = "\n".join(explanation_parts).strip()
    if not explanation:
        raise ParseError(
            "empty-explanation",
            f"verdict found but no explanation for {requirement_id}/{characteristic.value}",
            raw=raw,
        )
    improved = "\n".join(improved_parts).strip() or None

    return LlmAssessment(
        requirement_id=requirement_id,
        characteristic=characteristic,
        verdict=verdict,
        explanation=explanation,
        improved_text=improved,
        spurious_improvement=(verdict is Verdict.FULFILLS and improved is not None),
        raw_response=raw,
        model_meta=model_meta,
    )


_NUMBERED_LINE_RE = re.compile(r"^\s*(?:[-*]\s*)?([A-Za-z]{0,4}\d+)\s*[.):]\s+(.+?)\s*$")
_NON_FUNCTIONAL_HEADER_RE = re.compile(r"non[\s-]*functional", re.IGNORECASE)
_FUNCTIONAL_HEADER_RE = re.compile(r"functional", re.IGNORECASE)


def parse_generated_requirements(
    raw: str, expected_functional: int, expected_nonfunctional: int
) -> list[Requirement]:
    """Extract numbered requirement lines from a generation response.

    Ids are reassigned r1..rN in document order. Kind comes from section
    headers when the response is sectioned; otherwise the first
    ``expected_functional`` lines are taken as functional.
    """
    if not isinstance(raw, str):
        raise ParseError("no-requirements", "response is not text", raw=repr(raw))

    statements: list[tuple[str, Optional[RequirementKind]]] = []
    section: Optional[RequirementKind] = None
    saw_header = False
    for line in raw.splitlines():
        match = _NUMBERED_LINE_RE.match(line)
        if match:
            statements.append((match.group(2), section))
            continue
        if _NON_FUNCTIONAL_HEADER_RE.search(line):
            section = RequirementKind.NON_FUNCTIONAL
            saw_header = True
        elif _FUNCTIONAL_HEADER_RE.search(line):
            section = RequirementKind.FUNCTIONAL
            saw_header = True

    if not statements:
        raise ParseError("no-requirements", "no numbered requirement lines found", raw=raw)

    expected_total = expected_functional + expected_nonfunctional
    if len(statements) != expected_total:
        raise ParseError(
            "count-mismatch",
            f"expected {expected_total} requirements, found {len(statements)}",
            raw=raw,
            expected=expected_total,
            found=len(statements),
        )

    requirements: list[Requirement] = []
    for index, (text, kind) in enumerate(statements):
        if not saw_header or kind is None:
            kind = (
                RequirementKind.FUNCTIONAL
                if index < expected_functional
                else RequirementKind.NON_FUNCTIONAL
            )
        requirements.append(Requirement(id=f"r{index + 1}", text=text, kind=kind))

    found_functional = sum(1 for r in requirements if r.kind is RequirementKind.FUNCTIONAL)
    if saw_header and found_functional != expected_functional:
        raise ParseError(
            "count-mismatch",
            f"expected {expected_functional} functional requirements, found {found_functional}",
            raw=raw,
            expected=expected_functional,
            found=found_functional,
        )
    return requirements
