"""Full-project evaluation and requirement generation.

Evaluation visits every (requirement, characteristic) cell: characteristics
in catalog order within each requirement, requirements in document order.
Completed cells are persisted as they finish, so a rerun skips them and a
killed run resumes where it stopped. Failed cells never abort the run; they
are collected and reported at the end.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .errors import GatewayError, ParseError, PipelineError
from .gateway import Completion, CompletionParams, Gateway, ReplayBackend
from .model import (
    Characteristic,
    LlmAssessment,
    ModelMeta,
    Project,
    QualityCharacteristic,
    Requirement,
    characteristic_catalog,
    validate_project,
)
from .parsing import parse_assessment, parse_generated_requirements
from .prompts import TemplateSet, default_templates
from .store import Store

CellId = tuple[str, Characteristic]


def cell_order(project: Project) -> list[CellId]:
    """Canonical cell ordering shared by evaluation, review, and reports."""
    return [
        (requirement.id, entry.key)
        for requirement in project.requirements
        for entry in characteristic_catalog()
    ]


@dataclass(frozen=True)
class AssessmentMatrix:
    project_id: str
    cells: dict[CellId, LlmAssessment]

    def verdicts(self) -> dict[CellId, object]:
        return {key: assessment.verdict for key, assessment in self.cells.items()}

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class Pipeline:
    gateway: Gateway
    store: Store
    params: CompletionParams = field(default_factory=CompletionParams)
    templates: TemplateSet = field(default_factory=default_templates)
    reask_limit: int = 1

    def _catalog_entry(self, characteristic: Characteristic) -> QualityCharacteristic:
        for entry in characteristic_catalog():
            if entry.key is characteristic:
                return entry
        raise KeyError(characteristic)

    def _complete_and_parse(
        self, project: Project, requirement: Requirement, characteristic: Characteristic
    ) -> LlmAssessment:
        entry = self._catalog_entry(characteristic)
        prompt = self.templates.build_evaluation_prompt(
            project.scope_description, entry, requirement
        )
        # Re-asking relies on sampling variation, which replay cannot provide;
        # against a cassette a parse failure is final.
        replaying = isinstance(self.gateway.backend, ReplayBackend)
        attempts = 1 if replaying else self.reask_limit + 1
        last_parse_error: Optional[ParseError] = None
        for _ in range(attempts):
            completion: Completion = self.gateway.complete(prompt, self.params)
            meta = ModelMeta(
                model_id=self.params.model_id,
                temperature=self.params.temperature,
                max_new_tokens=self.params.max_new_tokens,
                timestamp=completion.timestamp,
            )
            try:
                return parse_assessment(
                    completion.text, requirement.id, characteristic, model_meta=meta
                )
            except ParseError as exc:
                last_parse_error = exc
        assert last_parse_error is not None
        raise PipelineError(
            "unparseable-after-reask",
            f"cell ({requirement.id}, {characteristic.value}) stayed unparseable "
            f"after {attempts} completion(s): {last_parse_error}",
            cell=(requirement.id, characteristic),
            parse_error=last_parse_error,
        )

    def evaluate_cell(
        self, project: Project, requirement: Requirement, characteristic: Characteristic
    ) -> LlmAssessment:
        """Evaluate and persist a single cell."""
        violations = validate_project(project)
        if violations:
            raise PipelineError(
                "invalid-project",
                "; ".join(v.code for v in violations),
                violations=violations,
            )
        assessment = self._complete_and_parse(project, requirement, characteristic)
        self.store.save_cell(project.id, assessment)
        return assessment

    def evaluate_project(self, project: Project) -> AssessmentMatrix:
        """Evaluate every cell of the project, resuming over persisted cells.

        Raises partial-failure (with the partial matrix and the failed cell
        list attached) if any cell could not be completed; all other cells
        are still evaluated and persisted first.
        """
        violations = validate_project(project)
        if violations:
            raise PipelineError(
                "invalid-project",
                "; ".join(v.code for v in violations),
                violations=violations,
            )
        order = cell_order(project)
        persisted = self.store.load_matrix(project.id)
        cells: dict[CellId, LlmAssessment] = {
            key: value for key, value in persisted.items() if key in set(order)
        }
        pending = [key for key in order if key not in cells]
        failures: dict[CellId, Exception] = {}
        lock = threading.Lock()

        def run(cell: CellId) -> None:
            requirement_id, characteristic = cell
            requirement = project.requirement(requirement_id)
            try:
                assessment = self._complete_and_parse(project, requirement, characteristic)
            except (GatewayError, PipelineError, ParseError) as exc:
                with lock:
                    failures[cell] = exc
                return
            self.store.save_cell(project.id, assessment)
            with lock:
                cells[cell] = assessment

        workers = max(1, self.gateway.parallelism)
        if pending:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, pending))

        matrix = AssessmentMatrix(project_id=project.id, cells=cells)
        if failures:
            raise PipelineError(
                "partial-failure",
                f"{len(failures)} of {len(order)} cells failed",
                failed_cells=sorted(
                    ((rid, characteristic.value) for rid, characteristic in failures),
                ),
                errors=failures,
                matrix=matrix,
            )
        return matrix

    def generate_project(
        self,
        scope: str,
        n_functional: int,
        n_nonfunctional: int,
        name: str,
        project_id: Optional[str] = None,
    ) -> Project:
        """Generate a fresh requirement set for a scope and validate it.

        The generation prompt deliberately does not ask for the quality
        characteristics to be satisfied; realistic, possibly flawed output is
        the point.
        """
        prompt = self.templates.build_generation_prompt(scope, n_functional, n_nonfunctional)
        completion = self.gateway.complete(prompt, self.params)
        requirements = parse_generated_requirements(
            completion.text, n_functional, n_nonfunctional
        )
        project = Project(
            id=project_id or _slug(name),
            name=name,
            scope_description=scope,
            requirements=tuple(requirements),
        )
        violations = validate_project(project)
        if violations:
            raise PipelineError(
                "invalid-project",
                "generated project failed validation: "
                + "; ".join(v.code for v in violations),
                violations=violations,
            )
        return project


def _slug(name: str) -> str:
    import re

    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug or "project"
