"""Rendering of assessment grids and metrics into Markdown and CSV.

Output is byte-deterministic for identical inputs: fixed section order, fixed
cell order, no timestamps. Sections whose inputs are missing render as
"pending" instead of failing, so a report can be produced at any stage.
"""

from __future__ import annotations

import csv
import io
from typing import Mapping, Optional

from .metrics import (
    BinaryLabeling,
    CellKey,
    cohens_kappa,
    flaw_precision_recall,
    interpret_kappa,
    rating_percentages,
    summarize_matrix,
)
from .model import (
    Characteristic,
    GroundTruthLabel,
    LlmAssessment,
    Phase,
    Project,
    ReviewerVote,
    Verdict,
)

CHECK = "✓"
CROSS = "✗"
SIGMA = "Σ"

RATING_AGGREGATION_NOTE = (
    "Percentages pool every (cell, reviewer) bound-phase rating per characteristic."
)


def fmt4(value: float) -> str:
    """Four decimal places, ties to even."""
    return format(round(value, 4), ".4f")


def _fmt_ratio(value: Optional[float]) -> str:
    return "n/a" if value is None else fmt4(value)


def _fmt_percent(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    text = f"{value:.1f}".rstrip("0").rstrip(".")
    return f"{text}%"


def matrix_labeling(matrix: Mapping[CellKey, LlmAssessment], source: str = "llm") -> BinaryLabeling:
    return BinaryLabeling.from_mapping(
        {key: assessment.verdict for key, assessment in matrix.items()}, source=source
    )


def ground_truth_labeling(
    labels: Mapping[CellKey, GroundTruthLabel] | list[GroundTruthLabel], source: str
) -> BinaryLabeling:
    if isinstance(labels, Mapping):
        entries = list(labels.values())
    else:
        entries = list(labels)
    return BinaryLabeling.from_mapping(
        {(label.requirement_id, label.characteristic): label.label for label in entries},
        source=source,
    )


def _grid_table(project: Project, labeling: BinaryLabeling) -> list[str]:
    """Characteristics x requirements grid with fulfilled-count sums."""
    labels = labeling.as_dict()
    requirement_ids = [r.id for r in project.requirements]
    summary = summarize_matrix(labeling)
    lines = ["| | " + " | ".join(requirement_ids) + f" | {SIGMA}qc |"]
    lines.append("|" + "---|" * (len(requirement_ids) + 2))
    for characteristic in Characteristic:
        marks = [
            CHECK if labels[(rid, characteristic)] is Verdict.FULFILLS else CROSS
            for rid in requirement_ids
        ]
        lines.append(
            f"| {characteristic.value} | "
            + " | ".join(marks)
            + f" | {summary.sigma_qc[characteristic]} |"
        )
    sums = [str(summary.sigma_req[rid]) for rid in requirement_ids]
    lines.append(f"| {SIGMA}req | " + " | ".join(sums) + f" | {summary.total} |")
    return lines


def render_markdown(
    project: Project,
    matrix: Mapping[CellKey, LlmAssessment],
    ground_truths: Mapping[Phase, Mapping[CellKey, GroundTruthLabel]],
    bound_votes: list[ReviewerVote],
    phase: Optional[Phase] = None,
) -> str:
    """The full report: grids, agreement, flaw detection, rating percentages.

    ``phase`` limits the agreement/flaw tables to one phase; default is both.
    """
    phases = [phase] if phase else [Phase.INDEPENDENT, Phase.BOUND]
    expected_cells = {
        (requirement.id, characteristic)
        for requirement in project.requirements
        for characteristic in Characteristic
    }
    llm = matrix_labeling(matrix) if set(matrix) == expected_cells else None
    gt_labelings = {
        p: ground_truth_labeling(ground_truths[p], f"participants-{p.value.lower()}")
        for p in phases
        if p in ground_truths
    }

    out: list[str] = [f"# Requirements quality report: {project.name}", ""]

    out.append("## Assessment grids")
    out.append("")
    out.append("### Model assessment")
    out.append("")
    if llm is not None:
        out.extend(_grid_table(project, llm))
    elif matrix:
        out.append(
            f"pending (matrix incomplete: {len(matrix)} of {len(expected_cells)} cells)"
        )
    else:
        out.append("pending (no evaluated matrix)")
    for p in phases:
        out.append("")
        out.append(f"### Ground truth ({p.value.lower()})")
        out.append("")
        if p in gt_labelings:
            out.extend(_grid_table(project, gt_labelings[p]))
        else:
            out.append("pending")

    out.append("")
    out.append("## Agreement")
    out.append("")
    out.append("| Phase | Kappa | Observed | Expected | Band |")
    out.append("|---|---|---|---|---|")
    for p in phases:
        if llm is not None and p in gt_labelings:
            result = cohens_kappa(gt_labelings[p], llm)
            out.append(
                f"| {p.value.lower()} | {fmt4(result.kappa)} | {fmt4(result.observed_agreement)} "
                f"| {fmt4(result.expected_agreement)} | {interpret_kappa(result.kappa)} |"
            )
        else:
            out.append(f"| {p.value.lower()} | pending | pending | pending | pending |")

    out.append("")
    out.append("## Flaw detection")
    out.append("")
    out.append("| Phase | Precision | Recall |")
    out.append("|---|---|---|")
    for p in phases:
        if llm is not None and p in gt_labelings:
            precision, recall = flaw_precision_recall(gt_labelings[p], llm)
            out.append(f"| {p.value.lower()} | {_fmt_ratio(precision)} | {_fmt_ratio(recall)} |")
        else:
            out.append(f"| {p.value.lower()} | pending | pending |")

    out.append("")
    out.append("## Explanation plausibility")
    out.append("")
    if bound_votes:
        table = rating_percentages(bound_votes, "plausibility")
        out.append("| Characteristic | Plausible |")
        out.append("|---|---|")
        for characteristic in Characteristic:
            out.append(f"| {characteristic.value} | {_fmt_percent(table[characteristic])} |")
        out.append("")
        out.append(f"_{RATING_AGGREGATION_NOTE}_")
    else:
        out.append("pending (no bound-phase votes)")

    out.append("")
    out.append("## Improvement ratings")
    out.append("")
    if bound_votes:
        table = rating_percentages(bound_votes, "improvement")
        out.append("| Characteristic | Rated an improvement |")
        out.append("|---|---|")
        for characteristic in Characteristic:
            out.append(f"| {characteristic.value} | {_fmt_percent(table[characteristic])} |")
        out.append("")
        out.append(f"_{RATING_AGGREGATION_NOTE}_")
    else:
        out.append("pending (no bound-phase votes)")

    out.append("")
    return "\n".join(out)


def render_csv(
    project: Project,
    matrix: Mapping[CellKey, LlmAssessment],
    ground_truths: Mapping[Phase, Mapping[CellKey, GroundTruthLabel]],
) -> str:
    """One row per (cell, source): project, requirement, characteristic, label."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["project_id", "requirement_id", "characteristic", "source", "label"])
    order = [
        (requirement.id, characteristic)
        for requirement in project.requirements
        for characteristic in Characteristic
    ]
    if matrix:
        for key in order:
            if key in matrix:
                writer.writerow(
                    [project.id, key[0], key[1].value, "llm", matrix[key].verdict.value]
                )
    for phase in (Phase.INDEPENDENT, Phase.BOUND):
        labels = ground_truths.get(phase)
        if not labels:
            continue
        source = f"participants-{phase.value.lower()}"
        for key in order:
            if key in labels:
                writer.writerow(
                    [project.id, key[0], key[1].value, source, labels[key].label.value]
                )
    return buffer.getvalue()
