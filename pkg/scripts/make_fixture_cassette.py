#!/usr/bin/env python3
"""Regenerate the bundled Stopwatch replay cassette.

The cassette contains one synthetic response per (requirement, characteristic)
cell whose verdict matches the bundled model grid, plus one response for the
requirements-generation prompt. Rerun this after changing the prompt
templates, the grid fixture, or the default completion parameters:

    PYTHONPATH=src python scripts/make_fixture_cassette.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from reqqa.fixtures import LLM_SOURCE, reference_grids, stopwatch_project
from reqqa.gateway import Cassette, CompletionParams, request_digest
from reqqa.model import Characteristic, RequirementKind, Verdict, characteristic_catalog
from reqqa.prompts import default_templates

FIXED_TIMESTAMP = "2024-02-01T09:00:00Z"

# One reason fragment per characteristic and verdict; the requirement id is
# woven in so every explanation string in the cassette is unique, which makes
# blindness checks (no explanation may leak into independent-phase traffic)
# as strict as possible.
REASONS = {
    Characteristic.APPROPRIATE: (
        "it keeps to what the system must do without prescribing implementation details",
        "it fixes implementation details such as concrete UI elements instead of the underlying need",
    ),
    Characteristic.COMPLETE: (
        "everything needed to understand the behavior is stated in the requirement itself",
        "essential information such as display format or bounds is missing from the statement",
    ),
    Characteristic.CONFORMING: (
        "it follows the expected 'The app shall ...' statement template",
        "the phrasing drifts from the approved requirement statement template",
    ),
    Characteristic.CORRECT: (
        "it accurately reflects the stated project need",
        "it misstates the need described in the project scope",
    ),
    Characteristic.FEASIBLE: (
        "it is realizable with standard platform capabilities at acceptable risk",
        "it cannot be realized within the stated system constraints",
    ),
    Characteristic.NECESSARY: (
        "removing it would leave a gap in the described product",
        "it adds nothing the scope calls for and could be dropped without loss",
    ),
    Characteristic.SINGULAR: (
        "it describes exactly one aspect of the system",
        "it bundles more than one aspect into a single statement",
    ),
    Characteristic.UNAMBIGUOUS: (
        "it allows only one reasonable interpretation",
        "terms in it admit more than one interpretation",
    ),
    Characteristic.VERIFIABLE: (
        "its fulfillment can be checked by a concrete test",
        "no concrete test could demonstrate its fulfillment as written",
    ),
}

IMPROVED = {
    Characteristic.APPROPRIATE: "The app shall let users {verb} without prescribing a specific control layout.",
    Characteristic.COMPLETE: "The app shall {verb}, including the display format and value ranges involved.",
    Characteristic.CONFORMING: "The app shall {verb}, stated as a single standard-form requirement.",
    Characteristic.CORRECT: "The app shall {verb} as described in the project scope.",
    Characteristic.FEASIBLE: "The app shall {verb} within the capabilities of the target devices.",
    Characteristic.NECESSARY: "The app shall {verb} only insofar as the scope demands it.",
    Characteristic.SINGULAR: "The app shall {verb}; related behaviors are specified separately.",
    Characteristic.UNAMBIGUOUS: "The app shall {verb}, with each term given a single defined meaning.",
    Characteristic.VERIFIABLE: "The app shall {verb}, measurable by an explicit acceptance test.",
}

VERBS = {
    "r1": "start time measurement",
    "r2": "pause time measurement",
    "r3": "reset the elapsed time to zero",
    "r4": "display the elapsed time since the last reset",
    "r5": "record split times",
    "r6": "record lap times",
    "r7": "show the history of recorded splits and laps",
    "r8": "offer an interface usable without instruction",
    "r9": "respond to user input promptly",
    "r10": "run on the supported Android versions",
}


def evaluation_response(requirement_id: str, characteristic: Characteristic, verdict: Verdict) -> str:
    fulfilled, violated = REASONS[characteristic]
    if verdict is Verdict.FULFILLS:
        return (
            "VERDICT: FULFILLED\n"
            f"EXPLANATION: Looking at {requirement_id}, {fulfilled}."
        )
    improved = IMPROVED[characteristic].format(verb=VERBS[requirement_id])
    return (
        "VERDICT: VIOLATED\n"
        f"EXPLANATION: Looking at {requirement_id}, {violated}.\n"
        f"IMPROVED: {improved}"
    )


def generation_response(project) -> str:
    lines = ["Functional requirements:"]
    number = 0
    for requirement in project.requirements:
        if requirement.kind is RequirementKind.FUNCTIONAL:
            number += 1
            lines.append(f"{number}. {requirement.text}")
    lines.append("")
    lines.append("Non-functional requirements:")
    for requirement in project.requirements:
        if requirement.kind is not RequirementKind.FUNCTIONAL:
            number += 1
            lines.append(f"{number}. {requirement.text}")
    return "\n".join(lines)


def main() -> None:
    project = stopwatch_project()
    grid = reference_grids()[LLM_SOURCE].as_dict()
    templates = default_templates()
    params = CompletionParams()
    cassette = Cassette()

    for requirement in project.requirements:
        for entry in characteristic_catalog():
            prompt = templates.build_evaluation_prompt(
                project.scope_description, entry, requirement
            )
            verdict = grid[(requirement.id, entry.key)]
            response = evaluation_response(requirement.id, entry.key, verdict)
            cassette.record(
                request_digest(prompt, params), prompt, params, response, FIXED_TIMESTAMP
            )

    n_functional = sum(
        1 for r in project.requirements if r.kind is RequirementKind.FUNCTIONAL
    )
    n_nonfunctional = len(project.requirements) - n_functional
    generation_prompt = templates.build_generation_prompt(
        project.scope_description, n_functional, n_nonfunctional
    )
    cassette.record(
        request_digest(generation_prompt, params),
        generation_prompt,
        params,
        generation_response(project),
        FIXED_TIMESTAMP,
    )

    target = (
        Path(__file__).resolve().parents[1]
        / "src"
        / "reqqa"
        / "data"
        / "fixtures"
        / "stopwatch.cassette.json"
    )
    cassette.save(target)
    print(f"wrote {len(cassette)} entries to {target}")


if __name__ == "__main__":
    main()
