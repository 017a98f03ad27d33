"""Loaders for the bundled example data: the Stopwatch project, the two
reference assessment grids for it, a replay cassette consistent with the
model grid, and a larger plain-text requirements document for import tests.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .metrics import BinaryLabeling
from .model import Characteristic, Project, Verdict

PARTICIPANTS_SOURCE = "participants-independent"
LLM_SOURCE = "llm"


def _data(name: str) -> str:
    return resources.files("reqqa.data").joinpath("fixtures").joinpath(name).read_text("utf-8")


def _data_path(name: str) -> Path:
    with resources.as_file(
        resources.files("reqqa.data").joinpath("fixtures").joinpath(name)
    ) as path:
        return Path(path)


def stopwatch_project() -> Project:
    return Project.from_dict(json.loads(_data("stopwatch.project.json")))


def reference_grids() -> dict[str, BinaryLabeling]:
    """The bundled participants' and model's Stopwatch assessments."""
    doc = json.loads(_data("stopwatch_grids.json"))
    requirement_ids = doc["requirements"]
    out: dict[str, BinaryLabeling] = {}
    for source, rows in doc["grids"].items():
        labels = {}
        for characteristic_name, bits in rows.items():
            characteristic = Characteristic(characteristic_name)
            if len(bits) != len(requirement_ids):
                raise ValueError(f"grid row {characteristic_name} has {len(bits)} cells")
            for requirement_id, bit in zip(requirement_ids, bits):
                labels[(requirement_id, characteristic)] = (
                    Verdict.FULFILLS if bit == "1" else Verdict.VIOLATES
                )
        out[source] = BinaryLabeling.from_mapping(labels, source=source)
    return out


def stopwatch_cassette_path() -> Path:
    return _data_path("stopwatch.cassette.json")


def digitalhome_text() -> str:
    return _data("digitalhome.txt")
