from __future__ import annotations

import csv
import io

from reqqa.fixtures import PARTICIPANTS_SOURCE, reference_grids
from reqqa.model import (
    Characteristic,
    GroundTruthLabel,
    LabelBasis,
    Phase,
    Plausibility,
    ReviewerVote,
    VoteVerdict,
)
from reqqa.reports import fmt4, render_csv, render_markdown


def ground_truth_from_grid(grid):
    return {
        cell: GroundTruthLabel(
            requirement_id=cell[0],
            characteristic=cell[1],
            label=verdict,
            vote_count=4,
            basis=LabelBasis.STRICT_MAJORITY,
        )
        for cell, verdict in grid.items()
    }


def test_markdown_report_full_inputs(evaluated_store, stopwatch):
    matrix = evaluated_store.load_matrix("stopwatch")
    grid = reference_grids()[PARTICIPANTS_SOURCE].as_dict()
    ground_truths = {Phase.INDEPENDENT: ground_truth_from_grid(grid)}
    text = render_markdown(stopwatch, matrix, ground_truths, [])
    assert "# Requirements quality report: Stopwatch" in text
    # the model grid row for Singular: all ten cells violated
    singular_row = next(line for line in text.splitlines() if line.startswith("| Singular"))
    assert singular_row.count("✗") >= 10
    assert "| independent | 0.4028 | 0.6889 | 0.4790 | weak |" in text
    assert "| independent | 0.5000 | 0.8929 |" in text
    assert "| bound | pending | pending |" in text
    # grid sums present
    assert "| Σreq | 3 | 2 | 2 | 8 | 3 | 2 | 4 | 5 | 3 | 8 | 40 |" in text


def test_markdown_report_is_deterministic(evaluated_store, stopwatch):
    matrix = evaluated_store.load_matrix("stopwatch")
    first = render_markdown(stopwatch, matrix, {}, [])
    second = render_markdown(stopwatch, matrix, {}, [])
    assert first == second


def test_markdown_report_pending_sections(stopwatch):
    text = render_markdown(stopwatch, {}, {}, [])
    assert "pending (no evaluated matrix)" in text
    assert "pending (no bound-phase votes)" in text
    # section order: grids, agreement, flaw detection, plausibility, improvements
    order = [
        text.index("## Assessment grids"),
        text.index("## Agreement"),
        text.index("## Flaw detection"),
        text.index("## Explanation plausibility"),
        text.index("## Improvement ratings"),
    ]
    assert order == sorted(order)


def test_markdown_rating_tables(evaluated_store, stopwatch):
    matrix = evaluated_store.load_matrix("stopwatch")
    votes = [
        ReviewerVote(
            reviewer_id="a",
            requirement_id=f"r{i}",
            characteristic=Characteristic.VERIFIABLE,
            phase=Phase.BOUND,
            verdict=VoteVerdict.FULFILLS,
            plausibility=Plausibility.PLAUSIBLE if i <= 7 else Plausibility.NEUTRAL,
        )
        for i in range(1, 11)
    ]
    text = render_markdown(stopwatch, matrix, {}, votes)
    assert "| Verifiable | 70% |" in text
    assert "| Singular | n/a |" in text


def test_csv_report_shape(evaluated_store, stopwatch):
    matrix = evaluated_store.load_matrix("stopwatch")
    grid = reference_grids()[PARTICIPANTS_SOURCE].as_dict()
    ground_truths = {Phase.INDEPENDENT: ground_truth_from_grid(grid)}
    text = render_csv(stopwatch, matrix, ground_truths)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["project_id", "requirement_id", "characteristic", "source", "label"]
    assert len(rows) == 1 + 90 + 90
    assert rows[1] == ["stopwatch", "r1", "Appropriate", "llm", "Violates"]
    sources = {row[3] for row in rows[1:]}
    assert sources == {"llm", "participants-independent"}


def test_fmt4_rounds_half_even():
    assert fmt4(0.40284360189573454) == "0.4028"
    assert fmt4(1.0) == "1.0000"
    assert fmt4(0.123450001) == "0.1235"
