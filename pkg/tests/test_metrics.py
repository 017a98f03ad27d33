from __future__ import annotations

import random

import pytest

from reqqa.errors import MetricsError
from reqqa.fixtures import LLM_SOURCE, PARTICIPANTS_SOURCE, reference_grids
from reqqa.metrics import (
    BinaryLabeling,
    build_agreement_report,
    cohens_kappa,
    flaw_precision_recall,
    interpret_kappa,
    labeling_from_sequence,
    rating_percentages,
    summarize_matrix,
)
from reqqa.model import (
    Characteristic,
    ImprovementRating,
    Phase,
    Plausibility,
    ReviewerVote,
    Verdict,
    VoteVerdict,
)

F, V = Verdict.FULFILLS, Verdict.VIOLATES


# --- independent oracle: enumerate the 2x2 confusion matrix directly ---


def confusion_matrix(a: list[Verdict], b: list[Verdict]) -> tuple[int, int, int, int]:
    n_ff = sum(1 for x, y in zip(a, b) if x is F and y is F)
    n_fv = sum(1 for x, y in zip(a, b) if x is F and y is V)
    n_vf = sum(1 for x, y in zip(a, b) if x is V and y is F)
    n_vv = sum(1 for x, y in zip(a, b) if x is V and y is V)
    return n_ff, n_fv, n_vf, n_vv


def oracle_kappa(a: list[Verdict], b: list[Verdict]) -> tuple[float, float, float]:
    n_ff, n_fv, n_vf, n_vv = confusion_matrix(a, b)
    n = n_ff + n_fv + n_vf + n_vv
    p_o = (n_ff + n_vv) / n
    a_f, b_f = n_ff + n_fv, n_ff + n_vf
    a_v, b_v = n_vf + n_vv, n_fv + n_vv
    p_e = (a_f * b_f + a_v * b_v) / (n * n)
    if p_e == 1.0:
        return 1.0, p_o, p_e
    return (p_o - p_e) / (1.0 - p_e), p_o, p_e


def oracle_precision_recall(gt: list[Verdict], llm: list[Verdict]):
    _, n_fv, _, n_vv = confusion_matrix(gt, llm)
    flagged = n_fv + n_vv
    flawed = sum(1 for x in gt if x is V)
    precision = n_vv / flagged if flagged else None
    recall = n_vv / flawed if flawed else None
    return precision, recall


# --- kappa ---


def test_perfect_agreement_is_exactly_one():
    labels = [F, V, F, F, V]
    a = labeling_from_sequence(labels, "a")
    b = labeling_from_sequence(labels, "b")
    result = cohens_kappa(a, b)
    assert result.kappa == 1.0
    assert result.observed_agreement == 1.0


def test_hand_computed_ten_cell_fixture():
    # agreements on 6 of 10; both raters split 6 F / 4 V
    a = labeling_from_sequence([F, F, F, F, F, F, V, V, V, V], "a")
    b = labeling_from_sequence([F, F, F, F, V, V, V, V, F, F], "b")
    result = cohens_kappa(a, b)
    assert result.observed_agreement == pytest.approx(0.6, abs=1e-15)
    assert result.expected_agreement == pytest.approx(0.52, abs=1e-15)
    assert result.kappa == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_unanimous_same_class_defines_kappa_one():
    a = labeling_from_sequence([F, F, F], "a")
    b = labeling_from_sequence([F, F, F], "b")
    result = cohens_kappa(a, b)
    assert result.kappa == 1.0
    assert result.expected_agreement == 1.0


def test_kappa_matches_oracle_on_random_labelings():
    rng = random.Random(29148)
    for _ in range(500):
        n = rng.randint(1, 50)
        seq_a = [rng.choice((F, V)) for _ in range(n)]
        seq_b = [rng.choice((F, V)) for _ in range(n)]
        got = cohens_kappa(labeling_from_sequence(seq_a, "a"), labeling_from_sequence(seq_b, "b"))
        want_kappa, want_po, want_pe = oracle_kappa(seq_a, seq_b)
        assert got.kappa == want_kappa
        assert got.observed_agreement == want_po
        assert got.expected_agreement == want_pe


def test_kappa_symmetry_and_range_and_label_swap():
    rng = random.Random(7)
    swap = {F: V, V: F}
    for _ in range(200):
        n = rng.randint(2, 40)
        seq_a = [rng.choice((F, V)) for _ in range(n)]
        seq_b = [rng.choice((F, V)) for _ in range(n)]
        a = labeling_from_sequence(seq_a, "a")
        b = labeling_from_sequence(seq_b, "b")
        ab = cohens_kappa(a, b)
        ba = cohens_kappa(b, a)
        assert ab == ba
        assert -1.0 <= ab.kappa <= 1.0
        swapped = cohens_kappa(
            labeling_from_sequence([swap[x] for x in seq_a], "a"),
            labeling_from_sequence([swap[x] for x in seq_b], "b"),
        )
        assert swapped.kappa == pytest.approx(ab.kappa, abs=1e-12)


def test_key_mismatch_and_empty_rejected():
    a = labeling_from_sequence([F, V], "a")
    b = labeling_from_sequence([F, V, F], "b")
    with pytest.raises(MetricsError) as err:
        cohens_kappa(a, b)
    assert err.value.code == "key-mismatch"
    with pytest.raises(MetricsError) as err:
        cohens_kappa(BinaryLabeling(items=(), source="a"), BinaryLabeling(items=(), source="b"))
    assert err.value.code == "empty-labeling"


def test_duplicate_cell_keys_rejected():
    items = ((("r1", Characteristic.SINGULAR), F), (("r1", Characteristic.SINGULAR), V))
    with pytest.raises(MetricsError) as err:
        BinaryLabeling(items=items, source="a")
    assert err.value.code == "duplicate-key"


# --- interpretation bands ---


@pytest.mark.parametrize(
    "kappa,band",
    [
        (0.7545, "substantial"),
        (0.0486, "none"),
        (0.2223, "fair"),
        (0.4028, "weak"),
        (-1.0, "none"),
        (0.2, "fair"),
        (0.4, "weak"),
        (0.6, "substantial"),
        (0.8, "near-perfect"),
        (1.0, "near-perfect"),
        (0.39999, "fair"),
    ],
)
def test_interpretation_bands(kappa, band):
    assert interpret_kappa(kappa) == band


def test_band_out_of_range():
    with pytest.raises(MetricsError) as err:
        interpret_kappa(1.5)
    assert err.value.code == "out-of-range"


# --- precision / recall ---


def test_perfect_detector():
    labels = [V, F, V, F]
    gt = labeling_from_sequence(labels, "gt")
    llm = labeling_from_sequence(labels, "llm")
    assert flaw_precision_recall(gt, llm) == (1.0, 1.0)


def test_hand_counted_sets():
    # keys a..f; GT flaws {a,b,c}; LLM flags {b,c,d}
    keys = "abcdef"
    gt_map = {(k, Characteristic.SINGULAR): (V if k in "abc" else F) for k in keys}
    llm_map = {(k, Characteristic.SINGULAR): (V if k in "bcd" else F) for k in keys}
    gt = BinaryLabeling.from_mapping(gt_map, "gt")
    llm = BinaryLabeling.from_mapping(llm_map, "llm")
    precision, recall = flaw_precision_recall(gt, llm)
    assert precision == pytest.approx(2 / 3)
    assert recall == pytest.approx(2 / 3)


def test_undefined_cases_are_none_not_zero():
    gt = labeling_from_sequence([V, F], "gt")
    llm_no_flags = labeling_from_sequence([F, F], "llm")
    precision, recall = flaw_precision_recall(gt, llm_no_flags)
    assert precision is None
    assert recall == 0.0

    gt_clean = labeling_from_sequence([F, F], "gt")
    llm = labeling_from_sequence([V, F], "llm")
    precision, recall = flaw_precision_recall(gt_clean, llm)
    assert precision == 0.0
    assert recall is None


def test_precision_recall_matches_oracle_on_random_labelings():
    rng = random.Random(1257)
    for _ in range(300):
        n = rng.randint(1, 30)
        seq_gt = [rng.choice((F, V)) for _ in range(n)]
        seq_llm = [rng.choice((F, V)) for _ in range(n)]
        got = flaw_precision_recall(
            labeling_from_sequence(seq_gt, "gt"), labeling_from_sequence(seq_llm, "llm")
        )
        assert got == oracle_precision_recall(seq_gt, seq_llm)
        if {x for x in seq_gt if x is V} and all(
            y is V for x, y in zip(seq_gt, seq_llm) if x is V
        ):
            assert got[1] == 1.0  # GT flaws subset of flagged -> recall 1


# --- matrix summary ---


def test_reference_grid_sums():
    grids = reference_grids()
    participants = summarize_matrix(grids[PARTICIPANTS_SOURCE])
    llm = summarize_matrix(grids[LLM_SOURCE])
    assert participants.total == 62
    assert participants.sigma_req["r3"] == 8
    assert llm.total == 40
    assert llm.sigma_qc[Characteristic.FEASIBLE] == 10
    assert llm.sigma_qc[Characteristic.SINGULAR] == 0
    assert sum(participants.sigma_req.values()) == participants.total
    assert sum(llm.sigma_qc.values()) == llm.total


def test_all_fulfills_grid():
    labels = {
        (f"r{i}", characteristic): F
        for i in range(1, 11)
        for characteristic in Characteristic
    }
    summary = summarize_matrix(BinaryLabeling.from_mapping(labels, "x"))
    assert summary.total == 90
    assert all(count == 9 for count in summary.sigma_req.values())


def test_incomplete_grid_rejected():
    labels = {("r1", Characteristic.SINGULAR): F}
    with pytest.raises(MetricsError) as err:
        summarize_matrix(BinaryLabeling.from_mapping(labels, "x"))
    assert err.value.code == "incomplete-grid"


# --- rating percentages ---


def bound_vote(characteristic, plausibility=None, improvement=None, reviewer="rev", rid="r1"):
    return ReviewerVote(
        reviewer_id=reviewer,
        requirement_id=rid,
        characteristic=characteristic,
        phase=Phase.BOUND,
        verdict=VoteVerdict.FULFILLS,
        plausibility=plausibility,
        improvement_rating=improvement,
    )


def test_all_plausible_gives_hundred_percent():
    votes = [
        bound_vote(characteristic, plausibility=Plausibility.PLAUSIBLE, rid=f"r{i}")
        for characteristic in Characteristic
        for i in range(3)
    ]
    table = rating_percentages(votes, "plausibility")
    assert all(value == 100.0 for value in table.values())


def test_seven_of_ten_is_seventy_percent():
    votes = [
        bound_vote(
            Characteristic.VERIFIABLE,
            plausibility=Plausibility.PLAUSIBLE if i < 7 else Plausibility.IMPLAUSIBLE,
            rid=f"r{i}",
        )
        for i in range(10)
    ]
    table = rating_percentages(votes, "plausibility")
    assert table[Characteristic.VERIFIABLE] == pytest.approx(70.0)
    assert table[Characteristic.SINGULAR] is None  # no eligible ratings


def test_improvement_percentages_not_applicable_without_ratings():
    votes = [
        bound_vote(Characteristic.SINGULAR, plausibility=Plausibility.NEUTRAL,
                   improvement=ImprovementRating.IMPROVEMENT, rid="r1"),
        bound_vote(Characteristic.SINGULAR, plausibility=Plausibility.NEUTRAL,
                   improvement=ImprovementRating.NO_IMPROVEMENT, rid="r2"),
    ]
    table = rating_percentages(votes, "improvement")
    assert table[Characteristic.SINGULAR] == pytest.approx(50.0)
    assert table[Characteristic.FEASIBLE] is None


def test_independent_votes_are_ignored():
    vote = ReviewerVote(
        reviewer_id="rev",
        requirement_id="r1",
        characteristic=Characteristic.SINGULAR,
        phase=Phase.INDEPENDENT,
        verdict=VoteVerdict.FULFILLS,
    )
    table = rating_percentages([vote], "plausibility")
    assert all(value is None for value in table.values())


def test_empty_votes_all_not_applicable():
    table = rating_percentages([], "plausibility")
    assert all(value is None for value in table.values())


# --- assembled report ---


def test_agreement_report_fields():
    grids = reference_grids()
    report = build_agreement_report(grids[PARTICIPANTS_SOURCE], grids[LLM_SOURCE])
    assert report.band == "weak"
    assert report.sample_count == 90
    assert report.sigma_qc["Singular"] == 0
    assert report.kappa == pytest.approx(0.4028, abs=0.0001)
    assert sum(report.sigma_req.values()) == 40
