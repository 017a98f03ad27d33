from __future__ import annotations

import itertools

import pytest

from reqqa.errors import ProtocolError
from reqqa.fixtures import PARTICIPANTS_SOURCE, reference_grids
from reqqa.metrics import BinaryLabeling, cohens_kappa
from reqqa.model import (
    Characteristic,
    ImprovementRating,
    LabelBasis,
    Phase,
    Plausibility,
    ReviewerVote,
    SessionPhase,
    Verdict,
    VoteVerdict,
)
from reqqa.pipeline import cell_order
from reqqa.protocol import ReviewProtocol, latest_votes, majority_label

F, V, U = VoteVerdict.FULFILLS, VoteVerdict.VIOLATES, VoteVerdict.UNCERTAIN


def make_vote(verdict, reviewer="rev", rid="r1", characteristic=Characteristic.SINGULAR,
              phase=Phase.INDEPENDENT, plausibility=None, improvement=None):
    return ReviewerVote(
        reviewer_id=reviewer,
        requirement_id=rid,
        characteristic=characteristic,
        phase=phase,
        verdict=verdict,
        plausibility=plausibility,
        improvement_rating=improvement,
    )


def votes_of(verdicts):
    return [make_vote(verdict, reviewer=f"rev{i}") for i, verdict in enumerate(verdicts)]


# --- majority rule ---


def test_strict_majority_fulfills():
    label = majority_label(votes_of([F, F, F, V]))
    assert label.label is Verdict.FULFILLS
    assert label.basis is LabelBasis.STRICT_MAJORITY
    assert label.vote_count == 4


def test_tie_defaults_to_violates():
    label = majority_label(votes_of([F, F, V, V]))
    assert label.label is Verdict.VIOLATES
    assert label.basis is LabelBasis.TIE_OR_UNCERTAIN_DEFAULT


def test_uncertain_majority_defaults_to_violates():
    label = majority_label(votes_of([U, U, U, F]))
    assert label.label is Verdict.VIOLATES
    assert label.basis is LabelBasis.TIE_OR_UNCERTAIN_DEFAULT


def test_strict_violates_majority_is_not_the_default_basis():
    label = majority_label(votes_of([V, V, V, F]))
    assert label.label is Verdict.VIOLATES
    assert label.basis is LabelBasis.STRICT_MAJORITY


def test_insufficient_reviewers():
    with pytest.raises(ProtocolError) as err:
        majority_label(votes_of([F, F, F]))
    assert err.value.code == "insufficient-reviewers"
    assert majority_label(votes_of([F, F, F]), min_reviewers=3).label is Verdict.FULFILLS


def test_mixed_cells_rejected():
    votes = votes_of([F, F, F, V])
    votes[0] = make_vote(F, reviewer="rev0", rid="r2")
    with pytest.raises(ProtocolError) as err:
        majority_label(votes)
    assert err.value.code == "mixed-cells"


def brute_force_label(verdicts):
    """Independent counter: label by comparing per-option tallies directly."""
    tally = {F: 0, V: 0, U: 0}
    for verdict in verdicts:
        tally[verdict] += 1
    half = len(verdicts) / 2
    if tally[F] > half:
        return Verdict.FULFILLS, LabelBasis.STRICT_MAJORITY
    if tally[V] > half:
        return Verdict.VIOLATES, LabelBasis.STRICT_MAJORITY
    return Verdict.VIOLATES, LabelBasis.TIE_OR_UNCERTAIN_DEFAULT


def test_majority_exhaustive_against_brute_force():
    for size in (4, 5, 6, 7):
        for combo in itertools.product((F, V, U), repeat=size):
            label = majority_label(votes_of(combo), min_reviewers=4)
            want_label, want_basis = brute_force_label(combo)
            assert label.label is want_label
            assert label.basis is want_basis


# --- sessions and votes ---


@pytest.fixture
def protocol(evaluated_store):
    return ReviewProtocol(evaluated_store)


def test_open_session_on_evaluated_project(protocol):
    session = protocol.open_session("stopwatch", "alice")
    assert session.phase is SessionPhase.INDEPENDENT
    assert session.total_cells == 90
    assert not session.completed_independent


def test_open_session_requires_matrix(store, stopwatch):
    store.save_project(stopwatch)
    with pytest.raises(ProtocolError) as err:
        ReviewProtocol(store).open_session("stopwatch", "alice")
    assert err.value.code == "project-not-evaluated"


def test_sessions_track_reviewers_independently(protocol):
    alice = protocol.open_session("stopwatch", "alice")
    bob = protocol.open_session("stopwatch", "bob")
    task = protocol.next_task(alice)
    protocol.submit_vote(alice, make_vote(F, reviewer="alice",
                                          rid=task.requirement_id,
                                          characteristic=task.characteristic))
    alice = protocol.get_session(alice.session_id)
    bob = protocol.get_session(bob.session_id)
    assert len(alice.completed_independent) == 1
    assert len(bob.completed_independent) == 0


def test_task_order_matches_pipeline_order(protocol, stopwatch):
    session = protocol.open_session("stopwatch", "alice")
    seen = []
    for _ in range(3):
        task = protocol.next_task(session)
        seen.append((task.requirement_id, task.characteristic))
        session = protocol.submit_vote(
            session,
            make_vote(F, reviewer="alice", rid=task.requirement_id,
                      characteristic=task.characteristic),
        )
    assert seen == cell_order(stopwatch)[:3]


def test_independent_task_carries_no_model_fields(protocol):
    session = protocol.open_session("stopwatch", "alice")
    payload = protocol.next_task(session).to_payload()
    assert "llm_verdict" not in payload
    assert "llm_explanation" not in payload
    assert "llm_improved_text" not in payload
    assert payload["requirement_text"]
    assert payload["characteristic_definition"]


def test_phase_mismatch_and_unexpected_field(protocol):
    session = protocol.open_session("stopwatch", "alice")
    bound_vote = make_vote(F, reviewer="alice", phase=Phase.BOUND,
                           plausibility=Plausibility.PLAUSIBLE)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, bound_vote)
    assert err.value.code == "phase-mismatch"

    sneaky = make_vote(F, reviewer="alice", plausibility=Plausibility.PLAUSIBLE)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, sneaky)
    assert err.value.code == "unexpected-field"


def test_duplicate_vote_and_supersede_lineage(protocol):
    session = protocol.open_session("stopwatch", "alice")
    first = make_vote(F, reviewer="alice")
    session = protocol.submit_vote(session, first)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, make_vote(V, reviewer="alice"))
    assert err.value.code == "duplicate-vote"

    stored = protocol.store.load_votes("stopwatch", reviewer_id="alice")[0]
    session = protocol.submit_vote(session, make_vote(V, reviewer="alice"),
                                   supersedes=stored.vote_id)
    votes = protocol.store.load_votes("stopwatch", reviewer_id="alice")
    assert len(votes) == 2  # append-only: the original record survives
    latest = latest_votes(votes, Phase.INDEPENDENT)[("alice", ("r1", Characteristic.SINGULAR))]
    assert latest.verdict is V
    assert latest.supersedes == stored.vote_id

    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, make_vote(F, reviewer="alice"), supersedes="bogus-id")
    assert err.value.code == "supersede-mismatch"


def complete_phase(protocol, session, verdict=F, plausibility=None):
    starting_phase = session.phase
    while session.phase is starting_phase:
        task = protocol.next_task(session)
        if task is None:
            break
        improvement = None
        if task.phase is Phase.BOUND and task.llm_improved_text is not None:
            improvement = ImprovementRating.IMPROVEMENT
        session = protocol.submit_vote(
            session,
            make_vote(
                verdict,
                reviewer=session.reviewer_id,
                rid=task.requirement_id,
                characteristic=task.characteristic,
                phase=task.phase,
                plausibility=plausibility if task.phase is Phase.BOUND else None,
                improvement=improvement,
            ),
        )
    return session


def test_full_two_phase_flow(protocol):
    session = protocol.open_session("stopwatch", "alice")
    session = complete_phase(protocol, session)
    assert session.phase is SessionPhase.BOUND
    assert len(session.completed_independent) == 90

    task = protocol.next_task(session)
    assert task.phase is Phase.BOUND
    assert task.llm_verdict is not None
    assert task.llm_explanation

    session = complete_phase(protocol, session, plausibility=Plausibility.PLAUSIBLE)
    assert session.phase is SessionPhase.COMPLETED
    assert protocol.next_task(session) is None
    progress = protocol.progress(session)
    assert progress["independent"] == {"done": 90, "total": 90}
    assert progress["bound"] == {"done": 90, "total": 90}


def test_bound_vote_field_rules(protocol):
    session = protocol.open_session("stopwatch", "alice")
    session = complete_phase(protocol, session)
    task = protocol.next_task(session)  # r1/Appropriate: Violates with improvement
    assert task.llm_improved_text is not None

    missing_plausibility = make_vote(V, reviewer="alice", rid=task.requirement_id,
                                     characteristic=task.characteristic, phase=Phase.BOUND,
                                     improvement=ImprovementRating.IMPROVEMENT)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, missing_plausibility)
    assert err.value.code == "missing-plausibility"

    missing_rating = make_vote(V, reviewer="alice", rid=task.requirement_id,
                               characteristic=task.characteristic, phase=Phase.BOUND,
                               plausibility=Plausibility.PLAUSIBLE)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, missing_rating)
    assert err.value.code == "missing-improvement-rating"

    # r1/Feasible fulfills, no improvement suggested: a rating there is an error
    fulfilled_cell = make_vote(F, reviewer="alice", rid="r1",
                               characteristic=Characteristic.FEASIBLE, phase=Phase.BOUND,
                               plausibility=Plausibility.PLAUSIBLE,
                               improvement=ImprovementRating.IMPROVEMENT)
    with pytest.raises(ProtocolError) as err:
        protocol.submit_vote(session, fulfilled_cell)
    assert err.value.code == "unexpected-improvement-rating"


def test_blindness_no_read_leaks_model_content(protocol, evaluated_store):
    """During the independent phase, nothing a session can read contains any
    model explanation string."""
    matrix = evaluated_store.load_matrix("stopwatch")
    secrets = [a.explanation for a in matrix.values()]
    secrets += [a.improved_text for a in matrix.values() if a.improved_text]
    session = protocol.open_session("stopwatch", "alice")

    import json as json_mod

    while session.phase is SessionPhase.INDEPENDENT:
        task = protocol.next_task(session)
        serialized = json_mod.dumps(task.to_payload()) + json_mod.dumps(
            protocol.progress(session)
        )
        for secret in secrets:
            assert secret not in serialized
        with pytest.raises(ProtocolError) as err:
            protocol.assessment_for_cell(session, (task.requirement_id, task.characteristic))
        assert err.value.code == "phase-violation"
        session = protocol.submit_vote(
            session,
            make_vote(F, reviewer="alice", rid=task.requirement_id,
                      characteristic=task.characteristic),
        )
    assert session.phase is SessionPhase.BOUND
    # and after the flip the same read works
    assessment = protocol.assessment_for_cell(session, ("r1", Characteristic.SINGULAR))
    assert assessment.explanation in secrets


# --- ground truth ---


def reviewer_votes_matching_grid(protocol, grid, reviewers=("a", "b", "c", "d")):
    """Three reviewers vote the grid label, the fourth votes the opposite:
    strict 3-of-4 majorities reproduce the grid exactly."""
    flip = {Verdict.FULFILLS: V, Verdict.VIOLATES: F}
    as_vote = {Verdict.FULFILLS: F, Verdict.VIOLATES: V}
    for reviewer in reviewers:
        session = protocol.open_session("stopwatch", reviewer)
        while True:
            task = protocol.next_task(session)
            if task is None or task.phase is not Phase.INDEPENDENT:
                break
            want = grid[(task.requirement_id, task.characteristic)]
            verdict = as_vote[want] if reviewer != "d" else flip[want]
            session = protocol.submit_vote(
                session,
                make_vote(verdict, reviewer=reviewer, rid=task.requirement_id,
                          characteristic=task.characteristic),
            )


def test_ground_truth_reproduces_reference_grid(protocol):
    grid = reference_grids()[PARTICIPANTS_SOURCE].as_dict()
    reviewer_votes_matching_grid(protocol, grid)
    labels = protocol.ground_truth("stopwatch", Phase.INDEPENDENT)
    assert len(labels) == 90
    derived = {cell: label.label for cell, label in labels.items()}
    assert derived == grid
    assert all(label.basis is LabelBasis.STRICT_MAJORITY for label in labels.values())

    llm = reference_grids()["llm"]
    gt = BinaryLabeling.from_mapping(derived, source="participants-independent")
    assert cohens_kappa(gt, llm).kappa == pytest.approx(0.4028, abs=0.0001)


def test_ground_truth_incomplete_coverage(protocol):
    grid = reference_grids()[PARTICIPANTS_SOURCE].as_dict()
    reviewer_votes_matching_grid(protocol, grid, reviewers=("a", "b", "c"))
    with pytest.raises(ProtocolError) as err:
        protocol.ground_truth("stopwatch", Phase.INDEPENDENT)
    assert err.value.code == "incomplete-coverage"
    assert len(err.value.context["cells"]) == 90


def test_unanimous_votes_all_strict_majority(protocol):
    for reviewer in ("a", "b", "c", "d"):
        session = protocol.open_session("stopwatch", reviewer)
        complete_phase(protocol, session)
    labels = protocol.ground_truth("stopwatch", Phase.INDEPENDENT)
    assert all(label.basis is LabelBasis.STRICT_MAJORITY for label in labels.values())
    assert all(label.label is Verdict.FULFILLS for label in labels.values())


def test_randomized_order_is_per_reviewer_and_stable(evaluated_store, stopwatch):
    shuffled = ReviewProtocol(evaluated_store, randomize_order=True)
    shared = ReviewProtocol(evaluated_store, randomize_order=False)

    def first_cells(protocol, reviewer, n=5):
        session = protocol.open_session("stopwatch", reviewer)
        seen = []
        for _ in range(n):
            task = protocol.next_task(session)
            seen.append((task.requirement_id, task.characteristic))
            session = protocol.submit_vote(
                session,
                make_vote(F, reviewer=reviewer, rid=task.requirement_id,
                          characteristic=task.characteristic),
            )
        return seen

    alice = first_cells(shuffled, "alice")
    bob = first_cells(shuffled, "bob")
    assert alice != bob  # different reviewers, different walks
    assert alice != cell_order(stopwatch)[:5]
    # stable across a resume: a fresh protocol instance continues the walk
    # at exactly the sixth cell of the same per-reviewer shuffle
    import random as random_mod

    expected = cell_order(stopwatch)
    random_mod.Random("stopwatch:alice").shuffle(expected)
    assert alice == expected[:5]
    resumed = ReviewProtocol(evaluated_store, randomize_order=True)
    session = resumed.open_session("stopwatch", "alice")
    next_cell = resumed.next_task(session)
    assert (next_cell.requirement_id, next_cell.characteristic) == expected[5]
    # and the default protocol still serves the shared questionnaire order
    assert first_cells(shared, "dave") == cell_order(stopwatch)[:5]
