"""Agreement and flaw-detection metrics.

Cohen's kappa compares two binary labelings over the same cells:

    kappa = (p_o - p_e) / (1 - p_e)

where p_o is the observed agreement fraction and p_e the agreement expected
from the raters' marginal label frequencies. All counts are exact integers;
division happens once at the end, so results are reproducible bit-for-bit.

"Flawed" (Violates) is the positive class for precision and recall. Undefined
ratios are reported as None, never coerced to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .model import (
    AgreementReport,
    Characteristic,
    ImprovementRating,
    Phase,
    Plausibility,
    ReviewerVote,
    Verdict,
)
from .errors import MetricsError

CellKey = tuple[str, Characteristic]

# The interpretation bands with their literal thresholds; data, not logic,
# so an alternative band taxonomy can be swapped in.
KAPPA_BANDS: tuple[tuple[float, str], ...] = (
    (0.8, "near-perfect"),
    (0.6, "substantial"),
    (0.4, "weak"),
    (0.2, "fair"),
    (float("-inf"), "none"),
)


@dataclass(frozen=True)
class BinaryLabeling:
    """Ordered (cell key, verdict) pairs from one source (rater)."""

    items: tuple[tuple[CellKey, Verdict], ...]
    source: str

    def __post_init__(self) -> None:
        keys = [key for key, _ in self.items]
        if len(set(keys)) != len(keys):
            raise MetricsError("duplicate-key", f"labeling {self.source!r} repeats a cell key")

    @classmethod
    def from_mapping(cls, labels: Mapping[CellKey, Verdict], source: str) -> "BinaryLabeling":
        return cls(items=tuple(sorted(labels.items(), key=lambda kv: _sort_key(kv[0]))), source=source)

    def as_dict(self) -> dict[CellKey, Verdict]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)


def _sort_key(key: CellKey) -> tuple[str, int]:
    requirement_id, characteristic = key
    return (requirement_id, list(Characteristic).index(characteristic))


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    observed_agreement: float
    expected_agreement: float


def _aligned(a: BinaryLabeling, b: BinaryLabeling) -> list[tuple[Verdict, Verdict]]:
    if len(a) == 0 or len(b) == 0:
        raise MetricsError("empty-labeling", "labelings must contain at least one cell")
    da, db = a.as_dict(), b.as_dict()
    if set(da) != set(db):
        missing = set(da) ^ set(db)
        raise MetricsError(
            "key-mismatch",
            f"labelings {a.source!r} and {b.source!r} cover different cells ({len(missing)} differ)",
        )
    return [(da[key], db[key]) for key in da]


def cohens_kappa(a: BinaryLabeling, b: BinaryLabeling) -> KappaResult:
    """Chance-corrected agreement between two binary labelings.

    Both labelings must cover exactly the same cell keys. When both raters are
    unanimous on the same class, p_o = p_e = 1 and kappa is defined as 1.
    """
    pairs = _aligned(a, b)
    n = len(pairs)
    agree = sum(1 for va, vb in pairs if va is vb)
    a_fulfills = sum(1 for va, _ in pairs if va is Verdict.FULFILLS)
    b_fulfills = sum(1 for _, vb in pairs if vb is Verdict.FULFILLS)
    p_o = agree / n
    p_e = (a_fulfills * b_fulfills + (n - a_fulfills) * (n - b_fulfills)) / (n * n)
    if p_e == 1.0:
        # forces p_o = 1 (both raters unanimous on the same class)
        return KappaResult(kappa=1.0, observed_agreement=p_o, expected_agreement=p_e)
    return KappaResult(
        kappa=(p_o - p_e) / (1.0 - p_e), observed_agreement=p_o, expected_agreement=p_e
    )


def interpret_kappa(kappa: float) -> str:
    if not -1.0 <= kappa <= 1.0:
        raise MetricsError("out-of-range", f"kappa must lie in [-1, 1], got {kappa}")
    for threshold, band in KAPPA_BANDS:
        if kappa >= threshold:
            return band
    raise AssertionError("unreachable: band table covers [-1, 1]")


def flaw_precision_recall(
    ground_truth: BinaryLabeling, llm: BinaryLabeling
) -> tuple[Optional[float], Optional[float]]:
    """Precision and recall of flaw (Violates) detection against ground truth.

    precision = true flaws flagged / all cells flagged by the model
    recall    = true flaws flagged / all flawed cells in the ground truth

    Either value is None (not applicable) when its denominator is zero.
    """
    pairs = _aligned(ground_truth, llm)
    flagged = sum(1 for _, vl in pairs if vl is Verdict.VIOLATES)
    flawed = sum(1 for vg, _ in pairs if vg is Verdict.VIOLATES)
    hits = sum(1 for vg, vl in pairs if vg is Verdict.VIOLATES and vl is Verdict.VIOLATES)
    precision = hits / flagged if flagged else None
    recall = hits / flawed if flawed else None
    return precision, recall


@dataclass(frozen=True)
class MatrixSummary:
    sigma_req: dict[str, int]
    sigma_qc: dict[Characteristic, int]
    total: int


def summarize_matrix(labels: BinaryLabeling) -> MatrixSummary:
    """Fulfilled-cell counts per requirement row and characteristic column.

    The labeling must cover a full grid: every requirement id present must
    carry a label for all nine characteristics.
    """
    per_req: dict[str, set[Characteristic]] = {}
    for (requirement_id, characteristic), _ in labels.items:
        per_req.setdefault(requirement_id, set()).add(characteristic)
    incomplete = {rid for rid, chars in per_req.items() if len(chars) != len(Characteristic)}
    if not per_req or incomplete:
        raise MetricsError(
            "incomplete-grid",
            f"labeling {labels.source!r} does not cover a full requirements x characteristics grid",
            requirements=sorted(incomplete),
        )
    sigma_req = {rid: 0 for rid in per_req}
    sigma_qc = {characteristic: 0 for characteristic in Characteristic}
    total = 0
    for (requirement_id, characteristic), verdict in labels.items:
        if verdict is Verdict.FULFILLS:
            sigma_req[requirement_id] += 1
            sigma_qc[characteristic] += 1
            total += 1
    return MatrixSummary(sigma_req=sigma_req, sigma_qc=sigma_qc, total=total)


def rating_percentages(
    votes: Iterable[ReviewerVote], field: str
) -> dict[Characteristic, Optional[float]]:
    """Positive-rating percentage per characteristic over bound-phase votes.

    field = "plausibility": share of Plausible among all plausibility ratings.
    field = "improvement": share of Improvement among all improvement ratings.
    Percentages pool every (cell, reviewer) rating; characteristics with no
    eligible ratings report None (not applicable).
    """
    if field not in ("plausibility", "improvement"):
        raise MetricsError("unknown-field", f"no rating field {field!r}")
    eligible: dict[Characteristic, int] = {c: 0 for c in Characteristic}
    positive: dict[Characteristic, int] = {c: 0 for c in Characteristic}
    for vote in votes:
        if vote.phase is not Phase.BOUND:
            continue
        if field == "plausibility":
            rating = vote.plausibility
            if rating is None:
                continue
            eligible[vote.characteristic] += 1
            if rating is Plausibility.PLAUSIBLE:
                positive[vote.characteristic] += 1
        else:
            rating = vote.improvement_rating
            if rating is None:
                continue
            eligible[vote.characteristic] += 1
            if rating is ImprovementRating.IMPROVEMENT:
                positive[vote.characteristic] += 1
    return {
        characteristic: (100.0 * positive[characteristic] / eligible[characteristic])
        if eligible[characteristic]
        else None
        for characteristic in Characteristic
    }


def build_agreement_report(
    ground_truth: BinaryLabeling, llm: BinaryLabeling
) -> AgreementReport:
    """Assemble the full agreement report for one ground-truth/model pair."""
    result = cohens_kappa(ground_truth, llm)
    precision, recall = flaw_precision_recall(ground_truth, llm)
    summary = summarize_matrix(llm)
    return AgreementReport(
        kappa=result.kappa,
        observed_agreement=result.observed_agreement,
        expected_agreement=result.expected_agreement,
        band=interpret_kappa(result.kappa),
        precision=precision,
        recall=recall,
        sigma_req=dict(summary.sigma_req),
        sigma_qc={c.value: n for c, n in summary.sigma_qc.items()},
        sample_count=len(llm),
    )


def labeling_from_sequence(
    labels: Sequence[Verdict], source: str, prefix: str = "k"
) -> BinaryLabeling:
    """Convenience wrapper for tests and ad-hoc comparisons: synthesizes cell
    keys k1..kN over the first characteristic."""
    items = tuple(
        ((f"{prefix}{i + 1}", Characteristic.APPROPRIATE), verdict)
        for i, verdict in enumerate(labels)
    )
    return BinaryLabeling(items=items, source=source)
