"""Requirements quality workbench.

Evaluates individual software requirements against the nine per-requirement
quality characteristics with a chat-completion model, runs a two-phase human
review protocol on the results, and reports agreement and flaw-detection
metrics against majority-vote ground truth.
"""

from .model import (
    Characteristic,
    GroundTruthLabel,
    LlmAssessment,
    Phase,
    Project,
    Requirement,
    RequirementKind,
    ReviewerVote,
    Verdict,
    VoteVerdict,
    characteristic_catalog,
    validate_project,
)
from .metrics import (
    BinaryLabeling,
    cohens_kappa,
    flaw_precision_recall,
    interpret_kappa,
    rating_percentages,
    summarize_matrix,
)
from .protocol import ReviewProtocol, majority_label

__version__ = "0.1.0"

__all__ = [
    "BinaryLabeling",
    "Characteristic",
    "GroundTruthLabel",
    "LlmAssessment",
    "Phase",
    "Project",
    "Requirement",
    "RequirementKind",
    "ReviewProtocol",
    "ReviewerVote",
    "Verdict",
    "VoteVerdict",
    "characteristic_catalog",
    "cohens_kappa",
    "flaw_precision_recall",
    "interpret_kappa",
    "majority_label",
    "rating_percentages",
    "summarize_matrix",
    "validate_project",
]
