"""Exact-match metrics, element projections and inter-annotator agreement."""

from .agreement import (
    AgreementElement,
    AgreementRow,
    TokenLabeling,
    agreement_suite,
    coincidence_matrix,
    elements_for,
    krippendorff_alpha,
    locate,
    token_labels,
)
from .metrics import (
    MetricRow,
    Projection,
    annotations_by_id,
    element_report,
    error_cases,
    exact_match_prf,
    prf,
    project,
    projections_for,
)

__all__ = [
    "AgreementElement",
    "AgreementRow",
    "MetricRow",
    "Projection",
    "TokenLabeling",
    "agreement_suite",
    "annotations_by_id",
    "coincidence_matrix",
    "element_report",
    "elements_for",
    "error_cases",
    "exact_match_prf",
    "krippendorff_alpha",
    "locate",
    "prf",
    "project",
    "projections_for",
    "token_labels",
]
