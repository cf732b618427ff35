"""Tabular views of metric and agreement rows, written as CSV and aligned text."""

from pathlib import Path
from typing import Iterable

import pandas as pd

from opinion_forge.metrics.agreement import AgreementElement, AgreementRow
from opinion_forge.metrics.metrics import MetricRow, Projection
from opinion_forge.utils import atomic_write_text


ADJUDICATOR_PREFIX = "adjudicator:"


def metrics_frame(rows: Iterable[MetricRow]) -> pd.DataFrame:
    columns = list(MetricRow.__dataclass_fields__)
    frame = pd.DataFrame([r.as_dict() for r in rows], columns=columns)
    order = {str(p): i for i, p in enumerate(Projection)}
    frame["_order"] = frame["projection"].map(order)
    return frame.sort_values(["dataset", "annotator", "_order"]).drop(columns="_order").reset_index(drop=True)


def agreement_frame(rows: Iterable[AgreementRow]) -> pd.DataFrame:
    columns = list(AgreementRow.__dataclass_fields__)
    frame = pd.DataFrame([r.as_dict() for r in rows], columns=columns)
    order = {str(e): i for i, e in enumerate(AgreementElement)}
    frame["_order"] = frame["element"].map(order)
    return frame.sort_values(["dataset", "_order"]).drop(columns="_order").reset_index(drop=True)


def _flatten(frame: pd.DataFrame) -> pd.DataFrame:
    frame = frame.copy()
    frame.columns = [" ".join(str(c) for c in col) if isinstance(col, tuple) else str(col) for col in frame.columns]
    return frame.reset_index()


def joint_table(metrics: pd.DataFrame) -> pd.DataFrame:
    """Joint P/R/F1 per annotator (rows) and dataset (column groups)."""
    joint = metrics[metrics["projection"] == str(Projection.JOINT)]
    table = joint.pivot(index="annotator", columns="dataset", values=["precision", "recall", "f1"])
    table = table.swaplevel(axis=1).sort_index(axis=1, level=0, sort_remaining=False)
    return _flatten(table)


def element_table(metrics: pd.DataFrame) -> pd.DataFrame:
    """F1 per projection (columns) for every dataset and annotator."""
    table = metrics.pivot(index=["dataset", "annotator"], columns="projection", values="f1")
    ordered = [str(p) for p in Projection if str(p) in table.columns]
    return _flatten(table[ordered])


def agreement_table(agreement: pd.DataFrame) -> pd.DataFrame:
    table = agreement.pivot(index="dataset", columns="element", values="alpha")
    ordered = [str(e) for e in AgreementElement if str(e) in table.columns]
    return _flatten(table[ordered])


def adjudication_gain(metrics: pd.DataFrame) -> pd.DataFrame:
    """Joint F1 of each adjudicated run next to the best single annotator."""
    joint = metrics[metrics["projection"] == str(Projection.JOINT)]
    is_adj = joint["annotator"].str.startswith(ADJUDICATOR_PREFIX)
    rows = []
    for dataset, group in joint.groupby("dataset", sort=True):
        annotators = group[~is_adj.loc[group.index]]
        if annotators.empty:
            continue
        best = annotators.sort_values(["f1", "annotator"], ascending=[False, True]).iloc[0]
        for _, adj in group[is_adj.loc[group.index]].sort_values("annotator").iterrows():
            rows.append({
                "dataset": dataset,
                "adjudicator": adj["annotator"],
                "best_annotator": best["annotator"],
                "best_f1": best["f1"],
                "adjudicated_f1": adj["f1"],
                "gain": adj["f1"] - best["f1"],
            })
    return pd.DataFrame(rows, columns=["dataset", "adjudicator", "best_annotator", "best_f1", "adjudicated_f1", "gain"])


def render_text(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "(empty)\n"
    return frame.to_string(index=False, float_format=lambda x: f"{x:.4f}") + "\n"


def write_table(frame: pd.DataFrame, stem: Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and an aligned ``<stem>.txt``."""
    stem = Path(stem)
    csv_path, txt_path = stem.with_suffix(".csv"), stem.with_suffix(".txt")
    atomic_write_text(csv_path, frame.to_csv(index=False, float_format="%.6f", lineterminator="\n"))
    atomic_write_text(txt_path, render_text(frame))
    return csv_path, txt_path
