"""Dice evaluation per label, the foreground-mean aggregate, and fold statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volumes import FOREGROUND_LABELS, LABEL_NAMES, UNLABELED, LabelVolume

# column order of the summary tables: foreground mean first, then per label
REPORT_COLUMNS = ("total", "bone", "corroded_screw", "screw")
_COLUMN_TITLES = {
    "total": "Total",
    "bone": "Bone",
    "corroded_screw": "CorrodedScrew",
    "screw": "Screw",
}
_LABEL_KEYS = {label: LABEL_NAMES[label] for label in FOREGROUND_LABELS}


@dataclass(frozen=True)
class DiceReport:
    """Per-label Dice over the annotated region plus the foreground mean."""

    per_label: dict[int, float]  # keys 1 (bone), 2 (corroded screw), 3 (screw)
    total: float
    ref_voxels: dict[int, int]
    pred_voxels: dict[int, int]

    def column_values(self) -> dict[str, float]:
        return {
            "total": self.total,
            "bone": self.per_label[1],
            "corroded_screw": self.per_label[2],
            "screw": self.per_label[3],
        }


@dataclass(frozen=True)
class FoldAggregate:
    """Mean and population standard deviation over cross-validation folds."""

    mean: float
    std: float
    n_folds: int

    def __post_init__(self):
        if self.n_folds < 1:
            raise ValueError("n_folds must be >= 1")
        if self.std < 0:
            raise ValueError("std must be nonnegative")


def dice_mask(pred, ref) -> float:
    """Dice overlap 2|A∩B| / (|A|+|B|) of two binary masks.

    Both masks empty counts as a perfect 1.0: an absent structure correctly
    predicted absent.
    """
    a = np.asarray(pred).astype(bool)
    b = np.asarray(ref).astype(bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    size_sum = int(a.sum()) + int(b.sum())
    if size_sum == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / size_sum


def dice_report(pred: LabelVolume, ref: LabelVolume) -> DiceReport:
    """Per-label Dice of pred vs ref, restricted to the annotated voxels of ref.

    Ground truth exists only on annotated planes, so voxels where ref is 255
    are excluded. Background is excluded from the aggregate: total is the
    plain mean of the bone / corroded-screw / screw Dice values.
    """
    if pred.meta.dims != ref.meta.dims:
        raise ValueError(f"volume dims differ: {pred.meta.dims} vs {ref.meta.dims}")
    evaluated = ref.data != UNLABELED
    if not evaluated.any():
        raise ValueError("reference volume is entirely unlabeled")
    pred_region = pred.data[evaluated]
    ref_region = ref.data[evaluated]
    per_label = {}
    ref_voxels = {}
    pred_voxels = {}
    for label in FOREGROUND_LABELS:
        pred_mask = pred_region == label
        ref_mask = ref_region == label
        per_label[label] = dice_mask(pred_mask, ref_mask)
        ref_voxels[label] = int(ref_mask.sum())
        pred_voxels[label] = int(pred_mask.sum())
    total = sum(per_label.values()) / len(per_label)
    return DiceReport(
        per_label=per_label, total=total, ref_voxels=ref_voxels, pred_voxels=pred_voxels
    )


def aggregate_folds(values) -> FoldAggregate:
    """Mean and population std (divide by n) of per-fold scores."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("need at least one fold value")
    return FoldAggregate(mean=float(vals.mean()), std=float(vals.std()), n_folds=vals.size)


# ---------------------------------------------------------------------------
# report files: a human-readable table block plus key=value lines

def format_report(report: DiceReport) -> str:
    cols = report.column_values()
    header = "  ".join(f"{_COLUMN_TITLES[c]:>13s}" for c in REPORT_COLUMNS)
    row = "  ".join(f"{cols[c]:>13.6f}" for c in REPORT_COLUMNS)
    lines = [f"# {header}", f"# {row}"]
    for col in REPORT_COLUMNS:
        lines.append(f"dice_{col}={cols[col]:.6f}")
    for label, key in _LABEL_KEYS.items():
        lines.append(f"voxels_ref_{key}={report.ref_voxels[label]}")
    for label, key in _LABEL_KEYS.items():
        lines.append(f"voxels_pred_{key}={report.pred_voxels[label]}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, float]:
    """Read the key=value section of a report back into a column->value dict."""
    values = {}
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        if key.startswith("dice_"):
            values[key[len("dice_"):]] = float(value)
    missing = [c for c in REPORT_COLUMNS if c not in values]
    if missing:
        raise ValueError(f"report is missing columns: {missing}")
    return values


def format_cv_summary(per_fold_columns: list[dict[str, float]]) -> str:
    """Mean ± population std per column across folds, in the table column order."""
    if not per_fold_columns:
        raise ValueError("need at least one fold report")
    header = "  ".join(f"{_COLUMN_TITLES[c]:>15s}" for c in REPORT_COLUMNS)
    cells = []
    for col in REPORT_COLUMNS:
        agg = aggregate_folds([fold[col] for fold in per_fold_columns])
        cells.append(f"{agg.mean:.3f} ± {agg.std:.3f}")
    row = "  ".join(f"{cell:>15s}" for cell in cells)
    lines = [f"folds={len(per_fold_columns)}", header, row]
    for col in REPORT_COLUMNS:
        agg = aggregate_folds([fold[col] for fold in per_fold_columns])
        lines.append(f"mean_{col}={agg.mean:.6f}")
        lines.append(f"std_{col}={agg.std:.6f}")
    return "\n".join(lines) + "\n"
