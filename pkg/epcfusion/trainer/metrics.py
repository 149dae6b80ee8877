"""Regression metrics, band accuracy, confusion matrices and subgroup reports.

All functions take scores on the original 1-100 scale."""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import pandas as pd

from ..datahub.bands import BANDS, PARTITIONS, BandTable
from ..datahub.records import TARGETS
from ..errors import EmptyInput, ShapeError


@dataclass
class TargetMetrics:
    mae: float
    rmse: float
    r2: float   # NaN when the evaluated targets have zero variance

    def to_dict(self) -> dict:
        return {'MAE': self.mae, 'RMSE': self.rmse, 'R2': None if math.isnan(self.r2) else self.r2}


@dataclass
class Metrics:
    per_target: dict[str, TargetMetrics]
    n: int

    @property
    def mean_mae(self) -> float:
        return float(np.mean([m.mae for m in self.per_target.values()]))

    def r2(self, target: str) -> float:
        return self.per_target[target].r2

    def to_dict(self) -> dict:
        payload = {name: m.to_dict() for name, m in self.per_target.items()}
        payload['Mean_MAE'] = self.mean_mae
        payload['n'] = self.n
        return payload


def _check(preds: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeError(f"predictions {preds.shape} vs targets {targets.shape}")
    if preds.shape[0] == 0:
        raise EmptyInput("cannot compute metrics on zero samples")
    return preds.reshape(len(preds), -1), targets.reshape(len(targets), -1)


def metrics(preds, targets, names: tuple[str, ...] = TARGETS) -> Metrics:
    """MAE, RMSE and R^2 per target column plus Mean_MAE."""
    preds, targets = _check(preds, targets)
    per_target = {}
    for t, name in enumerate(names):
        err = preds[:, t] - targets[:, t]
        ss_tot = float(np.sum((targets[:, t] - targets[:, t].mean()) ** 2))
        r2 = 1.0 - float(np.sum(err ** 2)) / ss_tot if ss_tot > 0 else math.nan
        per_target[name] = TargetMetrics(float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err ** 2))), r2)
    return Metrics(per_target, len(preds))


def band_accuracy(pred_scores, true_scores, table: BandTable) -> float:
    """Fraction of matches after mapping both to the five merged partitions."""
    pred_scores, true_scores = np.asarray(pred_scores), np.asarray(true_scores)
    if pred_scores.size == 0:
        raise EmptyInput("cannot compute band accuracy on zero samples")
    return float(np.mean(table.partition_indices(pred_scores) == table.partition_indices(true_scores)))


def band_accuracy_7(pred_scores, true_scores, table: BandTable) -> float:
    """Accuracy over the seven unmerged bands."""
    pred_scores, true_scores = np.asarray(pred_scores), np.asarray(true_scores)
    if pred_scores.size == 0:
        raise EmptyInput("cannot compute band accuracy on zero samples")
    return float(np.mean(table.band_indices(pred_scores) == table.band_indices(true_scores)))


def confusion_matrix(pred_scores, true_scores, table: BandTable, merged: bool = True) -> pd.DataFrame:
    """Counts with true classes as rows and predicted classes as columns."""
    labels = PARTITIONS if merged else BANDS
    index = table.partition_indices if merged else table.band_indices
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(counts, (index(true_scores), index(pred_scores)), 1)
    return pd.DataFrame(counts, index=pd.Index(labels, name='true'), columns=pd.Index(labels, name='pred'))


def confusion_frame(pred: np.ndarray, true: np.ndarray, table: BandTable) -> pd.DataFrame:
    """Merged-space confusion for both targets in long form."""
    frames = []
    for t, name in enumerate(TARGETS):
        matrix = confusion_matrix(pred[:, t], true[:, t], table)
        long = matrix.stack().rename('count').reset_index()
        long.insert(0, 'target', name)
        frames.append(long)
    return pd.concat(frames, ignore_index=True)


@dataclass
class SubgroupReport:
    key: str
    frame: pd.DataFrame
    spread: dict = field(default_factory=dict)


def subgroup_report(groups, preds, targets, table: BandTable, key: str = 'group',
                    min_size: int = 30) -> SubgroupReport:
    """Per-group n, MAE, R^2 and merged band accuracy for each target; groups
    smaller than *min_size* are flagged. ``spread`` holds the largest
    pairwise R^2 and MAE differences among groups of at least *min_size*."""
    preds, targets = _check(preds, targets)
    groups = np.asarray(groups, dtype=object).astype(str)
    rows = []
    for value in sorted(set(groups.tolist())):
        sel = groups == value
        m = metrics(preds[sel], targets[sel])
        row = {key: value, 'n': int(sel.sum()), 'small': bool(sel.sum() < min_size)}
        for t, name in enumerate(TARGETS):
            row[f'MAE_{name}'] = m.per_target[name].mae
            row[f'R2_{name}'] = m.per_target[name].r2
            row[f'band_acc_{name}'] = band_accuracy(preds[sel, t], targets[sel, t], table)
        rows.append(row)
    frame = pd.DataFrame(rows)
    spread = {}
    sized = frame[~frame['small']] if len(frame) else frame
    for name in TARGETS:
        for metric in ('R2', 'MAE'):
            values = [v for v in sized[f'{metric}_{name}'].tolist() if not math.isnan(v)]
            pairs = [abs(a - b) for a, b in combinations(values, 2)]
            spread[f'max_{metric}_diff_{name}'] = max(pairs) if pairs else 0.0
    return SubgroupReport(key, frame, spread)
