"""Test-set evaluation and prediction dumps."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..datahub.bands import BANDS, PARTITIONS, BandTable
from ..datahub.features import FeatureBatch
from ..datahub.records import PropertyTable, TARGETS
from ..fusionnet.predictor import PredictFn
from .metrics import Metrics, band_accuracy, band_accuracy_7, confusion_frame, metrics


@dataclass
class EvaluationResult:
    metrics: Metrics
    band_accuracy: dict[str, float]
    band_accuracy_7: dict[str, float]
    confusion: pd.DataFrame
    predictions: pd.DataFrame

    def to_dict(self) -> dict:
        payload = self.metrics.to_dict()
        payload['band_accuracy'] = self.band_accuracy
        payload['band_accuracy_7'] = self.band_accuracy_7
        return payload


def prediction_frame(uprns, pred: np.ndarray, true: np.ndarray, table: BandTable) -> pd.DataFrame:
    frame = pd.DataFrame({'uprn': np.asarray(uprns, dtype=object)})
    for t, name in enumerate(TARGETS):
        key = name.lower()
        frame[f'{key}_true'] = true[:, t]
        frame[f'{key}_pred'] = pred[:, t]
        frame[f'{key}_band_true'] = [BANDS[i] for i in table.band_indices(true[:, t])]
        frame[f'{key}_band_pred'] = [BANDS[i] for i in table.band_indices(pred[:, t])]
        frame[f'{key}_partition_pred'] = [PARTITIONS[i] for i in table.partition_indices(pred[:, t])]
    return frame


def evaluate(predict: PredictFn, features: FeatureBatch, table: PropertyTable, bands: BandTable) -> EvaluationResult:
    pred = predict(features)
    true = table.targets
    return EvaluationResult(
        metrics(pred, true),
        {name: band_accuracy(pred[:, t], true[:, t], bands) for t, name in enumerate(TARGETS)},
        {name: band_accuracy_7(pred[:, t], true[:, t], bands) for t, name in enumerate(TARGETS)},
        confusion_frame(pred, true, bands),
        prediction_frame(table.uprns, pred, true, bands),
    )
