"""Text-field occlusion: swap one field vector for its mask embedding."""

import numpy as np
import pandas as pd
from loguru import logger

from ..datahub.features import FeatureBatch
from ..datahub.records import TARGETS, TEXT_FIELDS
from ..errors import EmptyInput, InvalidConfig
from .report import AttributionReport


def occlude_field(features: FeatureBatch, k: int, mask_vector: np.ndarray) -> FeatureBatch:
    """Every sample's field *k* replaced by *mask_vector* and marked present."""
    text = features.text.copy()
    text[:, k, :] = mask_vector
    text_mask = features.text_mask.copy()
    text_mask[:, k] = 1.0
    return features.with_columns(text=text, text_mask=text_mask)


def text_field_occlusion(predict, features: FeatureBatch, mask_embeddings: dict[str, np.ndarray],
                         fields: tuple[str, ...] = TEXT_FIELDS, seed: int = 0,
                         checkpoint_hash: str = '') -> AttributionReport:
    """I[k, t] = mean over samples of |y_t(occluded k) - y_t| on the score scale.

    Samples where the field was absent are included; ``coverage`` counts
    the samples that had it."""
    missing = [f for f in fields if f not in mask_embeddings]
    if missing:
        raise InvalidConfig(f"no mask embedding for fields {missing}")
    if len(features) == 0:
        raise EmptyInput("no samples to occlude")
    h = features.text.shape[2]
    baseline = predict(features)
    rows = []
    for name in fields:
        k = TEXT_FIELDS.index(name)
        vector = np.asarray(mask_embeddings[name], dtype=np.float64)
        if vector.shape != (h,):
            raise InvalidConfig(f"mask embedding for {name} has shape {vector.shape}, expected ({h},)")
        delta = np.abs(predict(occlude_field(features, k, vector)) - baseline)
        row = {'field': name, 'coverage': int(np.sum(features.text_mask[:, k] > 0))}
        row.update({f'importance_{t}': float(delta[:, i].mean()) for i, t in enumerate(TARGETS)})
        rows.append(row)
        logger.debug("occluded {}: {}", name, row)
    frame = pd.DataFrame(rows, columns=['field', 'coverage'] + [f'importance_{t}' for t in TARGETS])
    return AttributionReport('text_occlusion', frame, len(features), seed, checkpoint_hash)
