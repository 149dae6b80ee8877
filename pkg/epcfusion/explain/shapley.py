"""Exact Shapley values of the nine tabular features.

The value of a coalition S is the mean model output over the background
rows with the features in S taken from the explained sample; text and
boundary inputs stay those of the sample. With nine features all 512
coalitions are enumerated."""

from dataclasses import dataclass
from functools import partial
from math import factorial
from typing import Callable

import numpy as np
import pandas as pd
from loguru import logger

from ..datahub.features import FeatureBatch
from ..datahub.records import TABULAR_FEATURES, TARGETS
from ..errors import EmptyInput, InvalidConfig, ShapeError
from ..stages import Timer, map_stage
from .report import AttributionReport


@dataclass
class ShapleyValues:
    phi: np.ndarray        # (n_features, n_targets)
    base_value: np.ndarray  # v(empty): background mean output
    output: np.ndarray      # v(all): output at the sample

    def efficiency_gap(self) -> np.ndarray:
        return self.phi.sum(axis=0) - (self.output - self.base_value)


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    bits = masks.copy()
    while np.any(bits):
        counts += bits & 1
        bits >>= 1
    return counts


def coalition_values(value_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     background: np.ndarray) -> np.ndarray:
    """``v(S)`` for every bitmask S over the features of *x*, shape (2^n, T).

    All 2^n * B hybrid rows go through *value_fn* in one call."""
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise InvalidConfig("Shapley values need at least one background row")
    if background.shape[1] != x.shape[0]:
        raise ShapeError(f"background has {background.shape[1]} features, sample has {x.shape[0]}")
    n, b = x.shape[0], background.shape[0]
    masks = np.arange(2 ** n)
    take = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)          # (2^n, n)
    rows = np.where(take[:, None, :], x[None, None, :], background[None, :, :])
    out = np.asarray(value_fn(rows.reshape(-1, n)), dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    return out.reshape(2 ** n, b, -1).mean(axis=1)


def exact_shapley(values: np.ndarray, n: int) -> np.ndarray:
    """phi_i = sum over S without i of |S|!(n-|S|-1)!/n! (v(S+i) - v(S))."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != 2 ** n:
        raise ShapeError(f"expected {2 ** n} coalition values, got {values.shape[0]}")
    masks = np.arange(2 ** n)
    sizes = _popcount(masks)
    weights = np.array([factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)])
    phi = np.zeros((n,) + values.shape[1:])
    for i in range(n):
        without = masks[(masks >> i) & 1 == 0]
        w = weights[sizes[without]].reshape((-1,) + (1,) * (values.ndim - 1))
        phi[i] = np.sum(w * (values[without | (1 << i)] - values[without]), axis=0)
    return phi


def _value_function(predict, sample: FeatureBatch):
    if hasattr(predict, 'tabular_function'):
        return predict.tabular_function(sample)

    def evaluate(rows: np.ndarray) -> np.ndarray:
        return predict(sample.take(np.zeros(len(rows), dtype=np.int64)).with_tabular_rows(rows))

    return evaluate


def shapley_tabular(predict, sample: FeatureBatch, background: FeatureBatch) -> ShapleyValues:
    """Shapley values for one sample (a batch of length 1) on the score scale."""
    if len(background) == 0:
        raise InvalidConfig("Shapley values need at least one background row")
    if len(sample) != 1:
        raise ShapeError(f"explain one sample at a time, got {len(sample)}")
    x = sample.tabular_rows()[0]
    values = coalition_values(_value_function(predict, sample), x, background.tabular_rows())
    return ShapleyValues(exact_shapley(values, x.shape[0]), values[0], values[-1])


def select_background(features: FeatureBatch, size: int, seed: int) -> np.ndarray:
    """Sorted indices of *size* rows drawn without replacement."""
    if len(features) == 0:
        raise EmptyInput("no rows to draw a Shapley background from")
    rng = np.random.default_rng([seed, 1])
    return np.sort(rng.choice(len(features), min(size, len(features)), replace=False))


def _explain_one(index: int, predict, features: FeatureBatch, background: FeatureBatch) -> np.ndarray:
    return shapley_tabular(predict, features.take([index]), background).phi


def shapley_values(predict, features: FeatureBatch, background: FeatureBatch, workers: int = 1,
                   multi_process: bool = False) -> np.ndarray:
    """Per-sample values, shape (N, 9, 2)."""
    if len(features) == 0:
        raise EmptyInput("no samples to explain")
    fn = partial(_explain_one, predict=predict, features=features, background=background)
    with Timer('shapley', per_item=True) as timer:
        phis = map_stage(fn, range(len(features)), workers, multi_process, name='shapley')
    timer.log('INFO', samples=len(features), background=len(background))
    return np.stack(phis)


def shapley_importance(predict, features: FeatureBatch, background: FeatureBatch, seed: int = 0,
                       checkpoint_hash: str = '', workers: int = 1, multi_process: bool = False,
                       background_desc: str = '') -> AttributionReport:
    """Global importance: mean |phi| over the explained samples, per target."""
    phi = shapley_values(predict, features, background, workers, multi_process)
    frame = pd.DataFrame({'feature': list(TABULAR_FEATURES)})
    for t, target in enumerate(TARGETS):
        frame[f'importance_{target}'] = np.abs(phi[:, :, t]).mean(axis=0)
        frame[f'mean_phi_{target}'] = phi[:, :, t].mean(axis=0)
    logger.info("shapley: top feature SAP {}, EI {}",
                frame.loc[frame['importance_SAP'].idxmax(), 'feature'],
                frame.loc[frame['importance_EI'].idxmax(), 'feature'])
    return AttributionReport('shapley', frame, len(features), seed, checkpoint_hash,
                             background_desc or f"{len(background)} rows")
