"""Denormalized prediction over a trained model."""

from typing import Callable, Protocol

import numpy as np

from ..datahub.features import FeatureBatch
from ..datahub.scaler import TargetScaler
from ..diffcore.tensor import Tensor, no_grad
from .model import FusionModel

TabularFunction = Callable[[np.ndarray], np.ndarray]


class PredictFn(Protocol):
    def __call__(self, batch: FeatureBatch) -> np.ndarray: ...


class Predictor:
    """Callable ``batch -> (N, 2)`` SAP/EI on the original score scale.

    The analyses take any callable with this signature, so a hand-built
    surrogate can stand in for a model."""

    def __init__(self, model: FusionModel, scaler: TargetScaler, chunk: int = 1024):
        self.model = model
        self.scaler = scaler
        self.chunk = chunk

    def __call__(self, batch: FeatureBatch) -> np.ndarray:
        y_norm, _ = self.model.predict(batch, self.chunk)
        return self.scaler.denormalize(y_norm)

    def alpha(self, batch: FeatureBatch) -> np.ndarray:
        return self.model.predict(batch, self.chunk)[1]

    def tabular_function(self, sample: FeatureBatch) -> TabularFunction:
        """``rows (n, 9) -> (n, 2)`` for one sample whose text and spatial
        inputs stay fixed; those latents are encoded once."""
        model = self.model
        model.eval()
        with no_grad():
            fixed = {m: z.data for m, z in model.encode(sample).items() if m != 'tab'}

        def evaluate(rows: np.ndarray) -> np.ndarray:
            out = []
            with no_grad():
                for start in range(0, len(rows), self.chunk):
                    part = rows[start:start + self.chunk]
                    n = len(part)
                    latents = {m: _repeat(z, n) for m, z in fixed.items()}
                    if 'tab' in model.modalities:
                        latents['tab'] = model.tabular(np.rint(part[:, :sample.cat_idx.shape[1]]).astype(np.int64),
                                                       part[:, sample.cat_idx.shape[1]:])
                    out.append(model.fuse_and_predict(latents).y_hat.data)
            return self.scaler.denormalize(np.concatenate(out))

        return evaluate


def _repeat(z: np.ndarray, n: int) -> Tensor:
    return Tensor(np.repeat(z, n, axis=0))
