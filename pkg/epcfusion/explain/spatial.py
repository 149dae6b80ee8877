"""Spatial attributions: numeric permutation, boundary exchange and
per-point gradient saliency."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..datahub.features import FeatureBatch
from ..datahub.records import TARGETS
from ..datahub.scaler import TargetScaler
from ..diffcore.tensor import Tensor
from ..errors import EmptyInput, InvalidConfig, ShapeError
from ..geometry import SPATIAL_FEATURES
from ..trainer.metrics import Metrics, metrics
from .report import AttributionReport


def _require_pairs(features: FeatureBatch):
    if len(features) < 2:
        raise EmptyInput("permutation analyses need at least two samples", n=len(features))


def spatial_permutation(predict, features: FeatureBatch, feature: str, seed: int = 0,
                        permutation: np.ndarray | None = None) -> np.ndarray:
    """Mean |change| per target after shuffling one standardized spatial column."""
    _require_pairs(features)
    if feature not in SPATIAL_FEATURES:
        raise InvalidConfig(f"unknown spatial feature {feature!r}", choices=list(SPATIAL_FEATURES))
    if permutation is None:
        permutation = np.random.default_rng(seed).permutation(len(features))
    j = SPATIAL_FEATURES.index(feature)
    spatial = features.spatial.copy()
    spatial[:, j] = features.spatial[permutation, j]
    baseline = predict(features)
    shuffled = predict(features.with_columns(spatial=spatial))
    return np.abs(shuffled - baseline).mean(axis=0)


def spatial_permutation_report(predict, features: FeatureBatch, seed: int = 0,
                               checkpoint_hash: str = '') -> AttributionReport:
    rows = []
    for feature in SPATIAL_FEATURES:
        delta = spatial_permutation(predict, features, feature, seed)
        rows.append({'feature': feature, **{f'importance_{t}': float(delta[i]) for i, t in enumerate(TARGETS)}})
    return AttributionReport('spatial_permutation', pd.DataFrame(rows), len(features), seed, checkpoint_hash)


def derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sattolo's shuffle: a single n-cycle, so no index maps to itself."""
    if n < 2:
        raise EmptyInput("a derangement needs at least two elements", n=n)
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass
class BoundaryPermutation:
    baseline: Metrics
    permuted: Metrics
    permutation: np.ndarray
    seed: int
    checkpoint_hash: str = ''

    @property
    def deltas(self) -> dict[str, dict[str, float | None]]:
        out = {}
        for name in TARGETS:
            b, p = self.baseline.per_target[name], self.permuted.per_target[name]
            r2 = p.r2 - b.r2
            out[name] = {'dMAE': p.mae - b.mae, 'dRMSE': p.rmse - b.rmse,
                         'dR2': None if np.isnan(r2) else r2}
        return out

    def to_dict(self) -> dict:
        return {'kind': 'boundary_permutation', 'seed': self.seed, 'checkpoint': self.checkpoint_hash,
                'n_samples': self.baseline.n, 'baseline': self.baseline.to_dict(),
                'permuted': self.permuted.to_dict(), 'delta': self.deltas}


def boundary_permutation(predict, features: FeatureBatch, targets: np.ndarray, seed: int = 0,
                         checkpoint_hash: str = '') -> BoundaryPermutation:
    """Exchange boundary sequences across samples (spatial numerics and the
    other modalities unchanged) and compare metrics before and after."""
    _require_pairs(features)
    perm = derangement(len(features), np.random.default_rng(seed))
    baseline = metrics(predict(features), targets)
    permuted = metrics(predict(features.with_columns(boundary=features.boundary[perm])), targets)
    return BoundaryPermutation(baseline, permuted, perm, seed, checkpoint_hash)


def point_saliency(model, scaler: TargetScaler, sample: FeatureBatch) -> np.ndarray:
    """(L, 2): per target, the norm of d y_t / d (x_l, y_l) on the score
    scale, for each boundary point of a single sample."""
    if len(sample) != 1:
        raise ShapeError(f"saliency is computed one sample at a time, got {len(sample)}")
    n_points = sample.boundary.shape[1]
    if 'spatial' not in model.modalities:
        return np.zeros((n_points, len(TARGETS)))
    model.eval()
    boundary = Tensor(sample.boundary, requires_grad=True, name='boundary')
    y_hat = model(sample, boundary=boundary).y_hat
    saliency = np.zeros((n_points, len(TARGETS)))
    for t in range(len(TARGETS)):
        boundary.grad = None
        seed = np.zeros(y_hat.shape)
        seed[0, t] = 1.0
        y_hat.backward(seed, retain_graph=t < len(TARGETS) - 1)
        saliency[:, t] = np.linalg.norm(boundary.grad[0], axis=1) * scaler.sigma[t]
    model.zero_grad()
    return saliency


def saliency_frame(model, scaler: TargetScaler, sample: FeatureBatch, uprn: str, seed: int = 0,
                   checkpoint_hash: str = '') -> AttributionReport:
    """Saliency next to the normalized points it belongs to, for plotting."""
    saliency = point_saliency(model, scaler, sample)
    points = sample.boundary[0]
    frame = pd.DataFrame({'uprn': uprn, 'point': np.arange(len(points)), 'x': points[:, 0], 'y': points[:, 1]})
    for t, name in enumerate(TARGETS):
        frame[f'saliency_{name}'] = saliency[:, t]
    return AttributionReport('saliency', frame, 1, seed, checkpoint_hash)
