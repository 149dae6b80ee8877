from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTarget, EmptyInput


@dataclass(frozen=True)
class TargetScaler:
    """Train-set mean / population standard deviation of (SAP, EI)."""
    mu: np.ndarray
    sigma: np.ndarray

    def normalize(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.mu) / self.sigma

    def denormalize(self, y_norm) -> np.ndarray:
        return np.asarray(y_norm, dtype=np.float64) * self.sigma + self.mu

    def to_dict(self) -> dict:
        return {'mu': self.mu.tolist(), 'sigma': self.sigma.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TargetScaler":
        return cls(np.asarray(data['mu'], dtype=np.float64), np.asarray(data['sigma'], dtype=np.float64))


def build_target_scaler(train) -> TargetScaler:
    """Fit on a training :class:`PropertyTable` or an (N, 2) target array."""
    y = np.asarray(getattr(train, "targets", train), dtype=np.float64)
    if y.ndim != 2 or y.shape[0] == 0:
        raise EmptyInput("cannot fit target statistics on an empty training set")
    sigma = y.std(axis=0)
    if np.any(sigma <= 0):
        raise DegenerateTarget("a target has zero variance in the training set", sigma=sigma.tolist())
    return TargetScaler(y.mean(axis=0), sigma)
