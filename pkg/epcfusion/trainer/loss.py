from dataclasses import dataclass

import numpy as np

from ..config import LossConfig
from ..datahub.bands import BandTable
from ..diffcore import functional as F
from ..diffcore.tensor import Tensor
from ..fusionnet.model import FusionOutput


@dataclass
class LossParts:
    total: Tensor
    huber: float
    ce_sap: float
    ce_ei: float


def band_labels(scores: np.ndarray, table: BandTable) -> np.ndarray:
    """(N, 2) band indices of original-scale (SAP, EI) scores."""
    return np.stack([table.band_indices(scores[:, 0]), table.band_indices(scores[:, 1])], axis=1)


def total_loss(output: FusionOutput, y_norm: np.ndarray, labels: np.ndarray, cfg: LossConfig) -> LossParts:
    """Huber on the normalized targets plus the weighted band cross-entropies.
    *labels* are the bands of the ground-truth scores on their original scale."""
    huber = F.huber_loss(output.y_hat, y_norm, cfg.delta)
    total = huber
    ce = {}
    for t, (name, weight) in enumerate((('sap', cfg.w_sap), ('ei', cfg.w_ei))):
        if weight == 0:
            ce[name] = 0.0
            continue
        term = F.cross_entropy(output.band_logits[:, t, :], labels[:, t])
        ce[name] = term.item()
        total = total + weight * term
    return LossParts(total, huber.item(), ce['sap'], ce['ei'])
