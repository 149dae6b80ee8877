"""Distribution of the sample-wise modality weights."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import EmptyInput


@dataclass
class GateStats:
    alpha: np.ndarray           # (N, M)
    summary: pd.DataFrame       # modality, mean, std, cv
    histogram: pd.DataFrame     # modality, bin_lo, bin_hi, count
    groups: pd.DataFrame | None = None


def _summary(alpha: np.ndarray, modalities) -> pd.DataFrame:
    mean = alpha.mean(axis=0)
    std = alpha.std(axis=0)
    return pd.DataFrame({'modality': list(modalities), 'mean': mean, 'std': std,
                         'cv': np.where(mean > 0, std / np.where(mean > 0, mean, 1.0), np.nan)})


def alpha_stats(alpha: np.ndarray, modalities, bin_width: float = 0.02, groups=None,
                group_key: str = 'group') -> GateStats:
    """Mean, standard deviation, coefficient of variation and a fixed-width
    histogram on [0, 1] of each modality's weight; optionally the same
    summary per group."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 2 or alpha.shape[0] == 0:
        raise EmptyInput("no gate weights to summarise")
    edges = np.linspace(0.0, 1.0, int(round(1.0 / bin_width)) + 1)
    rows = []
    for m, name in enumerate(modalities):
        counts, _ = np.histogram(np.clip(alpha[:, m], 0.0, 1.0), bins=edges)
        rows += [{'modality': name, 'bin_lo': lo, 'bin_hi': hi, 'count': int(c)}
                 for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    grouped = None
    if groups is not None:
        groups = np.asarray(groups, dtype=object).astype(str)
        parts = []
        for value in sorted(set(groups.tolist())):
            part = _summary(alpha[groups == value], modalities)
            part.insert(0, group_key, value)
            part.insert(1, 'n', int(np.sum(groups == value)))
            parts.append(part)
        grouped = pd.concat(parts, ignore_index=True)
    return GateStats(alpha, _summary(alpha, modalities), pd.DataFrame(rows), grouped)


def gate_weight_stats(model, features, bin_width: float = 0.02, groups=None, group_key: str = 'group') -> GateStats:
    """Eval-mode gate weights of *model* over *features*, summarised.

    A model with a single modality has no gate and reports alpha = 1."""
    _, alpha = model.predict(features)
    return alpha_stats(alpha, model.modalities, bin_width, groups, group_key)
