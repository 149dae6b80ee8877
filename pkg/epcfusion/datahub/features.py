"""Train-fitted encoding of a :class:`PropertyTable` into model inputs."""

from dataclasses import dataclass, fields, replace

import numpy as np
from loguru import logger

from ..errors import EmptyInput
from .records import CATEGORICAL_FIELDS, PropertyTable

UNKNOWN = 0


@dataclass(eq=False)
class FeatureBatch:
    """Model-ready arrays for a set of properties."""
    cat_idx: np.ndarray      # (N, 5) int, 0 = unknown
    numeric: np.ndarray      # (N, 4) standardized
    text: np.ndarray         # (N, 8, h)
    text_mask: np.ndarray    # (N, 8) float 0/1
    boundary: np.ndarray     # (N, L, 2) normalized
    spatial: np.ndarray      # (N, 3) standardized

    def __len__(self):
        return int(self.cat_idx.shape[0])

    def take(self, indices) -> "FeatureBatch":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureBatch(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def with_columns(self, **columns) -> "FeatureBatch":
        return replace(self, **columns)

    def tabular_rows(self) -> np.ndarray:
        """The 9 tabular features as one float matrix: 5 indices then 4 numerics."""
        return np.concatenate([self.cat_idx.astype(np.float64), self.numeric], axis=1)

    def with_tabular_rows(self, rows: np.ndarray) -> "FeatureBatch":
        n_cat = self.cat_idx.shape[1]
        return replace(self, cat_idx=np.rint(rows[:, :n_cat]).astype(np.int64), numeric=rows[:, n_cat:])


@dataclass
class Preprocessor:
    """Vocabularies, numeric imputation and standardization fitted on train.

    Unknown or missing categories map to index 0; missing numerics take the
    train median before standardization."""
    vocabularies: list[list[str]]
    numeric_median: np.ndarray
    numeric_mean: np.ndarray
    numeric_std: np.ndarray
    spatial_mean: np.ndarray
    spatial_std: np.ndarray

    @classmethod
    def fit(cls, train: PropertyTable) -> "Preprocessor":
        if len(train) == 0:
            raise EmptyInput("cannot fit preprocessing on an empty training set")
        vocabularies = []
        for k in range(len(CATEGORICAL_FIELDS)):
            values = {str(v) for v in train.categorical[:, k] if v is not None and v == v and str(v) != ''}
            vocabularies.append(sorted(values))
        median = np.nanmedian(train.numeric, axis=0)
        median = np.where(np.isfinite(median), median, 0.0)
        numeric = _impute(train.numeric, median)
        return cls(vocabularies, median, numeric.mean(axis=0), _safe_std(numeric),
                   train.spatial.mean(axis=0), _safe_std(train.spatial))

    @property
    def vocab_sizes(self) -> list[int]:
        """Embedding table sizes, index 0 included."""
        return [len(v) + 1 for v in self.vocabularies]

    def encode_categorical(self, table: PropertyTable) -> tuple[np.ndarray, int]:
        lookups = [{v: i + 1 for i, v in enumerate(vocab)} for vocab in self.vocabularies]
        idx = np.zeros(table.categorical.shape, dtype=np.int64)
        unknown = 0
        for k, lookup in enumerate(lookups):
            for i, value in enumerate(table.categorical[:, k]):
                code = lookup.get(str(value), UNKNOWN) if value is not None else UNKNOWN
                unknown += int(code == UNKNOWN)
                idx[i, k] = code
        return idx, unknown

    def transform(self, table: PropertyTable) -> FeatureBatch:
        cat_idx, unknown = self.encode_categorical(table)
        if unknown:
            logger.debug("{} categorical values mapped to the unknown index", unknown)
        numeric = (_impute(table.numeric, self.numeric_median) - self.numeric_mean) / self.numeric_std
        spatial = (table.spatial - self.spatial_mean) / self.spatial_std
        return FeatureBatch(cat_idx, numeric, table.text.astype(np.float64),
                            table.text_mask.astype(np.float64), table.boundary.astype(np.float64), spatial)

    def raw_numeric(self, table: PropertyTable) -> np.ndarray:
        """Imputed, unstandardized numerics (total floor area feeds the cost relations)."""
        return _impute(table.numeric, self.numeric_median)

    def to_dict(self) -> dict:
        return {
            'vocabularies': self.vocabularies,
            'numeric_median': self.numeric_median.tolist(),
            'numeric_mean': self.numeric_mean.tolist(),
            'numeric_std': self.numeric_std.tolist(),
            'spatial_mean': self.spatial_mean.tolist(),
            'spatial_std': self.spatial_std.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Preprocessor":
        arr = lambda key: np.asarray(data[key], dtype=np.float64)
        return cls([list(v) for v in data['vocabularies']], arr('numeric_median'), arr('numeric_mean'),
                   arr('numeric_std'), arr('spatial_mean'), arr('spatial_std'))


def _impute(values: np.ndarray, median: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(values), values, median)


def _safe_std(values: np.ndarray) -> np.ndarray:
    std = values.std(axis=0)
    return np.where(std > 0, std, 1.0)

