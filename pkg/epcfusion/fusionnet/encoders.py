"""Modality encoders: tabular, text and boundary/spatial, each to a d-vector."""

import numpy as np
from loguru import logger

from ..config import ModelConfig
from ..datahub.records import CATEGORICAL_FIELDS, NUMERIC_FIELDS
from ..geometry import SPATIAL_FEATURES
from ..diffcore import functional as F
from ..diffcore.layers import MLP, Conv1d, Dense, Dropout, DropoutStream, Embedding, Module
from ..diffcore.tensor import Parameter, Tensor
from ..errors import MissingModality, ShapeError


class TabularEncoder(Module):
    """One embedding table per categorical field, concatenated with an MLP
    over the standardized numerics, projected to d."""

    def __init__(self, config: ModelConfig, vocab_sizes: list[int], stream: DropoutStream,
                 rng: np.random.Generator):
        if len(vocab_sizes) != len(CATEGORICAL_FIELDS):
            raise ShapeError(f"need {len(CATEGORICAL_FIELDS)} vocabularies, got {len(vocab_sizes)}")
        self.vocab_sizes = list(vocab_sizes)
        self.embeddings = [Embedding(v, config.e, rng) for v in vocab_sizes]
        self.numeric = MLP(len(NUMERIC_FIELDS), config.numeric_mlp, config.dropout, stream, rng)
        self.projection = Dense(len(CATEGORICAL_FIELDS) * config.e + self.numeric.out_features, config.d, rng)
        self.dropout = Dropout(config.dropout, stream)

    def forward(self, cat_idx: np.ndarray, numeric: np.ndarray) -> Tensor:
        cat_idx = np.asarray(cat_idx, dtype=np.int64)
        out_of_range = (cat_idx < 0) | (cat_idx >= np.asarray(self.vocab_sizes))
        if np.any(out_of_range):
            logger.debug("{} categorical indices outside the vocabulary mapped to unknown", int(out_of_range.sum()))
            cat_idx = np.where(out_of_range, 0, cat_idx)
        parts = [emb(cat_idx[:, k]) for k, emb in enumerate(self.embeddings)]
        parts.append(self.numeric(numeric))
        return self.dropout(F.relu(self.projection(F.concat(parts, axis=-1))))


class TextEncoder(Module):
    """Mean over the present field vectors, then a dense projection to d."""

    def __init__(self, config: ModelConfig, stream: DropoutStream, rng: np.random.Generator):
        self.h = config.h
        self.projection = Dense(config.h, config.d, rng)
        self.dropout = Dropout(config.dropout, stream)

    def forward(self, text: np.ndarray, mask: np.ndarray) -> Tensor:
        if text.ndim != 3 or text.shape[-1] != self.h:
            raise ShapeError(f"text input {text.shape}, expected (B, fields, {self.h})")
        empty = np.flatnonzero(np.asarray(mask).sum(axis=1) <= 0)
        if empty.size:
            raise MissingModality(f"{empty.size} rows have no text field present", rows=empty[:10].tolist())
        pooled = F.masked_mean_pool(text, mask)
        return self.dropout(F.relu(self.projection(pooled)))


class SpatialEncoder(Module):
    """Per-point embedding plus a learned positional table, two same-length
    convolutions, global average pooling, joined with an MLP over the
    footprint numerics and projected to d."""

    def __init__(self, config: ModelConfig, stream: DropoutStream, rng: np.random.Generator):
        self.length = config.L
        self.point = Dense(2, config.d, rng)
        self.positional = Parameter(rng.normal(0.0, 0.02, (config.L, config.d)))
        self.conv1 = Conv1d(config.d, config.d, config.conv_kernel, rng)
        self.conv2 = Conv1d(config.d, config.d, config.conv_kernel, rng)
        self.numeric = MLP(len(SPATIAL_FEATURES), config.spatial_numeric_mlp, config.dropout, stream, rng)
        self.projection = Dense(config.d + self.numeric.out_features, config.d, rng)
        self.dropout = Dropout(config.dropout, stream)

    def forward(self, boundary, spatial: np.ndarray) -> Tensor:
        if boundary.ndim != 3 or boundary.shape[1:] != (self.length, 2):
            raise ShapeError(f"boundary input {boundary.shape}, expected (B, {self.length}, 2)")
        x = self.point(boundary) + self.positional
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        s = F.global_average_pool(x)
        u = self.numeric(spatial)
        return self.dropout(F.relu(self.projection(F.concat([s, u], axis=-1))))
