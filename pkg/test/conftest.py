import numpy as np
import pytest

from epcfusion.config import ModelConfig, RunConfig
from epcfusion.datahub.features import FeatureBatch
from epcfusion.datahub.ingest import link_records
from epcfusion.datahub.records import CATEGORICAL_FIELDS, TEXT_FIELDS, PropertyTable
from epcfusion.datahub.synth import generate

H = 6
L = 16
VOCAB = 4
VOCAB_SIZES = [VOCAB] * len(CATEGORICAL_FIELDS)


def small_model_config(**overrides) -> ModelConfig:
    values = dict(d=8, e=4, h=H, L=L, numeric_mlp=(8,), spatial_numeric_mlp=(6,), gate_hidden=8,
                  fusion_mlp=(12, 8), dropout=0.1)
    values.update(overrides)
    return ModelConfig(**values)


def small_run_config(tmp_path=None, **optim) -> RunConfig:
    config = RunConfig(seed=3, model=small_model_config())
    overrides = {f'optim.{k}': v for k, v in dict(dict(max_epochs=3, batch_size=16), **optim).items()}
    if tmp_path is not None:
        overrides['paths.output_dir'] = tmp_path
    return config.with_overrides(**overrides)


def synthetic_table(n: int = 120, seed: int = 0, signals=('tab', 'text', 'spatial')) -> PropertyTable:
    data = generate(n, H, seed, signals)
    records, _ = link_records(data.epc_rows, data.boundary_rows, data.embedding_rows, H, L)
    return PropertyTable.from_records(records, H, L)


@pytest.fixture(scope='session')
def table() -> PropertyTable:
    return synthetic_table()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_batch(n: int = 6, seed: int = 0, h: int = H, length: int = L) -> FeatureBatch:
    """Model inputs with every text row keeping at least one field present."""
    rng = np.random.default_rng(seed)
    text_mask = (rng.random((n, len(TEXT_FIELDS))) < 0.6).astype(np.float64)
    text_mask[:, 0] = 1.0
    return FeatureBatch(rng.integers(0, VOCAB, (n, len(CATEGORICAL_FIELDS))), rng.normal(size=(n, 4)),
                        rng.normal(size=(n, len(TEXT_FIELDS), h)), text_mask,
                        rng.normal(scale=0.5, size=(n, length, 2)), rng.normal(size=(n, 3)))
