"""Train and evaluate every non-empty modality subset on one split."""

import math
from dataclasses import dataclass, field
from functools import partial

import pandas as pd
from loguru import logger

from ..config import RunConfig
from ..fusionnet.model import build_ablation_model
from ..fusionnet.predictor import Predictor
from ..stages import WorkException, map_stage
from .data import PreparedData
from .evaluate import evaluate
from .loop import train

ABLATION_CONFIGS = (
    ('tab',), ('text',), ('spatial',),
    ('tab', 'text'), ('tab', 'spatial'), ('text', 'spatial'),
    ('tab', 'text', 'spatial'),
)
COLUMNS = ('config', 'R2_SAP', 'R2_EI', 'MAE_SAP', 'MAE_EI', 'band_acc_SAP', 'band_acc_EI', 'best_epoch',
           'error')


def config_name(modalities) -> str:
    return '+'.join(modalities)


@dataclass
class AblationResult:
    table: pd.DataFrame
    confusion: dict[str, pd.DataFrame] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)


def ablation_task(modalities: tuple[str, ...], data: PreparedData, config: RunConfig) -> dict:
    """One configuration: fresh model, same seed, same split, test metrics."""
    model = build_ablation_model(modalities, config.model, data.preprocessor.vocab_sizes, config.seed)
    report = train(model, data, config)
    result = evaluate(Predictor(model, data.scaler), data.features['test'], data.tables['test'], config.bands)
    m = result.metrics.per_target
    return {
        'config': config_name(modalities),
        'R2_SAP': m['SAP'].r2, 'R2_EI': m['EI'].r2,
        'MAE_SAP': m['SAP'].mae, 'MAE_EI': m['EI'].mae,
        'band_acc_SAP': result.band_accuracy['SAP'], 'band_acc_EI': result.band_accuracy['EI'],
        'best_epoch': report.best_epoch, 'error': '',
        'confusion': result.confusion,
    }


def run_ablation(data: PreparedData, config: RunConfig, configs=ABLATION_CONFIGS) -> AblationResult:
    """Seven rows in fixed order; a failing configuration becomes a row with
    an error message and empty metrics, the others still run."""
    results = map_stage(partial(ablation_task, data=data, config=config), configs,
                        num_worker=config.parallel.workers, multi_process=config.parallel.multi_process,
                        collect_errors=True, name='ablation')
    rows, confusion, failures = [], {}, []
    for modalities, result in zip(configs, results):
        name = config_name(modalities)
        if isinstance(result, WorkException):
            logger.error("ablation {} failed: {}", name, result.orig_exc)
            failures.append(dict(result.describe(), config=name))
            rows.append({**{c: math.nan for c in COLUMNS}, 'config': name, 'best_epoch': -1,
                         'error': f"{type(result.orig_exc).__name__}: {result.orig_exc}"})
            continue
        confusion[name] = result.pop('confusion')
        rows.append(result)
    return AblationResult(pd.DataFrame(rows, columns=list(COLUMNS)), confusion, failures)
