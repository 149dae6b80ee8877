"""Training loop with plateau scheduling, early stopping and best-epoch restore."""

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from ..config import RunConfig
from ..datahub.features import FeatureBatch
from ..datahub.sampler import BalancedBatches, joint_partition_labels
from ..diffcore.optim import Adam, PlateauScheduler, clip_grad_norm
from ..diffcore.tensor import no_grad
from ..errors import EmptyInput, TrainingDiverged
from ..fusionnet.model import FusionModel
from ..stages import Timer
from .data import PreparedData
from .loss import band_labels, total_loss
from .metrics import Metrics, metrics

EVAL_CHUNK = 1024


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_metrics: dict
    learning_rates: dict[str, float]
    lr_reduced: bool
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    stopped_epoch: int = -1
    early_stopped: bool = False
    lr_events: list[int] = field(default_factory=list)
    test_metrics: dict | None = None

    def history_frame(self) -> pd.DataFrame:
        rows = []
        for record in self.epochs:
            row = {'epoch': record.epoch, 'train_loss': record.train_loss, 'val_loss': record.val_loss,
                   'lr_reduced': record.lr_reduced}
            for target, values in record.val_metrics.items():
                if isinstance(values, dict):
                    row.update({f'val_{k}_{target}': v for k, v in values.items()})
            row['val_Mean_MAE'] = record.val_metrics.get('Mean_MAE')
            row.update({f'lr_{k}': v for k, v in record.learning_rates.items()})
            rows.append(row)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict:
        payload = asdict(self)
        for record in payload['epochs']:
            record.pop('seconds')
        return payload


def evaluate_loss(model: FusionModel, features: FeatureBatch, y_norm: np.ndarray, labels: np.ndarray,
                  config: RunConfig) -> tuple[float, np.ndarray]:
    """Eval-mode mean total loss over a whole subset and its normalized predictions."""
    model.eval()
    total, preds = 0.0, []
    with no_grad():
        for start in range(0, len(features), EVAL_CHUNK):
            idx = np.arange(start, min(start + EVAL_CHUNK, len(features)))
            out = model(features.take(idx))
            parts = total_loss(out, y_norm[idx], labels[idx], config.loss)
            total += parts.total.item() * len(idx)
            preds.append(out.y_hat.data)
    return total / len(features), np.concatenate(preds)


def train(model: FusionModel, data: PreparedData, config: RunConfig, seed: int | None = None) -> TrainReport:
    """Fit *model* on ``data`` train/val; leaves the model at its best epoch
    (lowest validation loss) and returns the per-epoch report."""
    seed = config.seed if seed is None else seed
    optim_cfg = config.optim
    train_x, val_x = data.features['train'], data.features['val']
    if len(train_x) == 0 or len(val_x) == 0:
        raise EmptyInput("training needs non-empty train and validation splits",
                         train=len(train_x), val=len(val_x))
    train_raw, val_raw = data.targets('train'), data.targets('val')
    train_y, val_y = data.scaler.normalize(train_raw), data.scaler.normalize(val_raw)
    train_labels, val_labels = band_labels(train_raw, config.bands), band_labels(val_raw, config.bands)

    optimizer = Adam(model.param_groups(optim_cfg.lr, optim_cfg.projection_lr), optim_cfg.beta1, optim_cfg.beta2,
                     optim_cfg.eps)
    scheduler = PlateauScheduler(optimizer, optim_cfg.plateau_factor, optim_cfg.plateau_patience)
    sampler = BalancedBatches(joint_partition_labels(train_raw, config.bands), optim_cfg.batch_size, seed)
    report = TrainReport()
    best_state = model.state_dict()
    stale = 0
    timer = Timer('epoch', per_item=True)

    for epoch in range(optim_cfg.max_epochs):
        started = time.perf_counter()
        model.train()
        losses, sizes = [], []
        for b, idx in enumerate(sampler.epoch(epoch)):
            out = model(train_x.take(idx))
            parts = total_loss(out, train_y[idx], train_labels[idx], config.loss)
            value = parts.total.item()
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch} batch {b}", epoch=epoch, batch=b,
                                       huber=parts.huber, ce_sap=parts.ce_sap, ce_ei=parts.ce_ei)
            optimizer.zero_grad()
            parts.total.backward()
            clip_grad_norm(optimizer.params, optim_cfg.clip_norm)
            optimizer.step()
            losses.append(value)
            sizes.append(len(idx))
        train_loss = float(np.average(losses, weights=sizes))

        val_loss, val_pred = evaluate_loss(model, val_x, val_y, val_labels, config)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        val_metrics = metrics(data.scaler.denormalize(val_pred), val_raw)
        if val_loss < report.best_val_loss:
            report.best_val_loss, report.best_epoch = val_loss, epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
        reduced = scheduler.step(val_loss)
        if reduced:
            report.lr_events.append(epoch)
        seconds = time.perf_counter() - started
        timer.add_from_time(started)
        report.epochs.append(EpochRecord(epoch, train_loss, val_loss, val_metrics.to_dict(),
                                         optimizer.learning_rates, reduced, seconds))
        _log_epoch(epoch, train_loss, val_loss, val_metrics, optimizer)
        report.stopped_epoch = epoch
        if stale >= optim_cfg.early_stop_patience:
            report.early_stopped = True
            logger.info("early stop at epoch {}: no improvement since epoch {}", epoch, report.best_epoch)
            break

    timer.log('INFO', epochs=timer.count, best_epoch=report.best_epoch)
    model.load_state_dict(best_state)
    model.eval()
    if len(data.features['test']):
        test_pred = data.scaler.denormalize(model.predict(data.features['test'])[0])
        report.test_metrics = metrics(test_pred, data.targets('test')).to_dict()
    return report


def _log_epoch(epoch: int, train_loss: float, val_loss: float, val_metrics: Metrics, optimizer: Adam):
    r2 = ' '.join(f"{name}={m.r2:.3f}" for name, m in val_metrics.per_target.items())
    logger.info("epoch {:>3} train {:.4f} val {:.4f} mae {:.3f} r2 {} lr {}", epoch, train_loss, val_loss,
                val_metrics.mean_mae, r2, optimizer.learning_rates)
