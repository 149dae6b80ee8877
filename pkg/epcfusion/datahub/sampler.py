"""Partition-balanced batches.

Each training record gets a joint label (SAP partition, EI partition) from
the band table's five-way merge. A batch gives every joint label a share of
its slots proportional to the label's train frequency (largest-remainder
rounding); records are drawn without replacement, so an epoch visits the
training set exactly once. Labels that run dry hand their slots to the
labels that still have records, and the last batch may be short."""

from typing import Iterator

import numpy as np

from .bands import BandTable


def joint_partition_labels(targets: np.ndarray, bands: BandTable) -> np.ndarray:
    sap = bands.partition_indices(targets[:, 0])
    ei = bands.partition_indices(targets[:, 1])
    return sap * 5 + ei


def largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Integer allocation of *total* proportional to *weights*; ties go to
    the lower index."""
    weights = np.asarray(weights, dtype=np.float64)
    if total <= 0 or weights.sum() <= 0:
        return np.zeros(len(weights), dtype=np.int64)
    quota = total * weights / weights.sum()
    base = np.floor(quota).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = sorted(range(len(weights)), key=lambda i: (-(quota[i] - base[i]), i))
        for i in order[:short]:
            base[i] += 1
    return base


class BalancedBatches:
    """Epoch iterator factory: ``for batch in sampler.epoch(k)`` yields index arrays."""

    def __init__(self, labels: np.ndarray, batch_size: int = 128, seed: int = 0):
        self.labels = np.asarray(labels)
        self.batch_size = int(batch_size)
        self.seed = seed
        self.classes, self.counts = np.unique(self.labels, return_counts=True)

    def __len__(self):
        return -(-len(self.labels) // self.batch_size)

    def epoch(self, epoch: int) -> Iterator[np.ndarray]:
        rng = np.random.default_rng([self.seed, epoch])
        pools = [rng.permutation(np.flatnonzero(self.labels == c)) for c in self.classes]
        cursor = np.zeros(len(pools), dtype=np.int64)
        remaining = self.counts.copy()
        frequencies = self.counts.astype(np.float64)
        while remaining.sum() > 0:
            size = min(self.batch_size, int(remaining.sum()))
            slots = largest_remainder(size, frequencies)
            slots = np.minimum(slots, remaining)
            while slots.sum() < size:
                # Redistribute the slots of exhausted labels.
                open_labels = np.where(remaining > slots, frequencies, 0.0)
                extra = largest_remainder(size - int(slots.sum()), open_labels)
                slots = np.minimum(slots + extra, remaining)
            batch = []
            for i, take in enumerate(slots):
                if take:
                    batch.append(pools[i][cursor[i]:cursor[i] + take])
                    cursor[i] += take
            remaining -= slots
            batch = np.concatenate(batch)
            yield batch[rng.permutation(len(batch))]


def balanced_batches(train_targets: np.ndarray, batch_size: int, table: BandTable, seed: int,
                     epoch: int = 0) -> Iterator[np.ndarray]:
    """Batches of one epoch over the training targets."""
    return BalancedBatches(joint_partition_labels(train_targets, table), batch_size, seed).epoch(epoch)
