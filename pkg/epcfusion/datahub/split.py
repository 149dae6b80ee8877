"""Joint-stratified train/val/test split."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger

from ..errors import EmptyInput, InvalidConfig
from .bands import BANDS, BandTable
from .records import CATEGORICAL_FIELDS, PropertyTable

SMALL_STRATUM = 3
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class StratumLabel:
    property_type: str
    sap_band: str
    ei_band: str


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def to_json(self) -> str:
        return json.dumps({'train': list(self.train), 'val': list(self.val), 'test': list(self.test),
                           'seed': self.seed}, indent=1)

    def write(self, path: Path):
        Path(path).write_text(self.to_json() + '\n', encoding='utf-8')

    @classmethod
    def read(cls, path: Path) -> "Split":
        data = json.loads(Path(path).read_text(encoding='utf-8'))
        return cls(tuple(data['train']), tuple(data['val']), tuple(data['test']), int(data['seed']))


def stratum_labels(table: PropertyTable, bands: BandTable) -> list[StratumLabel]:
    ptype = table.categorical[:, CATEGORICAL_FIELDS.index('property_type')]
    sap = bands.band_indices(table.targets[:, 0])
    ei = bands.band_indices(table.targets[:, 1])
    return [StratumLabel(str(p), BANDS[s], BANDS[e]) for p, s, e in zip(ptype, sap, ei)]


def allocation(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Per-stratum sizes: floor for train and val, remainder to test; strata
    under three samples go wholly to train."""
    if n < SMALL_STRATUM:
        return n, 0, 0
    n_train = math.floor(n * ratios[0] + _FLOOR_EPS)
    n_val = math.floor(n * ratios[1] + _FLOOR_EPS)
    return n_train, n_val, n - n_train - n_val


def joint_stratified_split(table: PropertyTable, bands: BandTable,
                           ratios: tuple[float, float, float] = (0.7, 0.15, 0.15), seed: int = 0) -> Split:
    if len(table) == 0:
        raise EmptyInput("cannot split an empty dataset")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidConfig(f"split ratios {ratios} do not sum to 1")
    strata: dict[StratumLabel, list[int]] = {}
    for i, label in enumerate(stratum_labels(table, bands)):
        strata.setdefault(label, []).append(i)

    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for label in sorted(strata, key=lambda s: (s.property_type, s.sap_band, s.ei_band)):
        members = np.asarray(strata[label])
        members = members[rng.permutation(len(members))]
        n_train, n_val, _ = allocation(len(members), ratios)
        train += members[:n_train].tolist()
        val += members[n_train:n_train + n_val].tolist()
        test += members[n_train + n_val:].tolist()
    logger.info("split {} records over {} strata: {} / {} / {}", len(table), len(strata),
                len(train), len(val), len(test))
    uprns = table.uprns
    return Split(tuple(uprns[train].tolist()), tuple(uprns[val].tolist()), tuple(uprns[test].tolist()), seed)
