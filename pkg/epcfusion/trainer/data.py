"""Split-aware preparation: fit preprocessing and the target scaler on train only."""

from dataclasses import dataclass

import numpy as np

from ..datahub.features import FeatureBatch, Preprocessor
from ..datahub.records import PropertyTable
from ..datahub.scaler import TargetScaler, build_target_scaler
from ..datahub.split import Split
from ..errors import EmptyInput

SUBSETS = ('train', 'val', 'test')


@dataclass
class PreparedData:
    tables: dict[str, PropertyTable]
    features: dict[str, FeatureBatch]
    preprocessor: Preprocessor
    scaler: TargetScaler
    split: Split | None = None

    def targets(self, subset: str) -> np.ndarray:
        return self.tables[subset].targets

    def normalized_targets(self, subset: str) -> np.ndarray:
        return self.scaler.normalize(self.tables[subset].targets)


def prepare(table: PropertyTable, split: Split) -> PreparedData:
    tables = {name: table.select_uprns(getattr(split, name)) for name in SUBSETS}
    if len(tables['train']) == 0:
        raise EmptyInput("the training split is empty")
    preprocessor = Preprocessor.fit(tables['train'])
    scaler = build_target_scaler(tables['train'])
    features = {name: preprocessor.transform(t) for name, t in tables.items()}
    return PreparedData(tables, features, preprocessor, scaler, split)


def prepare_with(table: PropertyTable, preprocessor: Preprocessor, scaler: TargetScaler) -> PreparedData:
    """Evaluation-time preparation reusing stored train statistics; *table*
    becomes the ``test`` subset."""
    empty = table.subset([])
    tables = {'train': empty, 'val': empty, 'test': table}
    features = {name: preprocessor.transform(t) for name, t in tables.items()}
    return PreparedData(tables, features, preprocessor, scaler)
