"""Linked property records and their column-wise table."""

from dataclasses import dataclass, field

import numpy as np

from ..geometry import BoundarySequence, FootprintPolygon, SpatialFeatures

CATEGORICAL_FIELDS = ('construction_age_band', 'property_type', 'built_form', 'energy_tariff', 'main_fuel')
NUMERIC_FIELDS = ('total_floor_area', 'number_habitable_rooms', 'number_heated_rooms', 'photo_supply')
TEXT_FIELDS = ('walls', 'windows', 'floor', 'roof', 'mainheat', 'mainheatcont', 'hotwater', 'lighting')
FLAG_FIELDS = ('needs_wall', 'needs_roof', 'needs_glazing')
TARGET_FIELDS = ('sap_score', 'ei_score')
TARGETS = ('SAP', 'EI')

TABULAR_FEATURES = CATEGORICAL_FIELDS + NUMERIC_FIELDS


@dataclass(eq=False)
class PropertyRecord:
    """One dwelling with all three modalities linked by uprn.

    ``categorical`` keeps the raw strings (``None`` when missing); they are
    turned into indices by :class:`~epcfusion.datahub.features.Preprocessor`.
    ``numeric`` may hold NaN until train-median imputation."""
    uprn: str
    categorical: tuple[str | None, ...]
    numeric: np.ndarray
    text: np.ndarray        # (8, h)
    text_mask: np.ndarray   # (8,) bool
    spatial: SpatialFeatures
    boundary: BoundarySequence
    targets: tuple[float, float]
    flags: tuple[bool, bool, bool]
    footprint: FootprintPolygon | None = None

    def group_value(self, key: str) -> str:
        return str(self.categorical[CATEGORICAL_FIELDS.index(key)])


@dataclass(eq=False)
class PropertyTable:
    """Column-wise view over a list of records; the unit the model, the
    splitter and the scenario engine work on. Arrays are never modified in
    place: edits go through :meth:`replace`."""
    uprns: np.ndarray          # (N,) str
    categorical: np.ndarray    # (N, 5) object
    numeric: np.ndarray        # (N, 4)
    text: np.ndarray           # (N, 8, h)
    text_mask: np.ndarray      # (N, 8) bool
    boundary: np.ndarray       # (N, L, 2)
    spatial: np.ndarray        # (N, 3): area, height, orientation
    targets: np.ndarray        # (N, 2)
    flags: np.ndarray          # (N, 3) bool
    footprints: list = field(default_factory=list)

    def __len__(self):
        return int(self.uprns.shape[0])

    @classmethod
    def from_records(cls, records: list[PropertyRecord], h: int | None = None,
                     L: int | None = None) -> "PropertyTable":
        n = len(records)
        if n == 0:
            h = h or 0
            L = L or 0
            return cls(np.array([], dtype=object), np.empty((0, 5), dtype=object), np.empty((0, 4)),
                       np.empty((0, len(TEXT_FIELDS), h)), np.zeros((0, len(TEXT_FIELDS)), dtype=bool),
                       np.empty((0, L, 2)), np.empty((0, 3)), np.empty((0, 2)), np.zeros((0, 3), dtype=bool), [])
        categorical = np.empty((n, len(CATEGORICAL_FIELDS)), dtype=object)
        for i, r in enumerate(records):
            categorical[i, :] = r.categorical
        return cls(
            uprns=np.array([r.uprn for r in records], dtype=object),
            categorical=categorical,
            numeric=np.stack([np.asarray(r.numeric, dtype=np.float64) for r in records]),
            text=np.stack([r.text for r in records]).astype(np.float64),
            text_mask=np.stack([r.text_mask for r in records]).astype(bool),
            boundary=np.stack([r.boundary.points for r in records]),
            spatial=np.stack([r.spatial.as_array() for r in records]),
            targets=np.array([r.targets for r in records], dtype=np.float64),
            flags=np.array([r.flags for r in records], dtype=bool),
            footprints=[r.footprint for r in records],
        )

    def subset(self, indices) -> "PropertyTable":
        idx = np.asarray(indices, dtype=np.int64)
        return PropertyTable(self.uprns[idx], self.categorical[idx], self.numeric[idx], self.text[idx],
                             self.text_mask[idx], self.boundary[idx], self.spatial[idx], self.targets[idx],
                             self.flags[idx], [self.footprints[i] for i in idx] if self.footprints else [])

    def select_uprns(self, uprns) -> "PropertyTable":
        position = {u: i for i, u in enumerate(self.uprns.tolist())}
        return self.subset([position[u] for u in uprns])

    def replace(self, **columns) -> "PropertyTable":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(columns)
        return PropertyTable(**values)

    def column(self, name: str) -> np.ndarray:
        """A categorical or numeric column by EPC field name."""
        if name in CATEGORICAL_FIELDS:
            return self.categorical[:, CATEGORICAL_FIELDS.index(name)]
        if name in NUMERIC_FIELDS:
            return self.numeric[:, NUMERIC_FIELDS.index(name)]
        if name in FLAG_FIELDS:
            return self.flags[:, FLAG_FIELDS.index(name)]
        raise KeyError(name)
