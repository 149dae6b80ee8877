"""Retrofit scenarios: edit eligible records, re-predict, convert to cost and CO2."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from shapely.geometry import mapping

from ..datahub.features import Preprocessor
from ..datahub.records import CATEGORICAL_FIELDS, FLAG_FIELDS, NUMERIC_FIELDS, TEXT_FIELDS, PropertyTable
from ..errors import EpcFusionError, InvalidConfig, MissingFile, SchemaMismatch
from .formulas import cost_from_sap, eco2_from_ei

SCENARIO_NAMES = ('wall_insulation', 'roof_insulation', 'glazing_upgrade', 'custom')
TFA = NUMERIC_FIELDS.index('total_floor_area')
REPORT_COLUMNS = ('uprn', 'eligible', 'sap_pre', 'sap_post', 'ei_pre', 'ei_post', 'd_sap', 'd_ei',
                  'cost_pre', 'cost_post', 'd_cost', 'eco2_pre', 'eco2_post', 'd_eco2')


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    eligibility_flag: str
    text_replacements: dict[str, str] = field(default_factory=dict)
    categorical_overrides: dict[str, str] = field(default_factory=dict)
    numeric_overrides: dict[str, float] = field(default_factory=dict)
    tariff_deflator: float = 1.0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise InvalidConfig(f"unknown scenario {self.name!r}", choices=list(SCENARIO_NAMES))
        if self.eligibility_flag not in FLAG_FIELDS:
            raise InvalidConfig(f"unknown eligibility flag {self.eligibility_flag!r}", choices=list(FLAG_FIELDS))
        for names, allowed, kind in ((self.text_replacements, TEXT_FIELDS, 'text field'),
                                     (self.categorical_overrides, CATEGORICAL_FIELDS, 'categorical field'),
                                     (self.numeric_overrides, NUMERIC_FIELDS, 'numeric field')):
            unknown = sorted(set(names) - set(allowed))
            if unknown:
                raise InvalidConfig(f"scenario {self.name}: unknown {kind} {unknown}")
        if not (self.tariff_deflator > 0 and math.isfinite(self.tariff_deflator)):
            raise InvalidConfig("tariff_deflator must be a positive number")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        try:
            return cls(name=data['name'], eligibility_flag=data['eligibility_flag'],
                       text_replacements=dict(data.get('text_replacements') or {}),
                       categorical_overrides=dict(data.get('categorical_overrides') or {}),
                       numeric_overrides={k: float(v) for k, v in (data.get('numeric_overrides') or {}).items()},
                       tariff_deflator=float(data.get('tariff_deflator', 1.0)))
        except KeyError as e:
            raise InvalidConfig(f"scenario file is missing {e}") from e

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioSpec":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"scenario file {path} not found", path=str(path))
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise SchemaMismatch(f"{path.name}: not valid JSON: {e}") from e
        return cls.from_dict(data)

    def check_replacements(self, replacements: dict[str, np.ndarray]):
        missing = sorted(k for k in self.text_replacements.values() if k not in replacements)
        if missing:
            raise InvalidConfig(f"scenario {self.name}: no replacement embedding for {missing}")


def apply_scenario(table: PropertyTable, spec: ScenarioSpec,
                   replacements: dict[str, np.ndarray]) -> tuple[PropertyTable, np.ndarray]:
    """A modified copy of *table* and the eligibility mask. Eligible rows get
    the replacement vectors (fields marked present) and the overrides;
    other rows and the input table are left as they were."""
    spec.check_replacements(replacements)
    eligible = table.column(spec.eligibility_flag).astype(bool)
    if not eligible.any():
        return table, eligible
    text, text_mask = table.text.copy(), table.text_mask.copy()
    for name, key in spec.text_replacements.items():
        k = TEXT_FIELDS.index(name)
        vector = np.asarray(replacements[key], dtype=np.float64)
        if vector.shape != text.shape[2:]:
            raise InvalidConfig(f"replacement {key} has shape {vector.shape}, expected {text.shape[2:]}")
        text[eligible, k, :] = vector
        text_mask[eligible, k] = True
    categorical, numeric = table.categorical.copy(), table.numeric.copy()
    for name, value in spec.categorical_overrides.items():
        categorical[eligible, CATEGORICAL_FIELDS.index(name)] = value
    for name, value in spec.numeric_overrides.items():
        numeric[eligible, NUMERIC_FIELDS.index(name)] = value
    return table.replace(text=text, text_mask=text_mask, categorical=categorical, numeric=numeric), eligible


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    frame: pd.DataFrame
    exceptions: list[dict]
    footprints: list = field(default_factory=list, repr=False)

    @property
    def aggregates(self) -> dict:
        rows = self.frame[self.frame['eligible']]
        n = len(rows)
        out = {'scenario': self.spec.name, 'n_total': len(self.frame), 'n_eligible': n,
               'n_exceptions': len(self.exceptions), 'tariff_deflator': self.spec.tariff_deflator}
        for column in ('d_cost', 'd_eco2', 'd_sap', 'd_ei'):
            total = float(rows[column].sum())
            out[f'total_{column}'] = total
            out[f'mean_{column}'] = total / n if n else 0.0
        return out

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.frame.to_csv(path, index=False, float_format='%.10g')
        return path

    def to_geojson(self) -> dict:
        features = []
        for i, row in enumerate(self.frame.to_dict('records')):
            footprint = self.footprints[i] if i < len(self.footprints) else None
            properties = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
            properties['eligible'] = bool(properties['eligible'])
            features.append({'type': 'Feature', 'id': str(row['uprn']),
                             'geometry': mapping(footprint.shape()) if footprint is not None else None,
                             'properties': properties})
        return {'type': 'FeatureCollection', 'name': self.spec.name, 'features': features}

    def write_geojson(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_geojson(), separators=(',', ':')) + '\n', encoding='utf-8')
        return path


def _convert(scores: np.ndarray, tfa: np.ndarray, d: float) -> tuple[np.ndarray, np.ndarray]:
    return cost_from_sap(scores[:, 0], tfa, d), eco2_from_ei(scores[:, 1], tfa)


def evaluate_scenario(predict, preprocessor: Preprocessor, table: PropertyTable, spec: ScenarioSpec,
                      replacements: dict[str, np.ndarray]) -> ScenarioResult:
    """Pre/post scores, cost and emissions per property.

    Predicted scores are clamped to [1, 100] before conversion. Rows whose
    conversion fails land in ``exceptions`` with empty values; the rest of
    the run carries on."""
    modified, eligible = apply_scenario(table, spec, replacements)
    pre = np.clip(predict(preprocessor.transform(table)), 1.0, 100.0)
    post = pre.copy()
    if eligible.any():
        edited = np.clip(predict(preprocessor.transform(modified)), 1.0, 100.0)
        post[eligible] = edited[eligible]
    tfa_pre = preprocessor.raw_numeric(table)[:, TFA]
    tfa_post = preprocessor.raw_numeric(modified)[:, TFA]

    n = len(table)
    converted = {name: np.full(n, np.nan) for name in ('cost_pre', 'cost_post', 'eco2_pre', 'eco2_post')}
    exceptions = []
    for i in range(n):
        try:
            cost_pre, eco2_pre = _convert(pre[i:i + 1], tfa_pre[i:i + 1], spec.tariff_deflator)
            cost_post, eco2_post = _convert(post[i:i + 1], tfa_post[i:i + 1], spec.tariff_deflator)
        except EpcFusionError as e:
            exceptions.append({'uprn': str(table.uprns[i]), **e.to_dict()})
            continue
        converted['cost_pre'][i], converted['eco2_pre'][i] = cost_pre[0], eco2_pre[0]
        converted['cost_post'][i], converted['eco2_post'][i] = cost_post[0], eco2_post[0]

    frame = pd.DataFrame({
        'uprn': table.uprns.astype(str), 'eligible': eligible,
        'sap_pre': pre[:, 0], 'sap_post': post[:, 0], 'ei_pre': pre[:, 1], 'ei_post': post[:, 1],
        'd_sap': post[:, 0] - pre[:, 0], 'd_ei': post[:, 1] - pre[:, 1],
        'cost_pre': converted['cost_pre'], 'cost_post': converted['cost_post'],
        'd_cost': converted['cost_pre'] - converted['cost_post'],
        'eco2_pre': converted['eco2_pre'], 'eco2_post': converted['eco2_post'],
        'd_eco2': converted['eco2_pre'] - converted['eco2_post'],
    }, columns=list(REPORT_COLUMNS))
    result = ScenarioResult(spec, frame, exceptions, list(table.footprints))
    if exceptions:
        logger.warning("scenario {}: {} properties could not be converted", spec.name, len(exceptions))
    logger.info("scenario {}: {}", spec.name, result.aggregates)
    return result


def compare_scenarios(results: list[ScenarioResult]) -> pd.DataFrame:
    """One row of aggregates per scenario, ranked by mean cost reduction per
    eligible property (ties keep input order)."""
    frame = pd.DataFrame([r.aggregates for r in results])
    if frame.empty:
        return frame
    frame = frame.sort_values('mean_d_cost', ascending=False, kind='stable').reset_index(drop=True)
    frame.insert(0, 'rank', range(1, len(frame) + 1))
    return frame
