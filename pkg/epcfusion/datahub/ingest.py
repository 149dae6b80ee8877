"""Read the three sources and inner-join them on uprn.

Inputs:

* ``properties.csv`` -- one EPC row per uprn (columns :data:`PROPERTY_COLUMNS`);
* ``boundaries.jsonl`` -- ``{"uprn", "points": [[x, y], ...], "height", "holes"?}``,
  several polygons per uprn allowed (the largest footprint wins);
* ``text_embeddings.jsonl`` -- ``{"uprn", "field", "vector"}``, one per present field.

Malformed rows are skipped and counted in the :class:`IngestReport`; a uprn
repeated within properties.csv, or a (uprn, field) pair repeated within the
embeddings, is a :class:`DuplicateKey` error.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd
from loguru import logger

from ..errors import DuplicateKey, MissingFile, SchemaMismatch
from ..geometry import BOUNDARY_LENGTH, FootprintPolygon, build_spatial_features
from ..stages import WorkException, map_stage
from .records import (CATEGORICAL_FIELDS, FLAG_FIELDS, NUMERIC_FIELDS, TARGET_FIELDS, TEXT_FIELDS,
                      PropertyRecord)

PROPERTY_COLUMNS = ('uprn',) + CATEGORICAL_FIELDS + NUMERIC_FIELDS + TARGET_FIELDS + FLAG_FIELDS
MAX_REPORTED_ROWS = 50

_TRUE = {'true', '1', 'yes', 'y', 't'}
_FALSE = {'false', '0', 'no', 'n', 'f', ''}


@dataclass
class IngestReport:
    epc_rows: int = 0
    boundary_rows: int = 0
    embedding_rows: int = 0
    linked: int = 0
    unmatched_geometry: int = 0
    unmatched_text: int = 0
    orphan_geometry: int = 0
    orphan_text: int = 0
    duplicate_polygons_resolved: int = 0
    self_intersecting: int = 0
    malformed: dict[str, int] = field(default_factory=dict)
    missing_numeric: dict[str, int] = field(default_factory=dict)
    missing_categorical: dict[str, int] = field(default_factory=dict)
    missing_text_fields: dict[str, int] = field(default_factory=dict)
    examples: list[dict[str, str]] = field(default_factory=list)

    def skip(self, source: str, reason: str, item: str, message: str = ''):
        key = f"{source}:{reason}"
        self.malformed[key] = self.malformed.get(key, 0) + 1
        if len(self.examples) < MAX_REPORTED_ROWS:
            self.examples.append({'source': source, 'reason': reason, 'item': item, 'message': message})

    @property
    def dropped(self) -> int:
        return self.unmatched_geometry + self.unmatched_text + sum(
            v for k, v in self.malformed.items() if k.startswith('epc:'))

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload['dropped'] = self.dropped
        return payload


def read_jsonl(path: str | Path, report: IngestReport | None = None, source: str = 'jsonl') -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"{source} file not found: {path}", path=path)
    rows = []
    with path.open(encoding='utf-8') as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                if not isinstance(row, dict):
                    raise ValueError("not a JSON object")
            except ValueError as e:
                if report is not None:
                    report.skip(source, 'bad_json', f"line {line_no}", str(e))
                continue
            rows.append(row)
    return rows


def read_properties(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"properties file not found: {path}", path=path)
    text_columns = {name: str for name in ('uprn',) + CATEGORICAL_FIELDS + FLAG_FIELDS}
    frame = pd.read_csv(path, dtype=text_columns, keep_default_na=False)
    missing = [c for c in PROPERTY_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"{path.name} misses columns {missing}", path=path)
    return frame[list(PROPERTY_COLUMNS)].to_dict('records')


def load_embedding_table(path: str | Path, h: int, key: str) -> dict[str, np.ndarray]:
    """``{key: vector}`` rows (mask embeddings use ``field``, replacements ``key``)."""
    table = {}
    for row in read_jsonl(path, source=key):
        try:
            name = str(row[key])
            vector = _vector(row['vector'], h)
        except (KeyError, ValueError) as e:
            raise SchemaMismatch(f"{Path(path).name}: bad row {row.get(key)!r}: {e}") from e
        if name in table:
            raise DuplicateKey(f"{Path(path).name}: duplicate {key} {name!r}")
        table[name] = vector
    return table


def _vector(values, h: int) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (h,):
        raise ValueError(f"vector has shape {vector.shape}, expected ({h},)")
    if not np.all(np.isfinite(vector)):
        raise ValueError("vector has non-finite entries")
    return vector


def _number(value) -> float:
    if value is None or (isinstance(value, str) and value.strip() == ''):
        return math.nan
    return float(value)


def _flag(value) -> bool:
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"cannot read flag {value!r}")


def _parse_epc_row(row: dict) -> dict:
    targets = tuple(float(row[name]) for name in TARGET_FIELDS)
    for name, value in zip(TARGET_FIELDS, targets):
        if not (math.isfinite(value) and 1.0 <= value <= 100.0):
            raise ValueError(f"{name}={value} outside [1, 100]")
    numeric = np.array([_number(row[name]) for name in NUMERIC_FIELDS], dtype=np.float64)
    if np.any(np.isinf(numeric)):
        raise ValueError("infinite numeric value")
    categorical = tuple((str(row[name]).strip() or None) if row[name] is not None else None
                        for name in CATEGORICAL_FIELDS)
    flags = tuple(_flag(row[name]) for name in FLAG_FIELDS)
    return {'uprn': str(row['uprn']).strip(), 'categorical': categorical, 'numeric': numeric,
            'targets': targets, 'flags': flags}


def footprint_task(row: dict, L: int = BOUNDARY_LENGTH):
    """Stage task: one boundary row to (polygon, spatial features, boundary)."""
    polygon = FootprintPolygon.from_points(row['uprn'], row['points'], float(row['height']),
                                           row.get('holes') or ())
    spatial, boundary = build_spatial_features(polygon, L=L)
    return polygon, spatial, boundary


def link_records(epc_rows: Iterable[dict], boundary_rows: Iterable[dict], embedding_rows: Iterable[dict],
                 h: int, L: int = BOUNDARY_LENGTH, workers: int = 1, multi_process: bool = False,
                 report: IngestReport | None = None) -> tuple[list[PropertyRecord], IngestReport]:
    """Inner-join EPC rows, footprints and text embeddings on uprn."""
    report = report or IngestReport()
    epc_rows, boundary_rows, embedding_rows = list(epc_rows), list(boundary_rows), list(embedding_rows)
    report.epc_rows, report.boundary_rows, report.embedding_rows = \
        len(epc_rows), len(boundary_rows), len(embedding_rows)

    epc: dict[str, dict] = {}
    for row in epc_rows:
        uprn = str(row.get('uprn', '')).strip()
        if uprn in epc:
            raise DuplicateKey(f"uprn {uprn} appears twice in properties", uprn=uprn)
        try:
            parsed = _parse_epc_row(row)
        except (KeyError, TypeError, ValueError) as e:
            report.skip('epc', 'malformed_row', uprn, str(e))
            continue
        epc[uprn] = parsed

    geometry = _link_geometry(boundary_rows, L, workers, multi_process, report)
    text = _link_text(embedding_rows, h, report)

    records = []
    for uprn, row in epc.items():
        if uprn not in geometry:
            report.unmatched_geometry += 1
            continue
        if uprn not in text:
            report.unmatched_text += 1
            continue
        polygon, spatial, boundary = geometry[uprn]
        vectors, mask = text[uprn]
        for name, value in zip(NUMERIC_FIELDS, row['numeric']):
            if math.isnan(value):
                report.missing_numeric[name] = report.missing_numeric.get(name, 0) + 1
        for name, value in zip(CATEGORICAL_FIELDS, row['categorical']):
            if value is None:
                report.missing_categorical[name] = report.missing_categorical.get(name, 0) + 1
        for name, present in zip(TEXT_FIELDS, mask):
            if not present:
                report.missing_text_fields[name] = report.missing_text_fields.get(name, 0) + 1
        records.append(PropertyRecord(uprn, row['categorical'], row['numeric'], vectors, mask, spatial,
                                      boundary, row['targets'], row['flags'], polygon))
    report.orphan_geometry = len(set(geometry) - set(epc))
    report.orphan_text = len(set(text) - set(epc))
    report.linked = len(records)
    logger.info("linked {} of {} EPC rows ({} without geometry, {} without text)", report.linked,
                report.epc_rows, report.unmatched_geometry, report.unmatched_text)
    return records, report


def _link_geometry(rows: list[dict], L: int, workers: int, multi_process: bool, report: IngestReport):
    results = map_stage(partial(footprint_task, L=L), rows, num_worker=workers, multi_process=multi_process,
                        collect_errors=True, name='footprint')
    best: dict[str, tuple] = {}
    counts = Counter()
    for row, result in zip(rows, results):
        if isinstance(result, WorkException):
            reason = 'degenerate_geometry' if type(result.orig_exc).__name__ == 'DegenerateGeometry' \
                else 'malformed_row'
            report.skip('boundary', reason, str(row.get('uprn')), str(result.orig_exc))
            continue
        polygon, spatial, boundary = result
        counts[polygon.uprn] += 1
        if not polygon.is_simple:
            report.self_intersecting += 1
        current = best.get(polygon.uprn)
        if current is None or spatial.footprint_area > current[1].footprint_area:
            best[polygon.uprn] = result
    report.duplicate_polygons_resolved = sum(n - 1 for n in counts.values() if n > 1)
    return best


def _link_text(rows: list[dict], h: int, report: IngestReport):
    vectors: dict[str, dict[str, np.ndarray]] = defaultdict(dict)
    for row in rows:
        uprn = str(row.get('uprn', '')).strip()
        name = row.get('field')
        if name not in TEXT_FIELDS:
            report.skip('text', 'unknown_field', uprn, str(name))
            continue
        if name in vectors[uprn]:
            raise DuplicateKey(f"text field {name} repeated for uprn {uprn}", uprn=uprn)
        try:
            vectors[uprn][name] = _vector(row.get('vector'), h)
        except (TypeError, ValueError) as e:
            report.skip('text', 'bad_vector', uprn, str(e))
    linked = {}
    for uprn, fields in vectors.items():
        if not fields:
            continue
        matrix = np.zeros((len(TEXT_FIELDS), h), dtype=np.float64)
        mask = np.zeros(len(TEXT_FIELDS), dtype=bool)
        for k, name in enumerate(TEXT_FIELDS):
            if name in fields:
                matrix[k] = fields[name]
                mask[k] = True
        linked[uprn] = (matrix, mask)
    return linked


def ingest(properties: Path, boundaries: Path, text_embeddings: Path, h: int, L: int = BOUNDARY_LENGTH,
           workers: int = 1, multi_process: bool = False) -> tuple[list[PropertyRecord], IngestReport]:
    """Read the three files and link them."""
    report = IngestReport()
    epc_rows = read_properties(properties)
    boundary_rows = read_jsonl(boundaries, report, 'boundary')
    embedding_rows = read_jsonl(text_embeddings, report, 'text')
    return link_records(epc_rows, boundary_rows, embedding_rows, h, L, workers, multi_process, report)
