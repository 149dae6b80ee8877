"""Synthetic dataset with known signal in every modality.

Scores are a smooth function of

* tabular inputs: log floor area, photovoltaic supply, age band and main fuel;
* text: the projection of the walls, roof and windows vectors on a fixed
  per-field direction (the remaining fields carry noise only);
* geometry: footprint area and building height;

plus Gaussian noise. Replacement embeddings ``walls_insulated``,
``roof_insulated`` and ``windows_double`` sit at projection +3 on their
field's direction, so applying them raises both scores for almost every
eligible record.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from ..errors import InvalidConfig
from .ingest import PROPERTY_COLUMNS
from .records import FLAG_FIELDS, TEXT_FIELDS

AGE_BANDS = ('before 1900', '1900-1929', '1930-1949', '1950-1966', '1967-1975', '1976-1982',
             '1983-1990', '1991-1995', '1996-2002', '2003-2006', '2007 onwards')
PROPERTY_TYPES = ('Flat', 'House', 'Maisonette', 'Bungalow')
BUILT_FORMS = ('Detached', 'Semi-Detached', 'End-Terrace', 'Mid-Terrace', 'Enclosed Mid-Terrace')
TARIFFS = ('Single', 'dual', 'standard tariff', 'off-peak 7 hour')
FUELS = ('mains gas', 'electricity', 'oil', 'LPG')
FUEL_EFFECT = {'mains gas': 2.0, 'electricity': -4.0, 'oil': -3.0, 'LPG': -2.0}

TEXT_WEIGHTS = {'walls': 7.0, 'roof': 3.0, 'windows': 2.0}
REPLACEMENTS = {'walls_insulated': 'walls', 'roof_insulated': 'roof', 'windows_double': 'windows'}
REPLACEMENT_PROJECTION = 3.0
FLAG_RATES = {'needs_wall': 0.805, 'needs_roof': 0.177, 'needs_glazing': 0.39}
SCENARIOS = {
    'wall_insulation': ('needs_wall', {'walls': 'walls_insulated'}),
    'roof_insulation': ('needs_roof', {'roof': 'roof_insulated'}),
    'glazing_upgrade': ('needs_glazing', {'windows': 'windows_double'}),
}
SIGNALS = ('tab', 'text', 'spatial')

ORIGIN = np.array([529000.0, 181000.0])


@dataclass
class SyntheticData:
    epc_rows: list[dict]
    boundary_rows: list[dict]
    embedding_rows: list[dict]
    mask_embeddings: dict[str, np.ndarray]
    replacement_embeddings: dict[str, np.ndarray]
    directions: dict[str, np.ndarray]
    coefficients: dict = field(default_factory=dict)


def _unit(rng: np.random.Generator, h: int) -> np.ndarray:
    v = rng.normal(size=h)
    return v / np.linalg.norm(v)


def _rectangle(width: float, length: float, angle: float, centre: np.ndarray, notch: float) -> np.ndarray:
    """Counter-clockwise footprint; a non-zero *notch* cuts one corner into an L shape."""
    w, l = width / 2.0, length / 2.0
    if notch > 0:
        nw, nl = notch * width, notch * length
        ring = np.array([[-l, -w], [l, -w], [l, w - nw], [l - nl, w - nw], [l - nl, w], [-l, w]])
    else:
        ring = np.array([[-l, -w], [l, -w], [l, w], [-l, w]])
    c, s = np.cos(angle), np.sin(angle)
    return ring @ np.array([[c, s], [-s, c]]) + centre


def generate(n: int = 2000, h: int = 64, seed: int = 0, signals: tuple[str, ...] = SIGNALS,
             noise: float = 3.0) -> SyntheticData:
    """Draw *n* linked records; *signals* picks the modalities the scores depend on."""
    if n <= 0 or h <= 0:
        raise InvalidConfig("synthetic dataset needs n > 0 and h > 0")
    if set(signals) - set(SIGNALS):
        raise InvalidConfig(f"unknown signal modalities {sorted(set(signals) - set(SIGNALS))}")
    rng = np.random.default_rng(seed)
    directions = {name: _unit(rng, h) for name in TEXT_FIELDS}

    age = rng.integers(0, len(AGE_BANDS), n)
    ptype = rng.choice(len(PROPERTY_TYPES), n, p=[0.55, 0.3, 0.1, 0.05])
    form = rng.integers(0, len(BUILT_FORMS), n)
    tariff = rng.integers(0, len(TARIFFS), n)
    fuel = rng.choice(len(FUELS), n, p=[0.7, 0.2, 0.05, 0.05])
    tfa = np.exp(rng.normal(np.log(85.0), 0.4, n))
    rooms = np.clip(np.rint(tfa / 22.0 + rng.normal(0, 0.7, n)), 1, None)
    heated = np.minimum(rooms, np.clip(rooms - rng.integers(0, 2, n), 1, None))
    photo = np.where(rng.random(n) < 0.15, rng.uniform(5, 60, n), 0.0)

    storeys = rng.integers(1, 4, n)
    height = storeys * 3.0 + rng.uniform(0.0, 2.5, n)
    area = tfa / storeys * rng.uniform(0.8, 1.3, n)
    aspect = rng.uniform(1.0, 2.5, n)
    angle = rng.uniform(0, np.pi, n)
    notch = np.where(rng.random(n) < 0.25, rng.uniform(0.2, 0.45, n), 0.0)

    projection = rng.normal(size=(n, len(TEXT_FIELDS)))
    present = rng.random((n, len(TEXT_FIELDS))) > 0.04
    present[:, TEXT_FIELDS.index('walls')] = True
    present[ptype == PROPERTY_TYPES.index('Flat'), TEXT_FIELDS.index('roof')] &= rng.random(
        int(np.sum(ptype == PROPERTY_TYPES.index('Flat')))) > 0.3

    z = lambda v: (v - v.mean()) / (v.std() or 1.0)
    parts = {
        'tab': -6.0 * z(np.log(tfa)) + 0.08 * photo + 0.8 * age
               + np.array([FUEL_EFFECT[FUELS[f]] for f in fuel]),
        'text': sum(w * np.where(present[:, TEXT_FIELDS.index(k)], projection[:, TEXT_FIELDS.index(k)], 0.0)
                    for k, w in TEXT_WEIGHTS.items()),
        'spatial': -5.0 * z(np.log(area)) + 3.0 * z(height),
    }
    signal = sum((parts[m] for m in signals), np.zeros(n))
    sap = np.clip(58.0 + signal + rng.normal(0, noise, n), 1.0, 100.0)
    ei = np.clip(54.0 + 1.1 * signal + rng.normal(0, noise, n), 1.0, 100.0)

    epc_rows, boundary_rows, embedding_rows = [], [], []
    for i in range(n):
        uprn = f"{100000000 + i}"
        width = np.sqrt(area[i] / aspect[i] / (1.0 - notch[i] ** 2 if notch[i] else 1.0))
        centre = ORIGIN + rng.uniform(-2000, 2000, 2)
        ring = _rectangle(width, width * aspect[i], angle[i], centre, notch[i])
        epc_rows.append({
            'uprn': uprn,
            'construction_age_band': AGE_BANDS[age[i]],
            'property_type': PROPERTY_TYPES[ptype[i]],
            'built_form': BUILT_FORMS[form[i]],
            'energy_tariff': TARIFFS[tariff[i]] if rng.random() > 0.02 else '',
            'main_fuel': FUELS[fuel[i]],
            'total_floor_area': round(float(tfa[i]), 2),
            'number_habitable_rooms': int(rooms[i]),
            'number_heated_rooms': int(heated[i]),
            'photo_supply': round(float(photo[i]), 1) if rng.random() > 0.03 else '',
            'sap_score': round(float(sap[i]), 3),
            'ei_score': round(float(ei[i]), 3),
            **{flag: bool(rng.random() < FLAG_RATES[flag]) for flag in FLAG_FIELDS},
        })
        boundary_rows.append({'uprn': uprn, 'points': np.round(ring, 3).tolist(),
                              'height': round(float(height[i]), 2)})
        for k, name in enumerate(TEXT_FIELDS):
            if present[i, k]:
                vector = projection[i, k] * directions[name] + rng.normal(0, 0.3 / np.sqrt(h), h)
                embedding_rows.append({'uprn': uprn, 'field': name, 'vector': np.round(vector, 6).tolist()})

    mask_embeddings = {name: np.round(rng.normal(0, 0.3 / np.sqrt(h), h), 6) for name in TEXT_FIELDS}
    replacements = {key: np.round(REPLACEMENT_PROJECTION * directions[name], 6)
                    for key, name in REPLACEMENTS.items()}
    coefficients = {'intercept': {'SAP': 58.0, 'EI': 54.0}, 'ei_gain': 1.1, 'noise_sigma': noise,
                    'text_weights': TEXT_WEIGHTS, 'signals': list(signals), 'h': h, 'n': n, 'seed': seed}
    logger.info("generated {} synthetic records (h={}, signals={})", n, h, ','.join(signals))
    return SyntheticData(epc_rows, boundary_rows, embedding_rows, mask_embeddings, replacements, directions,
                         coefficients)


def _write_jsonl(path: Path, rows):
    with path.open('w', encoding='utf-8') as handle:
        for row in rows:
            handle.write(json.dumps(row, separators=(',', ':')) + '\n')


def write_synthetic(out_dir: str | Path, n: int = 2000, h: int = 64, seed: int = 0,
                    signals: tuple[str, ...] = SIGNALS) -> dict[str, Path]:
    """Write the five input files, three scenario files and a ready-to-run
    ``config.toml`` into *out_dir*; returns the written paths by name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate(n, h, seed, signals)
    paths = {
        'properties': out_dir / 'properties.csv',
        'boundaries': out_dir / 'boundaries.jsonl',
        'text_embeddings': out_dir / 'text_embeddings.jsonl',
        'mask_embeddings': out_dir / 'mask_embeddings.jsonl',
        'replacement_embeddings': out_dir / 'replacement_embeddings.jsonl',
        'coefficients': out_dir / 'synth_coefficients.json',
        'config': out_dir / 'config.toml',
    }
    pd.DataFrame(data.epc_rows, columns=list(PROPERTY_COLUMNS)).to_csv(paths['properties'], index=False)
    _write_jsonl(paths['boundaries'], data.boundary_rows)
    _write_jsonl(paths['text_embeddings'], data.embedding_rows)
    _write_jsonl(paths['mask_embeddings'], ({'field': k, 'vector': v.tolist()}
                                            for k, v in data.mask_embeddings.items()))
    _write_jsonl(paths['replacement_embeddings'], ({'key': k, 'vector': v.tolist()}
                                                   for k, v in data.replacement_embeddings.items()))
    paths['coefficients'].write_text(json.dumps(data.coefficients, indent=1, sort_keys=True) + '\n',
                                     encoding='utf-8')
    for name, (flag, replacements) in SCENARIOS.items():
        path = out_dir / f'{name}.json'
        path.write_text(json.dumps({'name': name, 'eligibility_flag': flag, 'text_replacements': replacements,
                                    'categorical_overrides': {}, 'numeric_overrides': {},
                                    'tariff_deflator': 1.0}, indent=1) + '\n', encoding='utf-8')
        paths[name] = path
    paths['config'].write_text(
        f'seed = {seed}\n\n[paths]\n'
        + ''.join(f'{key} = "{paths[key].name}"\n' for key in
                  ('properties', 'boundaries', 'text_embeddings', 'mask_embeddings', 'replacement_embeddings'))
        + 'output_dir = "out"\n\n'
        + f'[model]\nh = {h}\n', encoding='utf-8')
    logger.info("synthetic dataset written to {}", out_dir)
    return paths
