import json

import numpy as np
import pytest

from conftest import H, L, synthetic_table
from epcfusion.datahub.bands import BandTable, map_score_to_band
from epcfusion.datahub.features import Preprocessor
from epcfusion.datahub.ingest import ingest, link_records, load_embedding_table
from epcfusion.datahub.records import CATEGORICAL_FIELDS, PropertyTable
from epcfusion.datahub.sampler import BalancedBatches, balanced_batches, joint_partition_labels, largest_remainder
from epcfusion.datahub.scaler import build_target_scaler
from epcfusion.datahub.split import Split, allocation, joint_stratified_split, stratum_labels
from epcfusion.datahub.synth import FLAG_RATES, generate, write_synthetic
from epcfusion.errors import (DegenerateTarget, DuplicateKey, EmptyInput, InvalidConfig, MissingFile, OutOfRange,
                              SchemaMismatch)

BANDS = BandTable()


def epc_row(uprn, sap=60.0, ei=55.0, ptype='House'):
    return {'uprn': uprn, 'construction_age_band': '1930-1949', 'property_type': ptype, 'built_form': 'Detached',
            'energy_tariff': 'Single', 'main_fuel': 'mains gas', 'total_floor_area': 80.0,
            'number_habitable_rooms': 4, 'number_heated_rooms': 4, 'photo_supply': 0.0,
            'sap_score': sap, 'ei_score': ei, 'needs_wall': 'true', 'needs_roof': 'false', 'needs_glazing': '0'}


def square(uprn, side=1.0, height=6.0):
    return {'uprn': uprn, 'points': [[0, 0], [side, 0], [side, side], [0, side]], 'height': height}


def embedding(uprn, field='walls', value=0.1):
    return {'uprn': uprn, 'field': field, 'vector': [value] * H}


@pytest.mark.parametrize('score, band', [(92, 'A'), (75, 'C'), (1, 'G'), (100, 'A'), (91.99, 'B'), (20.5, 'G')])
def test_map_score_to_band(score, band):
    assert map_score_to_band(score, BANDS) == band


@pytest.mark.parametrize('score', [0.5, 100.5])
def test_band_score_out_of_range(score):
    with pytest.raises(OutOfRange):
        map_score_to_band(score, BANDS)


def test_band_merge():
    assert [BANDS.partition_of(b) for b in 'ABCDEFG'] == ['AB', 'AB', 'C', 'D', 'E', 'FG', 'FG']


def test_band_table_rejects_unordered_thresholds():
    with pytest.raises(InvalidConfig):
        BandTable.from_mapping({'A': 92, 'B': 95, 'C': 69, 'D': 55, 'E': 39, 'F': 21, 'G': 1})


def test_link_three_records():
    records, report = link_records([epc_row(u) for u in 'abc'], [square(u) for u in 'abc'],
                                   [embedding(u) for u in 'abc'], H, L)
    assert [r.uprn for r in records] == ['a', 'b', 'c']
    assert report.linked == 3 and report.dropped == 0
    assert records[0].flags == (True, False, False)
    assert records[0].text_mask.tolist() == [True] + [False] * 7


def test_largest_polygon_wins():
    boundaries = [square('a', side=np.sqrt(40.0)), square('a', side=np.sqrt(90.0))]
    records, report = link_records([epc_row('a')], boundaries, [embedding('a')], H, L)
    assert records[0].spatial.footprint_area == pytest.approx(90.0)
    assert report.duplicate_polygons_resolved == 1


def test_missing_boundary_is_dropped():
    records, report = link_records([epc_row('a'), epc_row('b')], [square('a')], [embedding('a'), embedding('b')],
                                   H, L)
    assert [r.uprn for r in records] == ['a']
    assert report.unmatched_geometry == 1


def test_malformed_rows_are_counted():
    bad_score = epc_row('b', sap=140.0)
    degenerate = {'uprn': 'a', 'points': [[0, 0], [1, 1]], 'height': 3.0}
    records, report = link_records([epc_row('a'), bad_score], [degenerate, square('b')],
                                   [embedding('a'), embedding('b')], H, L)
    assert records == []
    assert report.malformed == {'epc:malformed_row': 1, 'boundary:degenerate_geometry': 1}


def test_duplicate_uprn_in_properties():
    with pytest.raises(DuplicateKey):
        link_records([epc_row('a'), epc_row('a')], [square('a')], [embedding('a')], H, L)


def test_duplicate_text_field():
    with pytest.raises(DuplicateKey):
        link_records([epc_row('a')], [square('a')], [embedding('a'), embedding('a')], H, L)


def test_ingest_from_files(tmp_path):
    paths = write_synthetic(tmp_path, n=40, h=H, seed=5)
    records, report = ingest(paths['properties'], paths['boundaries'], paths['text_embeddings'], H, L)
    assert report.linked == len(records) == 40
    masks = load_embedding_table(paths['mask_embeddings'], H, 'field')
    assert sorted(masks) == sorted(['walls', 'windows', 'floor', 'roof', 'mainheat', 'mainheatcont', 'hotwater',
                                    'lighting'])


def test_ingest_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        ingest(tmp_path / 'nope.csv', tmp_path / 'b.jsonl', tmp_path / 't.jsonl', H, L)


def test_properties_schema_mismatch(tmp_path):
    paths = write_synthetic(tmp_path, n=5, h=H)
    paths['properties'].write_text('uprn,sap_score\n1,50\n', encoding='utf-8')
    with pytest.raises(SchemaMismatch):
        ingest(paths['properties'], paths['boundaries'], paths['text_embeddings'], H, L)


@pytest.mark.parametrize('n, expected', [(10, (7, 1, 2)), (100, (70, 15, 15)), (2, (2, 0, 0)), (3, (2, 0, 1))])
def test_allocation(n, expected):
    assert allocation(n, (0.7, 0.15, 0.15)) == expected


def test_split_single_stratum():
    records, _ = link_records([epc_row(str(i)) for i in range(10)], [square(str(i)) for i in range(10)],
                              [embedding(str(i)) for i in range(10)], H, L)
    split = joint_stratified_split(PropertyTable.from_records(records, H, L), BANDS, seed=1)
    assert (len(split.train), len(split.val), len(split.test)) == (7, 1, 2)
    assert sorted(split.train + split.val + split.test) == sorted(str(i) for i in range(10))


def test_split_is_deterministic(table, tmp_path):
    first = joint_stratified_split(table, BANDS, seed=7)
    second = joint_stratified_split(table, BANDS, seed=7)
    first.write(tmp_path / 'a.json')
    second.write(tmp_path / 'b.json')
    assert (tmp_path / 'a.json').read_bytes() == (tmp_path / 'b.json').read_bytes()
    assert Split.read(tmp_path / 'a.json') == first
    assert joint_stratified_split(table, BANDS, seed=8) != first


def test_split_empty():
    with pytest.raises(EmptyInput):
        joint_stratified_split(PropertyTable.from_records([], H, L), BANDS)


def test_target_scaler():
    scaler = build_target_scaler(np.array([[50.0, 50.0], [70.0, 70.0]]))
    np.testing.assert_allclose(scaler.mu, [60, 60])
    np.testing.assert_allclose(scaler.normalize([[50, 50], [70, 70], [60, 60]]), [[-1, -1], [1, 1], [0, 0]])
    y = np.array([[12.5, 99.0]])
    np.testing.assert_allclose(scaler.denormalize(scaler.normalize(y)), y, atol=1e-9)


def test_target_scaler_zero_variance():
    with pytest.raises(DegenerateTarget):
        build_target_scaler(np.array([[50.0, 40.0], [50.0, 60.0]]))


def test_preprocessor_unknown_category_and_imputation(table):
    train, other = table.subset(range(0, 100)), table.subset(range(100, len(table)))
    pre = Preprocessor.fit(train)
    categorical = other.categorical.copy()
    categorical[0, CATEGORICAL_FIELDS.index('main_fuel')] = 'peat'
    numeric = other.numeric.copy()
    numeric[0, 0] = np.nan
    batch = pre.transform(other.replace(categorical=categorical, numeric=numeric))
    assert batch.cat_idx[0, CATEGORICAL_FIELDS.index('main_fuel')] == 0
    expected = (pre.numeric_median[0] - pre.numeric_mean[0]) / pre.numeric_std[0]
    assert batch.numeric[0, 0] == pytest.approx(expected)
    assert pre.vocab_sizes == [len(v) + 1 for v in pre.vocabularies]
    restored = Preprocessor.from_dict(json.loads(json.dumps(pre.to_dict())))
    np.testing.assert_array_equal(restored.transform(other).cat_idx, pre.transform(other).cat_idx)


def test_preprocessor_fit_on_empty_set():
    with pytest.raises(EmptyInput):
        Preprocessor.fit(PropertyTable.from_records([], H, L))


def test_largest_remainder():
    assert largest_remainder(128, np.array([3.0, 1.0])).tolist() == [96, 32]
    assert largest_remainder(3, np.array([1.0, 1.0])).tolist() == [2, 1]
    assert largest_remainder(10, np.array([0.0, 0.0])).tolist() == [0, 0]


def test_balanced_batch_shares():
    labels = np.array([0] * 384 + [1] * 128)
    first = next(BalancedBatches(labels, 128, seed=0).epoch(0))
    assert len(first) == 128
    assert np.bincount(labels[first]).tolist() == [96, 32]


def test_single_label_is_plain_shuffling():
    batches = list(BalancedBatches(np.zeros(300, dtype=int), 128, seed=2).epoch(0))
    assert [len(b) for b in batches] == [128, 128, 44]
    assert sorted(np.concatenate(batches).tolist()) == list(range(300))


def test_epoch_covers_every_record_once(table):
    labels = joint_partition_labels(table.targets, BANDS)
    sampler = BalancedBatches(labels, 16, seed=4)
    for epoch in range(3):
        seen = np.concatenate(list(sampler.epoch(epoch)))
        assert sorted(seen.tolist()) == list(range(len(table)))
        np.testing.assert_array_equal(np.bincount(labels[seen], minlength=25), np.bincount(labels, minlength=25))
    assert len(sampler) == -(-len(table) // 16)


def test_batches_are_reproducible(table):
    a = [b.tolist() for b in balanced_batches(table.targets, 16, BANDS, seed=9, epoch=1)]
    b = [b.tolist() for b in balanced_batches(table.targets, 16, BANDS, seed=9, epoch=1)]
    c = [b.tolist() for b in balanced_batches(table.targets, 16, BANDS, seed=9, epoch=2)]
    assert a == b
    assert a != c


def test_synthetic_flags_and_shapes():
    data = generate(2000, H, seed=0)
    assert len(data.epc_rows) == 2000
    for flag, rate in FLAG_RATES.items():
        share = np.mean([row[flag] for row in data.epc_rows])
        assert share == pytest.approx(rate, abs=0.04)
    scores = np.array([[row['sap_score'], row['ei_score']] for row in data.epc_rows])
    assert scores.min() >= 1.0 and scores.max() <= 100.0


def test_synthetic_records_link(table):
    assert len(table) == 120
    assert table.boundary.shape == (120, L, 2)
    assert np.all(table.text_mask[:, 0])


def test_synthetic_is_reproducible():
    a, b = synthetic_table(20, seed=3), synthetic_table(20, seed=3)
    np.testing.assert_array_equal(a.targets, b.targets)
    np.testing.assert_array_equal(a.text, b.text)


def label_table(n: int, seed: int) -> PropertyTable:
    """Only the columns the splitter and the sampler read carry data."""
    rng = np.random.default_rng(seed)
    categorical = np.full((n, len(CATEGORICAL_FIELDS)), 'x', dtype=object)
    categorical[:, CATEGORICAL_FIELDS.index('property_type')] = rng.choice(
        ['Flat', 'House', 'Maisonette', 'Bungalow'], n, p=[0.5, 0.35, 0.1, 0.05])
    sap = np.clip(rng.normal(62.0, 16.0, n), 1.0, 100.0)
    ei = np.clip(0.9 * sap + rng.normal(0.0, 9.0, n), 1.0, 100.0)
    return PropertyTable(np.array([f"{i:06d}" for i in range(n)], dtype=object), categorical, np.zeros((n, 4)),
                         np.zeros((n, 8, 1)), np.ones((n, 8), dtype=bool), np.zeros((n, 3, 2)), np.zeros((n, 3)),
                         np.stack([sap, ei], axis=1), np.zeros((n, 3), dtype=bool))


@pytest.fixture(scope='module')
def large_table():
    return label_table(50_000, seed=17)


@pytest.mark.slow
def test_large_split_follows_the_floor_formula(large_table):
    ratios = (0.7, 0.15, 0.15)
    split = joint_stratified_split(large_table, BANDS, ratios, seed=5)
    which = np.full(len(large_table), -1)
    for code, part in enumerate((split.train, split.val, split.test)):
        which[[int(u) for u in part]] = code
    assert np.all(which >= 0)

    strata = {}
    for i, label in enumerate(stratum_labels(large_table, BANDS)):
        strata.setdefault(label, []).append(i)
    assert len(strata) >= 40
    for label, members in strata.items():
        counts = np.bincount(which[members], minlength=3)
        assert tuple(counts.tolist()) == allocation(len(members), ratios), label

    assert joint_stratified_split(large_table, BANDS, ratios, seed=5).to_json() == split.to_json()


@pytest.mark.slow
def test_large_sampler_reproduces_label_counts(large_table):
    labels = joint_partition_labels(large_table.targets, BANDS)
    sampler = BalancedBatches(labels, 128, seed=3)
    totals = np.bincount(labels, minlength=25)
    for epoch in range(2):
        batches = list(sampler.epoch(epoch))
        assert len(batches) == len(sampler)
        seen = np.concatenate(batches)
        assert len(seen) == len(large_table)
        np.testing.assert_array_equal(np.bincount(labels[seen], minlength=25), totals)
        first = np.bincount(labels[batches[0]], minlength=25)[sampler.classes]
        np.testing.assert_array_equal(first, largest_remainder(128, sampler.counts.astype(np.float64)))
        again = np.concatenate(list(sampler.epoch(epoch)))
        np.testing.assert_array_equal(again, seen)
