import json

import numpy as np
import pytest

from conftest import H
from epcfusion.datahub.features import Preprocessor
from epcfusion.datahub.records import FLAG_FIELDS, NUMERIC_FIELDS, TEXT_FIELDS
from epcfusion.datahub.synth import generate
from epcfusion.errors import InvalidConfig, MissingFile, OutOfRange, SchemaMismatch
from epcfusion.retrofit import (EI_INVERSE_BREAK, SAP_INVERSE_BREAK, ScenarioSpec, apply_scenario, compare_scenarios,
                                cost_from_sap, eco2_from_ei, ei_from_eco2, energy_cost_factor, evaluate_scenario,
                                sap_from_cost)
from epcfusion.retrofit.formulas import EI_BREAK, EI_LOG, SAP_BREAK, SAP_LOG

WALLS = TEXT_FIELDS.index('walls')
ROOF = TEXT_FIELDS.index('roof')


class WallProjection:
    """Scores rise with the walls vector's projection on *direction*."""

    def __init__(self, direction, gain=(4.0, 5.0)):
        self.direction = np.asarray(direction)
        self.gain = np.asarray(gain)

    def __call__(self, batch):
        value = (batch.text[:, WALLS, :] @ self.direction) * batch.text_mask[:, WALLS]
        return np.array([55.0, 50.0]) + value[:, None] * self.gain


def constant(batch):
    return np.tile([60.0, 70.0], (len(batch), 1))


@pytest.fixture(scope='module')
def synthetic():
    return generate(120, H, 0)


@pytest.fixture(scope='module')
def preprocessor(table):
    return Preprocessor.fit(table)


def wall_spec(**kwargs):
    return ScenarioSpec('wall_insulation', 'needs_wall', text_replacements={'walls': 'walls_insulated'}, **kwargs)


# relations ----------------------------------------------------------------------

def test_sap_examples():
    assert sap_from_cost(1000.0, 100.0) == pytest.approx(7.74, abs=0.01)
    assert energy_cost_factor(1000.0, 100.0) == pytest.approx(6.8966, abs=1e-4)
    assert sap_from_cost(145.0, 100.0) == pytest.approx(83.79, abs=1e-9)
    assert cost_from_sap(83.79, 100.0) == pytest.approx(145.0, abs=1e-9)


def test_ei_example():
    assert ei_from_eco2(1450.0, 100.0) == pytest.approx(86.6, abs=1e-9)
    assert eco2_from_ei(86.6, 100.0) == pytest.approx(1450.0, abs=1e-6)


def test_branch_gaps():
    at_break = 3.5 * 145.0
    linear = sap_from_cost(at_break, 100.0)
    log = sap_from_cost(at_break * (1 + 1e-7), 100.0)
    assert linear == pytest.approx(SAP_INVERSE_BREAK, abs=1e-9)
    assert log == pytest.approx(43.240, abs=1e-3)
    assert 0 < linear - log < 0.03
    ei_linear = ei_from_eco2(28.3 * 145.0, 100.0)
    ei_log = ei_from_eco2(28.3 * 145.0 * (1 + 1e-7), 100.0)
    assert ei_linear == pytest.approx(EI_INVERSE_BREAK, abs=1e-9)
    assert ei_log == pytest.approx(62.080, abs=1e-3)
    assert abs(ei_log - ei_linear) < 0.01


@pytest.mark.parametrize('score', [20.0, 43.265, 50.0, 90.0])
def test_sap_round_trip(score):
    assert sap_from_cost(cost_from_sap(score, 87.0), 87.0) == pytest.approx(score, abs=1e-9)


@pytest.mark.parametrize('score', [10.0, 62.078, 80.0])
def test_ei_round_trip(score):
    assert ei_from_eco2(eco2_from_ei(score, 87.0), 87.0) == pytest.approx(score, abs=1e-9)


def test_deflator_scales_cost():
    assert sap_from_cost(800.0, 90.0, d=0.5) == pytest.approx(sap_from_cost(400.0, 90.0))
    assert cost_from_sap(60.0, 90.0, d=0.5) == pytest.approx(2 * cost_from_sap(60.0, 90.0))


# scores in (62.078, EI_OVERLAP_END] come from both branches; the inverse uses the linear one
EI_OVERLAP_END = 10.0 ** ((EI_LOG[0] - EI_INVERSE_BREAK) / EI_LOG[1])
# no cost gives a SAP score strictly inside (SAP_GAP_START, 43.265)
SAP_GAP_START = SAP_LOG[0] - SAP_LOG[1] * np.log10(SAP_BREAK)


def test_score_round_trips_on_a_grid():
    scores = np.linspace(1.0, 99.9, 1000)
    reachable = scores[(scores <= SAP_GAP_START) | (scores >= SAP_INVERSE_BREAK)]
    np.testing.assert_allclose(sap_from_cost(cost_from_sap(reachable, 87.0, d=0.8), 87.0, d=0.8), reachable,
                               rtol=1e-9)
    np.testing.assert_allclose(ei_from_eco2(eco2_from_ei(scores, 87.0), 87.0), scores, rtol=1e-9)


def test_cost_round_trip_on_a_log_grid():
    ecf = np.logspace(-3, np.log10(7.8), 100_000)
    cost = ecf * 145.0
    np.testing.assert_allclose(cost_from_sap(sap_from_cost(cost, 100.0), 100.0), cost, rtol=1e-9)


def test_carbon_round_trip_outside_the_branch_overlap():
    cf = np.logspace(-2, np.log10(120.0), 100_000)
    overlap = (cf > EI_BREAK) & (cf <= EI_OVERLAP_END * (1 + 1e-9))
    eco2 = cf[~overlap] * 145.0
    np.testing.assert_allclose(eco2_from_ei(ei_from_eco2(eco2, 100.0), 100.0), eco2, rtol=1e-9)


def test_carbon_in_the_branch_overlap_maps_to_the_linear_inverse():
    cf = 28.301
    assert EI_BREAK < cf < EI_OVERLAP_END
    ei = ei_from_eco2(cf * 145.0, 100.0)
    assert EI_INVERSE_BREAK < ei < 62.0804
    assert eco2_from_ei(ei, 100.0) / 145.0 < EI_BREAK


def test_monotone_on_a_log_grid():
    factor = np.logspace(-3, 3, 100_000)
    sap = sap_from_cost(factor * 145.0, 100.0)
    assert np.all(np.diff(sap) <= 0)
    ei = ei_from_eco2(factor * 145.0, 100.0)
    steps = np.diff(ei)
    straddle = (factor[:-1] <= EI_BREAK) & (factor[1:] > EI_BREAK)
    assert straddle.sum() == 1
    assert np.all(steps[~straddle] <= 0)
    assert steps[straddle][0] < 0.01
    assert ei[0] > ei[-1]


def test_scores_are_clamped():
    assert sap_from_cost(1e-6, 100.0) == pytest.approx(100.0)
    assert sap_from_cost(1e9, 100.0) == 1.0
    assert ei_from_eco2(1e12, 50.0) == 1.0
    assert cost_from_sap(100.0, 100.0) == 0.0


def test_vectorised_relations():
    out = sap_from_cost(np.array([145.0, 1000.0]), np.array([100.0, 100.0]))
    assert out.shape == (2,)
    assert isinstance(sap_from_cost(145.0, 100.0), float)


@pytest.mark.parametrize('call', [
    lambda: sap_from_cost(-1.0, 100.0),
    lambda: sap_from_cost(100.0, 0.0),
    lambda: sap_from_cost(100.0, 100.0, d=0.0),
    lambda: sap_from_cost(np.nan, 100.0),
    lambda: cost_from_sap(0.5, 100.0),
    lambda: eco2_from_ei(101.0, 100.0),
    lambda: ei_from_eco2(0.0, 100.0),
])
def test_out_of_range(call):
    with pytest.raises(OutOfRange):
        call()


# scenario spec --------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(InvalidConfig):
        ScenarioSpec('solar_panels', 'needs_wall')
    with pytest.raises(InvalidConfig):
        ScenarioSpec('custom', 'needs_boiler')
    with pytest.raises(InvalidConfig):
        ScenarioSpec('custom', 'needs_wall', text_replacements={'chimney': 'x'})
    with pytest.raises(InvalidConfig):
        ScenarioSpec('custom', 'needs_wall', numeric_overrides={'storeys': 2.0})
    with pytest.raises(InvalidConfig):
        ScenarioSpec('custom', 'needs_wall', tariff_deflator=0.0)
    with pytest.raises(InvalidConfig):
        ScenarioSpec.from_dict({'name': 'custom'})


def test_spec_from_json(tmp_path):
    path = tmp_path / 'roof.json'
    path.write_text(json.dumps({'name': 'roof_insulation', 'eligibility_flag': 'needs_roof',
                                'text_replacements': {'roof': 'roof_insulated'},
                                'numeric_overrides': {'total_floor_area': 120}, 'tariff_deflator': 0.9}))
    spec = ScenarioSpec.from_json(path)
    assert spec.numeric_overrides == {'total_floor_area': 120.0}
    assert spec.categorical_overrides == {}
    assert spec.tariff_deflator == 0.9
    with pytest.raises(MissingFile):
        ScenarioSpec.from_json(tmp_path / 'absent.json')
    (tmp_path / 'broken.json').write_text('{"name": ')
    with pytest.raises(SchemaMismatch):
        ScenarioSpec.from_json(tmp_path / 'broken.json')


# applying and evaluating ------------------------------------------------------------

def test_apply_edits_only_eligible_walls(table, synthetic):
    replacements = synthetic.replacement_embeddings
    before = table.text.copy()
    modified, eligible = apply_scenario(table, wall_spec(), replacements)
    np.testing.assert_array_equal(eligible, table.column('needs_wall'))
    np.testing.assert_array_equal(table.text, before)
    np.testing.assert_array_equal(modified.text[eligible, WALLS], np.tile(replacements['walls_insulated'],
                                                                          (eligible.sum(), 1)))
    np.testing.assert_array_equal(modified.text[~eligible], table.text[~eligible])
    others = [k for k in range(len(TEXT_FIELDS)) if k != WALLS]
    np.testing.assert_array_equal(modified.text[:, others], table.text[:, others])
    np.testing.assert_array_equal(modified.numeric, table.numeric)
    np.testing.assert_array_equal(modified.boundary, table.boundary)


def test_apply_marks_replaced_field_present(table, synthetic):
    spec = ScenarioSpec('roof_insulation', 'needs_roof', text_replacements={'roof': 'roof_insulated'})
    modified, eligible = apply_scenario(table, spec, synthetic.replacement_embeddings)
    assert modified.text_mask[eligible, ROOF].all()
    np.testing.assert_array_equal(modified.text_mask[~eligible, ROOF], table.text_mask[~eligible, ROOF])


def test_missing_replacement_key(table, preprocessor):
    with pytest.raises(InvalidConfig):
        evaluate_scenario(constant, preprocessor, table, wall_spec(), {'roof_insulated': np.zeros(H)})


def test_empty_scenario_is_a_no_op(table, preprocessor, synthetic):
    predict = WallProjection(synthetic.directions['walls'])
    result = evaluate_scenario(predict, preprocessor, table, ScenarioSpec('custom', 'needs_wall'), {})
    for column in ('d_sap', 'd_ei', 'd_cost', 'd_eco2'):
        np.testing.assert_array_equal(result.frame[column], 0.0)


def test_replacing_with_the_original_vector_changes_nothing(table, preprocessor, synthetic):
    vector = table.text[0, WALLS].copy()
    text = table.text.copy()
    text[:, WALLS] = vector
    same_walls = table.replace(text=text)
    predict = WallProjection(synthetic.directions['walls'])
    result = evaluate_scenario(predict, preprocessor, same_walls, wall_spec(), {'walls_insulated': vector})
    assert result.aggregates['n_eligible'] > 0
    for column in ('d_sap', 'd_ei', 'd_cost', 'd_eco2'):
        np.testing.assert_array_equal(result.frame[column], 0.0)


def test_planted_insulation_raises_scores(table, preprocessor, synthetic):
    predict = WallProjection(synthetic.directions['walls'])
    result = evaluate_scenario(predict, preprocessor, table, wall_spec(), synthetic.replacement_embeddings)
    eligible = result.frame[result.frame['eligible']]
    assert (eligible['d_sap'] > 0).mean() >= 0.95
    assert (eligible['d_cost'] > 0).mean() >= 0.95
    ineligible = result.frame[~result.frame['eligible']]
    assert (ineligible[['d_sap', 'd_ei', 'd_cost', 'd_eco2']] == 0).all().all()


def test_aggregates_equal_row_sums(table, preprocessor, synthetic):
    predict = WallProjection(synthetic.directions['walls'])
    result = evaluate_scenario(predict, preprocessor, table, wall_spec(tariff_deflator=0.8),
                               synthetic.replacement_embeddings)
    aggregates = result.aggregates
    rows = result.frame[result.frame['eligible']]
    assert aggregates['n_total'] == len(table)
    assert aggregates['n_eligible'] == int(table.column('needs_wall').sum())
    assert aggregates['n_exceptions'] == 0
    assert aggregates['tariff_deflator'] == 0.8
    for column in ('d_cost', 'd_eco2', 'd_sap', 'd_ei'):
        assert aggregates[f'total_{column}'] == float(rows[column].sum())
        assert aggregates[f'mean_{column}'] == pytest.approx(rows[column].mean())


def test_costs_follow_the_relations(table, preprocessor, synthetic):
    predict = WallProjection(synthetic.directions['walls'])
    result = evaluate_scenario(predict, preprocessor, table, wall_spec(tariff_deflator=0.8),
                               synthetic.replacement_embeddings)
    row = result.frame.iloc[3]
    tfa = preprocessor.raw_numeric(table)[3, NUMERIC_FIELDS.index('total_floor_area')]
    assert row['cost_pre'] == pytest.approx(cost_from_sap(row['sap_pre'], tfa, 0.8))
    assert row['eco2_post'] == pytest.approx(eco2_from_ei(row['ei_post'], tfa))
    assert row['d_cost'] == pytest.approx(row['cost_pre'] - row['cost_post'])


def test_no_eligible_properties(table, preprocessor, synthetic):
    flags = table.flags.copy()
    flags[:, FLAG_FIELDS.index('needs_wall')] = False
    nobody = table.replace(flags=flags)
    result = evaluate_scenario(constant, preprocessor, nobody, wall_spec(), synthetic.replacement_embeddings)
    aggregates = result.aggregates
    assert aggregates['n_eligible'] == 0
    assert aggregates['mean_d_cost'] == 0.0
    assert aggregates['total_d_sap'] == 0.0


def test_floor_area_override_changes_cost_only(table, preprocessor):
    spec = ScenarioSpec('custom', 'needs_wall', numeric_overrides={'total_floor_area': 200.0})
    result = evaluate_scenario(constant, preprocessor, table, spec, {})
    frame = result.frame
    eligible = frame['eligible'].to_numpy()
    tfa = preprocessor.raw_numeric(table)[:, NUMERIC_FIELDS.index('total_floor_area')]
    np.testing.assert_array_equal(frame['d_sap'], 0.0)
    expected = frame['cost_pre'] * (200.0 + 45.0) / (tfa + 45.0)
    np.testing.assert_allclose(frame['cost_post'][eligible], expected[eligible], rtol=1e-12)
    np.testing.assert_array_equal(frame['cost_post'][~eligible], frame['cost_pre'][~eligible])


def test_failed_conversions_are_collected(table, preprocessor):
    spec = ScenarioSpec('custom', 'needs_wall', numeric_overrides={'total_floor_area': -10.0})
    result = evaluate_scenario(constant, preprocessor, table, spec, {})
    n_eligible = int(table.column('needs_wall').sum())
    assert len(result.exceptions) == n_eligible
    assert result.exceptions[0]['error'] == 'OutOfRange'
    failed = result.frame[result.frame['eligible']]
    assert failed['cost_post'].isna().all()
    assert result.aggregates['n_exceptions'] == n_eligible
    assert result.aggregates['total_d_cost'] == 0.0


def test_compare_and_geojson(tmp_path, table, preprocessor, synthetic):
    replacements = synthetic.replacement_embeddings
    predict = WallProjection(synthetic.directions['walls'])
    walls = evaluate_scenario(predict, preprocessor, table, wall_spec(), replacements)
    noop = evaluate_scenario(predict, preprocessor, table, ScenarioSpec('custom', 'needs_roof'), replacements)
    ranking = compare_scenarios([noop, walls])
    assert list(ranking['scenario']) == ['wall_insulation', 'custom']
    assert list(ranking['rank']) == [1, 2]
    collection = json.loads(walls.write_geojson(tmp_path / 'walls.geojson').read_text())
    assert collection['type'] == 'FeatureCollection'
    assert len(collection['features']) == len(table)
    feature = collection['features'][0]
    assert feature['geometry']['type'] == 'Polygon'
    assert feature['id'] == str(table.uprns[0])
    assert isinstance(feature['properties']['eligible'], bool)
    assert compare_scenarios([]).empty
