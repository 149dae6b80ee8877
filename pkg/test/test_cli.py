import json

import pytest

from epcfusion.cli import main
from epcfusion.manifest import MANIFEST_NAME

SMALL_MODEL = 'd = 8\ne = 4\nL = 16\nnumeric_mlp = [8]\nspatial_numeric_mlp = [6]\ngate_hidden = 8\n' \
              'fusion_mlp = [12, 8]\n'


def run_cli(capsys, *args) -> tuple[int, list[str]]:
    with pytest.raises(SystemExit) as info:
        main([str(a) for a in args])
    err = capsys.readouterr().err
    return info.value.code, [line for line in err.splitlines() if line.strip()]


@pytest.fixture
def dataset(tmp_path, capsys):
    data = tmp_path / 'data'
    code, _ = run_cli(capsys, 'synth', '--out', data, '--n', 60, '--h', 6, '--seed', 5)
    assert code == 0
    config = data / 'config.toml'
    config.write_text(config.read_text(encoding='utf-8') + SMALL_MODEL, encoding='utf-8')
    return config


def test_synth_writes_inputs_and_manifest(dataset):
    data = dataset.parent
    for name in ('properties.csv', 'boundaries.jsonl', 'text_embeddings.jsonl', 'mask_embeddings.jsonl',
                 'replacement_embeddings.jsonl', 'synth_coefficients.json'):
        assert (data / name).exists()
    manifest = json.loads((data / MANIFEST_NAME).read_text(encoding='utf-8'))
    assert manifest['commands']['synth']['seed'] == 5
    assert 'properties.csv' in manifest['commands']['synth']['artifacts']


def test_split_is_deterministic(dataset, tmp_path, capsys):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        code, _ = run_cli(capsys, 'split', '--config', dataset, '--output-dir', out)
        assert code == 0
        outputs.append(out)
    first, second = (json.loads((o / 'split.json').read_text(encoding='utf-8')) for o in outputs)
    assert first == second
    manifests = [json.loads((o / MANIFEST_NAME).read_text(encoding='utf-8'))['commands']['split']
                 for o in outputs]
    assert manifests[0]['artifacts'] == manifests[1]['artifacts']
    assert manifests[0]['config_hash'] != ''
    assert manifests[0]['train'] + manifests[0]['val'] + manifests[0]['test'] <= 60


def test_seed_option_changes_split(dataset, tmp_path, capsys):
    run_cli(capsys, 'split', '--config', dataset, '--output-dir', tmp_path / 'a')
    run_cli(capsys, 'split', '--config', dataset, '--output-dir', tmp_path / 'b', '--seed', 99)
    a = json.loads((tmp_path / 'a' / 'split.json').read_text(encoding='utf-8'))
    b = json.loads((tmp_path / 'b' / 'split.json').read_text(encoding='utf-8'))
    assert a != b


def test_gradcheck_command(dataset, tmp_path, capsys):
    out = tmp_path / 'grad'
    code, _ = run_cli(capsys, 'gradcheck', '--config', dataset, '--output-dir', out, '--samples', 3,
                      '--coords', 5)
    assert code == 0
    report = json.loads((out / 'gradcheck.json').read_text(encoding='utf-8'))
    assert report['checked'] > 0
    assert report['max_relative_error'] <= report['tolerance']
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding='utf-8'))
    assert manifest['commands']['gradcheck']['passed'] is True


def test_missing_config_exits_with_config_code(tmp_path, capsys):
    code, lines = run_cli(capsys, 'split', '--config', tmp_path / 'absent.toml')
    assert code == 2
    failure = json.loads(lines[-1])
    assert failure['kind'] == 'config'
    assert failure['error'] == 'InvalidConfig'


def test_missing_input_exits_with_data_code(dataset, tmp_path, capsys):
    (dataset.parent / 'properties.csv').unlink()
    code, lines = run_cli(capsys, 'split', '--config', dataset, '--output-dir', tmp_path / 'out')
    assert code == 3
    failure = json.loads(lines[-1])
    assert failure['error'] == 'MissingFile'
    assert failure['exit_code'] == 3


def test_missing_checkpoint_is_a_data_error(dataset, tmp_path, capsys):
    code, lines = run_cli(capsys, 'evaluate', '--config', dataset, '--output-dir', tmp_path / 'empty')
    assert code == 3
    assert 'checkpoint not found' in json.loads(lines[-1])['message']


def test_usage_error_exits_with_config_code(capsys):
    code, lines = run_cli(capsys, 'explain', 'nonsense')
    assert code == 2
    assert json.loads(lines[-1])['kind'] == 'config'


def test_negative_seed_exits_with_config_code(dataset, tmp_path, capsys):
    code, lines = run_cli(capsys, 'split', '--config', dataset, '--output-dir', tmp_path / 'neg', '--seed', -1)
    assert code == 2
    failure = json.loads(lines[-1])
    assert failure['error'] == 'InvalidConfig'
    assert 'seed' in failure['message']
