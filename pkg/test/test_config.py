from pathlib import Path

import pytest

from epcfusion.config import SEED_ENV, RunConfig
from epcfusion.errors import InvalidConfig


def write_config(tmp_path, text):
    path = tmp_path / 'run.toml'
    path.write_text(text, encoding='utf-8')
    return path


@pytest.mark.parametrize('seed', [0, 7, 2**64 - 1])
def test_seed_accepts_unsigned_64_bit(seed):
    assert RunConfig(seed=seed).seed == seed


@pytest.mark.parametrize('seed', [-1, -2**63, 2**64, 1.5, True, '3'])
def test_seed_rejects_values_outside_unsigned_64_bit(seed):
    with pytest.raises(InvalidConfig):
        RunConfig(seed=seed)


def test_negative_seed_override_is_a_config_error():
    with pytest.raises(InvalidConfig):
        RunConfig().with_overrides(seed=-1)


def test_negative_seed_in_file_and_environment(tmp_path, monkeypatch):
    with pytest.raises(InvalidConfig):
        RunConfig.load(write_config(tmp_path, 'seed = -1\n'))
    monkeypatch.setenv(SEED_ENV, '-5')
    with pytest.raises(InvalidConfig):
        RunConfig.load(write_config(tmp_path, 'seed = 1\n'))


def test_load_resolves_paths_and_env_seed(tmp_path, monkeypatch):
    path = write_config(tmp_path, 'seed = 4\n[paths]\nproperties = "p.csv"\n[optim]\nmax_epochs = 3\n')
    config = RunConfig.load(path)
    assert config.seed == 4
    assert config.paths.properties == tmp_path / 'p.csv'
    assert config.optim.max_epochs == 3
    monkeypatch.setenv(SEED_ENV, '11')
    assert RunConfig.load(path).seed == 11
    monkeypatch.setenv(SEED_ENV, 'eleven')
    with pytest.raises(InvalidConfig):
        RunConfig.load(path)


@pytest.mark.parametrize('text', ['colour = 1\n', '[optim]\nspeed = 2\n', 'seed = [\n', '[split]\ntrain = 0.9\n'])
def test_bad_files(tmp_path, text):
    with pytest.raises(InvalidConfig):
        RunConfig.load(write_config(tmp_path, text))


def test_missing_file():
    with pytest.raises(InvalidConfig):
        RunConfig.load(Path('does-not-exist.toml'))


def test_overrides_and_hash():
    base = RunConfig()
    changed = base.with_overrides(**{'optim.lr': 0.01, 'seed': None})
    assert changed.optim.lr == 0.01
    assert changed.seed == base.seed
    assert base.hash() == RunConfig().hash()
    assert changed.hash() != base.hash()
