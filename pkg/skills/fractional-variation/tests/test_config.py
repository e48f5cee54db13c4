"""Configuration dataclasses, JSON5 loading and environment precedence."""

import pytest

from errors import DomainError
from fracvar_config import (DEFAULTS, ENV_OUT_DIR, ENV_SEED, ENV_THREADS, BatteryConfig, ExperimentConfig,
                            load_config, resolve_out_dir, resolve_seed, resolve_threads)


@pytest.fixture
def clean_env(monkeypatch):
    for name in (ENV_SEED, ENV_THREADS, ENV_OUT_DIR):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


class TestBatteryConfig:
    def test_defaults(self):
        config = BatteryConfig()
        assert config.rel_tol == DEFAULTS['rel_tol']
        assert config.min_paths == 1000
        assert config.qv_times == (0.25, 0.5, 1.0)

    def test_lists_become_tuples(self):
        config = BatteryConfig.from_dict({'qv_times': [0.5, 1.0], 'sigma_band': 3.0})
        assert config.qv_times == (0.5, 1.0)
        assert config.to_dict()['qv_times'] == [0.5, 1.0]
        assert BatteryConfig.from_dict(config.to_dict()) == config

    def test_unknown_keys(self):
        with pytest.raises(DomainError, match='Unknown BatteryConfig keys: bogus'):
            BatteryConfig.from_dict({'bogus': 1})

    def test_none_is_default(self):
        assert BatteryConfig.from_dict(None) == BatteryConfig()


class TestExperimentConfig:
    def test_needs_name(self):
        with pytest.raises(DomainError, match="needs a 'name'"):
            ExperimentConfig.from_dict({'n': 64})

    def test_unknown_keys(self):
        with pytest.raises(DomainError, match='Unknown ExperimentConfig keys'):
            ExperimentConfig.from_dict({'name': 'x', 'paths': 3})

    def test_schedule_is_integer(self):
        config = ExperimentConfig.from_dict({'name': 'x', 'schedule': [8.0, 16.0]})
        assert config.schedule == [8, 16]
        assert all(isinstance(n, int) for n in config.schedule)

    def test_param_lookup(self):
        config = ExperimentConfig(name='x', params={'alpha': 0.1})
        assert config.param('alpha', 0.2) == 0.1
        assert config.param('hurst', 0.7) == 0.7

    def test_battery_inherits_tolerances(self):
        config = ExperimentConfig(name='x', rel_tol=0.2, sigma_band=3.0, threads=4,
                                  battery={'min_paths': 10})
        battery = config.battery_config()
        assert (battery.rel_tol, battery.sigma_band, battery.threads, battery.min_paths) == (0.2, 3.0, 4, 10)

    def test_battery_section_wins(self):
        config = ExperimentConfig(name='x', rel_tol=0.2, battery={'rel_tol': 0.05})
        assert config.battery_config().rel_tol == 0.05


class TestLoadConfig:
    def test_json5(self, tmp_path):
        path = tmp_path / 'exp.json5'
        path.write_text('{\n  // comment\n  experiment: {name: "x", n: 64,},\n}\n', encoding='utf-8')
        assert load_config(str(path)) == {'experiment': {'name': 'x', 'n': 64}}

    def test_missing(self, tmp_path):
        with pytest.raises(DomainError, match='not found'):
            load_config(str(tmp_path / 'nope.json5'))

    def test_root_must_be_object(self, tmp_path):
        path = tmp_path / 'list.json5'
        path.write_text('[1, 2]', encoding='utf-8')
        with pytest.raises(DomainError, match='object'):
            load_config(str(path))


class TestEnvironment:
    def test_seed_default(self, clean_env):
        assert resolve_seed(None) == DEFAULTS['seed']
        assert resolve_seed(5) == 5

    def test_env_seed_beats_command_line(self, clean_env):
        clean_env.setenv(ENV_SEED, '42')
        assert resolve_seed(5) == 42

    def test_blank_env_seed_is_ignored(self, clean_env):
        clean_env.setenv(ENV_SEED, '  ')
        assert resolve_seed(5) == 5

    def test_bad_env_seed(self, clean_env):
        clean_env.setenv(ENV_SEED, 'abc')
        with pytest.raises(DomainError, match=ENV_SEED):
            resolve_seed(None)

    def test_threads(self, clean_env):
        assert resolve_threads(None) == 1
        clean_env.setenv(ENV_THREADS, '3')
        assert resolve_threads(None) == 3
        assert resolve_threads(2) == 2
        with pytest.raises(DomainError, match='threads'):
            resolve_threads(0)

    def test_out_dir(self, clean_env, tmp_path):
        assert str(resolve_out_dir(None)) == DEFAULTS['out_dir']
        clean_env.setenv(ENV_OUT_DIR, str(tmp_path))
        assert resolve_out_dir(None) == tmp_path
        assert str(resolve_out_dir('given')) == 'given'
