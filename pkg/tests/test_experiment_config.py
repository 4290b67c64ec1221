"""
Test Experiment Config and Settings: validation messages and overrides
======================================================================
"""

import pytest

from utils.errors import ConfigError
from utils.experiment_config import load_experiment_config, validate_config
from utils.settings import load_settings


def test_valid_config(example_config):
    cfg = validate_config(example_config)
    assert cfg.N == 4 and cfg.J == 2
    assert cfg.allocation_list() == [(1, 2), (2, 1), (1, 1)]
    assert cfg.location.to_location_matrix().label() == "C{1,2}|1{1}|2{}"
    assert cfg.ensemble_model().cap_common == 4


def test_sweep_expands_after_explicit_allocations(example_config):
    example_config['sweep'] = {'low': [1, 1], 'high': [2, 2]}
    cfg = validate_config(example_config)
    assert cfg.allocation_list() == [(1, 2), (2, 1), (1, 1), (2, 2)]


def test_overrides(example_config):
    cfg = validate_config(example_config).with_overrides(trials=7, base_seed=None, mode='unknown')
    assert cfg.trials == 7
    assert cfg.base_seed == 11
    assert cfg.mode == 'unknown'


@pytest.mark.parametrize("change, fragment", [
    ({'trials': 0}, "trials"),
    ({'allocations': [[1, 2, 3]]}, "expected J=2"),
    ({'allocations': []}, "at least one allocation"),
    ({'generator': {'N': 4, 'J': 2}}, "exactly one"),
    ({'mode': 'sideways'}, "mode"),
    ({'unexpected': 1}, "unexpected"),
    ({'model': {'family': 'full_common', 'cap_common': 2, 'cap_innovation': 1}}, "cap_common"),
])
def test_invalid_configs(example_config, change, fragment):
    example_config.update(change)
    with pytest.raises(ConfigError) as excinfo:
        validate_config(example_config)
    assert fragment in str(excinfo.value)


def test_json_errors_report_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "trials": 3,\n  oops\n}', encoding='utf-8')
    with pytest.raises(ConfigError) as excinfo:
        load_experiment_config(str(path))
    assert f"{path}:3:" in str(excinfo.value)

    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / "missing.json"))


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv('DCS_RECOVERY_TOL', '1e-6')
    monkeypatch.setenv('DCS_VERBOSE', 'yes')
    monkeypatch.setenv('DCS_OUTPUT_FORMAT', 'json')
    settings = load_settings()
    assert settings.recovery_tol == 1e-6
    assert settings.verbose is True
    assert settings.output_format == 'json'

    monkeypatch.setenv('DCS_FEASIBILITY_TOL', '-1')
    with pytest.raises(ConfigError) as excinfo:
        load_settings()
    assert "feasibility_tol" in str(excinfo.value)
