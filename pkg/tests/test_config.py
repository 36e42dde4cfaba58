"""Configuration dataclasses and the JSON document layer."""

import json
import math

import pytest

from core.config import SCHEMES, ConfigDocument, ExperimentConfig, SystemConfig
from utils.error_handling import ConfigurationError, ValidationError


def test_defaults_match_simulation_setup():
    config = SystemConfig()
    assert (config.n_bs, config.antennas_per_bs, config.n_users, config.n_reflect) == (4, 4, 6, 15)
    assert config.bandwidth_hz == 10e6
    assert config.decode_group_max == 2
    assert config.n_randomizations == 25
    assert config.penalty_tradeoff == 0.9
    assert config.qos_min_bps == (4e6,) * 6
    assert config.n_tx == 16


def test_noise_power_is_minus_99_dbm():
    assert math.isclose(SystemConfig().noise_power_w, 1.2589254117941673e-13, rel_tol=1e-9)


def test_per_user_values_broadcast():
    config = SystemConfig(n_users=3, qos_min_bps=1e6, power_weights=(1.0, 2.0, 3.0))
    assert config.qos_min_bps == (1e6, 1e6, 1e6)
    assert list(config.weights_vector()) == [1.0, 2.0, 3.0]


@pytest.mark.parametrize("changes", [
    {'n_users': 0},
    {'penalty_tradeoff': 0.0},
    {'penalty_tradeoff': 1.5},
    {'sca_step': 0.0},
    {'stop_epsilon': 0.0},
    {'n_randomizations': 0},
    {'power_weights': (0.0,)},
    {'qos_min_bps': (-1.0,)},
    {'n_reflect': 2.5},
])
def test_invalid_system_values_rejected(changes):
    with pytest.raises(ValidationError):
        SystemConfig(**changes)


def test_wrong_length_per_user_list_rejected():
    with pytest.raises(ValidationError):
        SystemConfig(n_users=3, qos_min_bps=(1e6, 2e6))


def test_penalty_tradeoff_one_allowed():
    assert SystemConfig(penalty_tradeoff=1.0).penalty_tradeoff == 1.0


def test_experiment_preconditions():
    with pytest.raises(ValidationError):
        ExperimentConfig(sweep_qos_bps=())
    with pytest.raises(ValidationError):
        ExperimentConfig(drops=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(schemes=())
    with pytest.raises(ValidationError):
        ExperimentConfig(schemes=('rs_irs', 'noma'))


def test_experiment_dict_round_trip():
    config = ExperimentConfig(system=SystemConfig(n_users=2), sweep_qos_bps=(1e6, 2e6),
                              drops=3, schemes=('tin_noirs',), seed=5)
    restored = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert restored == config


def test_document_defaults_without_file():
    document = ConfigDocument()
    assert document.get('drops') == 20
    assert document.get('system.n_users') == 6
    assert document.get('system.missing', 'fallback') == 'fallback'
    assert tuple(document.to_experiment_config().schemes) == SCHEMES


def test_document_merges_file_over_defaults(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({'drops': 2, 'system': {'n_users': 2, 'n_reflect': 3}}))
    config = ConfigDocument(path).to_experiment_config()
    assert config.drops == 2
    assert config.system.n_users == 2
    assert config.system.n_reflect == 3
    assert config.system.n_bs == 4


def test_document_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({'system': {'n_user': 2}}))
    with pytest.raises(ConfigurationError):
        ConfigDocument(path)


def test_document_set_and_save(tmp_path):
    document = ConfigDocument()
    document.set('system.n_reflect', 8)
    with pytest.raises(ConfigurationError):
        document.set('system.reflectors', 8)
    out = tmp_path / "saved.json"
    document.save(out)
    assert ConfigDocument(out).get('system.n_reflect') == 8


def test_document_invalid_value_is_configuration_error():
    document = ConfigDocument()
    document.set('drops', 0)
    with pytest.raises(ConfigurationError):
        document.to_experiment_config()


def test_document_follows_user_count(tmp_path):
    path = tmp_path / "three.json"
    path.write_text(json.dumps({'system': {'n_users': 3}}))
    system = ConfigDocument(path).to_experiment_config().system
    assert system.n_users == 3
    assert system.qos_min_bps == (4e6, 4e6, 4e6)
    assert system.power_weights == (1.0, 1.0, 1.0)

    path.write_text(json.dumps({'system': {'n_users': 2, 'qos_min_bps': [1e6, 3e6]}}))
    assert ConfigDocument(path).to_experiment_config().system.qos_min_bps == (1e6, 3e6)

    path.write_text(json.dumps({'system': {'n_users': 2, 'qos_min_bps': [1e6, 2e6, 3e6]}}))
    with pytest.raises(ConfigurationError):
        ConfigDocument(path).to_experiment_config()
