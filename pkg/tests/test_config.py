import json

import pytest

from com.mhire.dlm.common.errors import ConfigError
from com.mhire.dlm.config.config import Config, RunSettings, load_manifest_options, load_settings


def test_defaults():
    settings = load_settings()
    assert settings == RunSettings()
    assert (settings.n_arms, settings.budget, settings.discount) == (48, 5, 0.9)
    assert settings.loop.iterations == 2
    assert settings.protocol.n_seeds == 50


def test_flags_override_file_which_overrides_defaults(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"n_arms": 20, "budget": 4, "loop": {"iterations": 3, "train": {"epochs": 7}}}))
    settings = load_settings(path, {"budget": 2, "loop": {"iterations": None, "seed": 9}})
    assert settings.n_arms == 20
    assert settings.budget == 2
    assert settings.loop.iterations == 3
    assert settings.loop.seed == 9
    assert settings.loop.train.epochs == 7
    assert settings.loop.train.steps_per_epoch == 100


def test_manifest_is_accepted_as_config(tmp_path):
    dumped = RunSettings(n_arms=9, budget=1).model_dump(mode="json")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"run_id": "abc", "config": {"settings": dumped, "options": {}}}))
    assert load_settings(path) == RunSettings(n_arms=9, budget=1)


def test_manifest_options_keyed_by_command(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"run_id": "abc", "command": "run",
                                "config": {"settings": {}, "options": {"task": 3, "instance": None}}}))
    assert load_manifest_options(path) == {"run": {"task": 3}}


def test_plain_settings_have_no_manifest_options(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"n_arms": 20}))
    assert load_manifest_options(path) == {}
    assert load_manifest_options(None) == {}


@pytest.mark.parametrize("content", ["{broken", json.dumps({"budget": 0}), json.dumps({"n_arms": 2, "budget": 3}),
                                     json.dumps({"loop": {"train": {"epsilon_start": 0.01, "epsilon_end": 0.1}}})])
def test_invalid_settings_are_config_errors(tmp_path, content):
    path = tmp_path / "settings.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_settings(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "absent.json")


def test_environment_is_read_once_per_reset(monkeypatch):
    monkeypatch.setenv("DLM_WORKERS", "3")
    Config.reset()
    assert Config().workers == 3
    monkeypatch.setenv("DLM_WORKERS", "5")
    assert Config().workers == 3
    Config.reset()
    assert Config().workers == 5
    assert Config() is Config()
