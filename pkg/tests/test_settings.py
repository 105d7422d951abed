import json

import pytest

from config.settings import PROJECT_ROOT, ExperimentDefaults, LoggingConfig, RuntimeConfig, Settings
from core.energy.calibration import DEFAULT_CALIBRATION
from core.node.node import CommMode
from core.phy.channel import PhyMode
from core.services.scenario import build_context, load_scenario_file
from core.utils.errors import SpecError


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("SIM_WORKERS", "2")
    monkeypatch.setenv("SIM_LOG_LEVEL", "debug")
    monkeypatch.setenv("SIM_EXP_STOCHASTIC_REPS", "7")
    settings = Settings()
    assert settings.runtime.workers == 2
    assert settings.logging.level == "DEBUG"
    assert settings.experiments.stochastic_reps == 7
    assert settings.validate_all() == []


@pytest.mark.parametrize("section, var, value", [
    (RuntimeConfig, "SIM_WORKERS", "0"),
    (RuntimeConfig, "SIM_DEFAULT_SEED", "-1"),
    (LoggingConfig, "SIM_LOG_LEVEL", "LOUD"),
    (ExperimentDefaults, "SIM_EXP_SWEEP_REPS", "0"),
    (ExperimentDefaults, "SIM_EXP_NODE_DURATION_S", "0"),
])
def test_invalid_values_are_rejected(monkeypatch, section, var, value):
    monkeypatch.setenv(var, value)
    with pytest.raises(ValueError):
        section()


def test_missing_target_table_is_reported(monkeypatch, tmp_path):
    monkeypatch.setenv("SIM_TARGETS", str(tmp_path / "none.json"))
    problems = Settings().validate_all()
    assert any("Target table not found" in p for p in problems)


def test_example_scenario_builds():
    scenario = load_scenario_file(str(PROJECT_ROOT / "data" / "scenario.example.json"))
    ctx, calib = build_context(scenario, DEFAULT_CALIBRATION)
    assert ctx.esb.ard_us == 600
    assert ctx.esb.arc == 3
    assert ctx.ble.tx_queue_depth == 6
    assert ctx.per_curves[PhyMode.ESB_4M].rssi50_dbm == -80
    assert ctx.thresholds == [1, 2, 3, 8, 16, 31, 32]
    assert ctx.node_duration_s == 30
    assert calib is DEFAULT_CALIBRATION


def _scenario(tmp_path, content):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(content))
    return str(path)


def test_scenario_overrides_calibrated_guard(tmp_path):
    scenario = load_scenario_file(_scenario(tmp_path, {"ble": {"ce_guard_us": 1500}, "node": {"mode": "EsbOnOff"}}))
    ctx, calib = build_context(scenario, DEFAULT_CALIBRATION)
    assert calib.get("ble.ce_guard_us") == 1500
    assert ctx.modes == [CommMode.ESB_ONOFF]


@pytest.mark.parametrize("content", [
    {"esb": {"retries": 3}},
    {"esb": {"arc": 16}},
    {"ble": {"conn_interval_us": 5000}},
    {"node": {"threshold": 33}},
    {"phy": {"per_curves": {"ESB-4M": {"rssi50_dbm": -80, "width_db": 0}}}},
])
def test_bad_scenarios_raise(tmp_path, content):
    with pytest.raises(SpecError):
        load_scenario_file(_scenario(tmp_path, content))


def test_missing_and_invalid_scenario_files(tmp_path):
    with pytest.raises(SpecError):
        load_scenario_file(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecError):
        load_scenario_file(str(bad))
    assert load_scenario_file(None).rssi_dbm is None


def test_scenario_rejects_bad_rate_fractions(tmp_path):
    scenario = load_scenario_file(_scenario(tmp_path, {"sweep": {"rate_fractions": [0.5, 1.5]}}))
    with pytest.raises(SpecError):
        build_context(scenario, DEFAULT_CALIBRATION)


def test_default_node_run_length(monkeypatch):
    monkeypatch.delenv("SIM_EXP_NODE_DURATION_S", raising=False)
    defaults = ExperimentDefaults()
    assert defaults.node_duration_s == 30
    # 128 Hz sampler: long enough for dozens of 32-word bursts
    assert defaults.node_duration_s * 128 / 32 >= 100
