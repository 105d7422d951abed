import pytest

from core.node.fifo import FifoBuffer, StepOutcome
from core.node.node import CommMode, NodeScenario, run_scenario, validate
from core.utils.errors import ConfigurationRejected, SimError


def test_fifo_threshold_and_overflow():
    fifo = FifoBuffer(threshold=2, depth=3)
    assert fifo.push(1) is StepOutcome.BUFFERED
    assert fifo.push(2) is StepOutcome.INTERRUPT_RAISED
    assert fifo.interrupt_asserted
    assert fifo.push(3) is StepOutcome.BUFFERED
    assert fifo.push(4) is StepOutcome.OVERFLOWED
    assert fifo.overflow_events == 1
    assert fifo.drain(limit=2) == [1, 2]
    assert fifo.drain() == [3]
    assert not fifo.interrupt_asserted
    assert fifo.payload_bytes(4) == 12


def test_fifo_rejects_bad_threshold():
    with pytest.raises(SimError):
        FifoBuffer(threshold=0)
    with pytest.raises(SimError):
        FifoBuffer(threshold=33)


@pytest.mark.parametrize("threshold", [1, 2, 32, 33])
def test_onoff_feasibility_window(threshold):
    scenario = NodeScenario(CommMode.ESB_ONOFF, threshold)
    with pytest.raises(ConfigurationRejected):
        validate(scenario)


@pytest.mark.parametrize("threshold", [3, 16, 31])
def test_onoff_accepted_inside_window(threshold):
    validate(NodeScenario(CommMode.ESB_ONOFF, threshold))


def test_ble_onoff_is_always_rejected():
    with pytest.raises(ConfigurationRejected):
        validate(NodeScenario(CommMode.BLE_ONOFF, 16))


def test_rejected_configs_need_force():
    with pytest.raises(ConfigurationRejected):
        run_scenario(NodeScenario(CommMode.ESB_ONOFF, 2, duration_s=1.0))


@pytest.mark.parametrize("mode, threshold", [
    (CommMode.ESB_ONOFF, 3),
    (CommMode.ESB_ONOFF, 31),
    (CommMode.ESB_STANDBY, 1),
    (CommMode.ESB_STANDBY, 32),
    (CommMode.BLE_CONNECTION, 1),
    (CommMode.BLE_CONNECTION, 32),
])
def test_valid_configs_lose_nothing(mode, threshold):
    result = run_scenario(NodeScenario(mode, threshold, duration_s=5.0))
    assert result.overflow_events == 0
    assert not result.stalled
    assert result.completeness == 1.0
    assert result.samples_produced == 640
    assert result.samples_delivered + result.samples_in_flight == result.samples_produced


def test_onoff_below_window_stalls_and_overflows():
    result = run_scenario(NodeScenario(CommMode.ESB_ONOFF, 2, duration_s=5.0), force=True)
    assert result.stalled
    assert result.overflow_events > 0


def test_onoff_above_window_overflows_during_wake():
    result = run_scenario(NodeScenario(CommMode.ESB_ONOFF, 32, duration_s=5.0), force=True)
    assert result.overflow_events > 0


@pytest.mark.parametrize("mode, threshold, expected", [
    (CommMode.BLE_CONNECTION, 1, 6.6),
    (CommMode.BLE_CONNECTION, 32, 2.1),
    (CommMode.ESB_STANDBY, 1, 3.8),
    (CommMode.ESB_STANDBY, 32, 1.3),
    (CommMode.ESB_ONOFF, 31, 0.5),
])
def test_mcu_power_endpoints(mode, threshold, expected):
    result = run_scenario(NodeScenario(mode, threshold, duration_s=20.0))
    assert result.mcu_avg_mw == pytest.approx(expected, rel=0.2)
    assert result.sensor_avg_mw == pytest.approx(0.5, rel=0.2)


def test_power_falls_with_threshold():
    powers = [run_scenario(NodeScenario(CommMode.ESB_STANDBY, t, duration_s=5.0)).mcu_avg_mw for t in (1, 4, 16, 32)]
    assert powers == sorted(powers, reverse=True)


def test_onoff_beats_the_connection():
    onoff = run_scenario(NodeScenario(CommMode.ESB_ONOFF, 31, duration_s=20.0))
    ble = run_scenario(NodeScenario(CommMode.BLE_CONNECTION, 32, duration_s=20.0))
    assert onoff.mcu_avg_mw <= 0.45 * ble.mcu_avg_mw


def test_mode_names():
    assert CommMode.parse("esb-onoff") is CommMode.ESB_ONOFF
    assert CommMode.parse("BleConnection") is CommMode.BLE_CONNECTION
    with pytest.raises(SimError):
        CommMode.parse("zigbee")
