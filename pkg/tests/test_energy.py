import io
from pathlib import Path

import pytest

from config.settings import DATA_DIR
from core.energy.calibration import (
    DEFAULT_CALIBRATION,
    CalibrationSet,
    EsbCalibration,
    Protocol,
)
from core.energy.power import (
    PowerProfile,
    PowerState,
    PowerTrace,
    average_power,
    excess_energy,
    integrate,
)
from core.utils.errors import CoverageError, SimError
from repositories.calibration import CalibrationRepository


@pytest.fixture
def profile():
    return DEFAULT_CALIBRATION.profile(Protocol.ESB)


def test_single_dwell_energy(profile):
    trace = PowerTrace(profile)
    trace.dwell(0, PowerState.RADIO_TX, 100)
    trace.enter(100, PowerState.IDLE_STANDBY)
    trace.close(200)
    assert integrate(trace, 0, 200) == pytest.approx(3.5 + 0.115)
    assert average_power(trace, 0, 100) == pytest.approx(35.0)
    assert trace.peak_power_mw() == pytest.approx(35.0)


def test_energy_is_additive_over_windows(profile):
    trace = PowerTrace(profile)
    t = trace.sequence(0, [(PowerState.CPU_ACTIVE, 111), (PowerState.RADIO_RAMP, 20), (PowerState.RADIO_TX, 509),
                           (PowerState.RADIO_RX, 61), (PowerState.CPU_ACTIVE, 579)])
    trace.enter(t, PowerState.IDLE_STANDBY)
    trace.close(t + 1000)
    whole = trace.integrate_fj(0, t + 1000)
    for cut in (1, 111, 300, 640, 701, t, t + 17):
        assert trace.integrate_fj(0, cut) + trace.integrate_fj(cut, t + 1000) == whole


def test_overlay_adds_above_idle_floor(profile):
    trace = PowerTrace(profile)
    trace.overlay(20, PowerState.CPU_ACTIVE, 50)
    trace.close(100)
    assert integrate(trace, 0, 100) == pytest.approx(0.115 + 0.85 * 50 / 1000)
    assert trace.peak_power_mw() == pytest.approx(2.0)


def test_concurrent_overlays_stack(profile):
    trace = PowerTrace(profile)
    trace.overlay(0, PowerState.CPU_ACTIVE, 10)
    trace.overlay(0, PowerState.CPU_ACTIVE, 10)
    trace.close(10)
    assert average_power(trace, 0, 10) == pytest.approx(1.15 + 2 * 0.85)


def test_window_outside_coverage(profile):
    trace = PowerTrace(profile)
    trace.close(50)
    with pytest.raises(CoverageError):
        integrate(trace, 0, 60)
    with pytest.raises(CoverageError):
        integrate(trace, 30, 20)
    assert integrate(trace, 25, 25) == 0


def test_segments_must_be_time_ordered(profile):
    trace = PowerTrace(profile)
    trace.enter(100, PowerState.CPU_ACTIVE)
    with pytest.raises(SimError):
        trace.enter(50, PowerState.RADIO_TX)


def test_phase_energies_and_bounds(profile):
    trace = PowerTrace(profile, phase="Init")
    trace.dwell(0, PowerState.CPU_ACTIVE, 1000)
    trace.set_phase("Packet", at=1000)
    trace.dwell(1000, PowerState.RADIO_TX, 100)
    trace.close(1100)
    energies = trace.phase_energies_uj()
    assert energies["Init"] == pytest.approx(2.0)
    assert energies["Packet"] == pytest.approx(3.5)
    assert sum(energies.values()) == pytest.approx(integrate(trace, 0, 1100))
    assert trace.phase_bounds("Packet") == (1000, 1100)
    assert trace.phase_bounds("Missing") is None


def test_excess_energy_removes_idle_floor(profile):
    trace = PowerTrace(profile)
    trace.dwell(0, PowerState.RADIO_TX, 100)
    trace.enter(100, PowerState.IDLE_STANDBY)
    trace.close(300)
    assert excess_energy(trace, 0, 300) == pytest.approx((35.0 - 1.15) * 100 / 1000)
    assert excess_energy(trace, 0, 300, floor_mw=0.004) == pytest.approx(
        integrate(trace, 0, 300) - 0.004 * 300 / 1000)


def test_trace_csv_export(profile):
    trace = PowerTrace(profile)
    trace.dwell(0, PowerState.RADIO_TX, 10)
    trace.enter(10, PowerState.IDLE_STANDBY)
    trace.close(20)
    out = io.StringIO()
    trace.to_csv(out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "t_us,state,power_mw,phase"
    assert lines[1].startswith("0,RadioTx,35.000000")
    assert lines[-1] == "20,End,,"


def test_profile_order_is_enforced():
    with pytest.raises(SimError):
        PowerProfile(system_off_mw=0.004, idle_standby_mw=3.0, cpu_active_mw=2.0, radio_ramp_mw=24.0,
                     radio_tx_mw=35.0, radio_rx_mw=6.0, sensor_read_mw=1.5)


def test_calibration_profiles_pick_protocol_floor():
    assert DEFAULT_CALIBRATION.profile(Protocol.ESB).idle_standby_mw == 1.15
    assert DEFAULT_CALIBRATION.profile(Protocol.BLE).idle_standby_mw == 0.9569
    assert DEFAULT_CALIBRATION.sensor_profile().idle_standby_mw == 0.49


def test_calibration_hash_tracks_content():
    h = DEFAULT_CALIBRATION.content_hash()
    assert h == CalibrationSet().content_hash()
    changed = DEFAULT_CALIBRATION.with_value("esb.post_cpu_us", 600.4)
    assert changed.esb.post_cpu_us == 600
    assert changed.content_hash() != h
    assert changed.get("esb.post_cpu_us") == 600
    assert CalibrationSet.from_dict(changed.to_dict()) == changed


def test_calibration_rejects_bad_values():
    with pytest.raises(SimError):
        EsbCalibration(post_cpu_us=0)
    with pytest.raises(SimError):
        DEFAULT_CALIBRATION.with_value("esb.no_such_field", 1)
    with pytest.raises(SimError):
        DEFAULT_CALIBRATION.get("radio.idle_mw")
    with pytest.raises(SimError):
        CalibrationSet.from_dict({"esb": {"idle_mw": 1.0, "bogus": 1}})
    with pytest.raises(SimError):
        CalibrationSet.from_dict({"extra_section": {}})


def test_shipped_calibration_matches_builtin_constants():
    calib = CalibrationRepository(DATA_DIR).load("calibration.json")
    assert calib == DEFAULT_CALIBRATION
    assert calib.content_hash() == DEFAULT_CALIBRATION.content_hash()


def test_calibration_repository_defaults(tmp_path: Path):
    repo = CalibrationRepository(tmp_path)
    assert repo.load_or_default("missing.json") is DEFAULT_CALIBRATION
    fitted = DEFAULT_CALIBRATION.with_value("ble.pre_cpu_us", 280)
    repo.save(fitted, "fitted.json")
    assert repo.load_or_default("fitted.json") == fitted
    assert repo.load_or_default("fitted.json", uncalibrated=True) is DEFAULT_CALIBRATION
