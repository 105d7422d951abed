import numpy as np
import pytest

from core.energy.calibration import Protocol
from core.phy.channel import ChannelState
from core.protocols.warmup import warmup
from core.sim.rng import RngFactory
from core.utils.errors import SimError


def _ble(seed, calib):
    rngs = RngFactory(seed)
    return warmup(Protocol.BLE, ChannelState(-40.0, rngs.stream("channel")), rngs.stream("advertising"), calib)


def test_esb_warmup(make_channel, calib):
    result = warmup(Protocol.ESB, make_channel(), calib=calib)
    assert result.duration_us == 22410
    assert result.energy_uj == pytest.approx(112.16, rel=0.01)
    assert set(result.phase_energies_uj) == {"Init", "Packet"}
    assert sum(result.phase_energies_uj.values()) == pytest.approx(result.energy_uj, rel=1e-3)


def test_ble_warmup_matches_measurements_on_average(calib):
    results = [_ble(seed, calib) for seed in range(1, 21)]
    assert np.mean([r.duration_us for r in results]) == pytest.approx(218960, rel=0.15)
    assert np.mean([r.energy_uj for r in results]) == pytest.approx(1226.55, rel=0.15)
    phases = results[0].phase_energies_uj
    assert set(phases) == {"Init", "Advertising", "Connection", "Packet"}
    assert sum(phases.values()) == pytest.approx(results[0].energy_uj, rel=1e-3)
    assert np.mean([r.phase_energies_uj["Advertising"] for r in results]) == pytest.approx(519.37, rel=0.15)
    assert np.mean([r.phase_energies_uj["Connection"] for r in results]) == pytest.approx(126.95, rel=0.15)


def test_ble_costs_an_order_of_magnitude_more(make_channel, calib):
    esb = warmup(Protocol.ESB, make_channel(), calib=calib)
    ble = _ble(1, calib)
    assert ble.duration_us / esb.duration_us >= 9
    assert ble.energy_uj / esb.energy_uj >= 9
    assert ble.adv_events >= 1


def test_ble_warmup_is_reproducible(calib):
    assert _ble(9, calib) == _ble(9, calib)


def test_ble_warmup_needs_a_random_stream(make_channel, calib):
    with pytest.raises(SimError):
        warmup(Protocol.BLE, make_channel(), calib=calib)
