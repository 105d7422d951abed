import pytest

from core.energy.calibration import DEFAULT_CALIBRATION
from core.phy.channel import ChannelState
from core.protocols.ble import BleConfig
from core.protocols.esb import EsbConfig
from core.services.scenario import ScenarioContext
from core.sim.rng import RngFactory


@pytest.fixture
def calib():
    return DEFAULT_CALIBRATION


@pytest.fixture
def rngs():
    return RngFactory(1)


@pytest.fixture
def channel(rngs):
    """Strong, effectively lossless link"""
    return ChannelState(-40.0, rngs.stream("channel"))


@pytest.fixture
def make_channel():
    def _make(rssi_dbm=-40.0, seed=1, per_override=None):
        return ChannelState(rssi_dbm, RngFactory(seed).stream("channel"), per_override=per_override or {})
    return _make


@pytest.fixture
def esb_cfg():
    return EsbConfig()


@pytest.fixture
def ble_cfg():
    return BleConfig()


@pytest.fixture
def small_ctx():
    """Reduced sweeps so whole experiments finish quickly"""
    ctx = ScenarioContext()
    ctx.payloads = [2, 244]
    ctx.rate_fractions = [0.0, 0.5]
    ctx.rssi_sweep = [-90.0, -40.0]
    ctx.ack_sizes = [2, 252]
    ctx.thresholds = [2, 3, 31]
    ctx.node_duration_s = 3.0
    ctx.stream_duration_s = 0.1
    return ctx
