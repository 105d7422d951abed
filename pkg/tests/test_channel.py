import pytest

from core.phy.channel import (
    BLE_DATA_OVERHEAD,
    BLE_EMPTY_OVERHEAD,
    ESB_OVERHEAD,
    ChannelState,
    Delivery,
    Frame,
    FrameKind,
    FrameOverhead,
    PerCurve,
    PhyMode,
    deliver,
    on_air_time,
    packet_error_prob,
)
from core.sim.rng import RngStream
from core.utils.errors import PayloadTooLarge, SimError


@pytest.mark.parametrize("phy, payload, overhead, expected", [
    (PhyMode.ESB_4M, 252, ESB_OVERHEAD, 525),
    (PhyMode.ESB_4M, 244, ESB_OVERHEAD, 509),
    (PhyMode.ESB_4M, 2, ESB_OVERHEAD, 25),
    (PhyMode.ESB_4M, 0, ESB_OVERHEAD, 21),
    (PhyMode.BLE_2M, 244, BLE_DATA_OVERHEAD, 1048),
    (PhyMode.BLE_2M, 0, BLE_EMPTY_OVERHEAD, 44),
])
def test_on_air_time(phy, payload, overhead, expected):
    assert on_air_time(phy, payload, overhead) == expected


def test_air_time_grows_with_payload_and_shrinks_with_rate():
    times = [on_air_time(PhyMode.ESB_4M, n, ESB_OVERHEAD) for n in range(253)]
    assert times == sorted(times)
    assert on_air_time(PhyMode.ESB_1M, 100, ESB_OVERHEAD) > on_air_time(PhyMode.ESB_2M, 100, ESB_OVERHEAD)


def test_payload_limits_per_phy():
    with pytest.raises(PayloadTooLarge):
        on_air_time(PhyMode.BLE_2M, 245, BLE_DATA_OVERHEAD)
    assert on_air_time(PhyMode.ESB_4M, 252, ESB_OVERHEAD) > 0
    with pytest.raises(PayloadTooLarge):
        on_air_time(PhyMode.ESB_4M, 253, ESB_OVERHEAD)


def test_negative_overhead_is_rejected():
    with pytest.raises(SimError):
        FrameOverhead(-1, 32, 16, 24)


def test_phy_labels():
    assert PhyMode.from_label("esb-4m") is PhyMode.ESB_4M
    assert PhyMode.from_label("BLE_2M") is PhyMode.BLE_2M
    with pytest.raises(SimError):
        PhyMode.from_label("ESB-8M")


def test_per_curve_shape():
    curve = {PhyMode.ESB_4M: PerCurve(-80.0, 2.0)}
    assert packet_error_prob(-80.0, PhyMode.ESB_4M, curve) == pytest.approx(0.5)
    assert packet_error_prob(-40.0, PhyMode.ESB_4M, curve) < 1e-6
    assert packet_error_prob(-110.0, PhyMode.ESB_4M, curve) > 0.999
    with pytest.raises(SimError):
        packet_error_prob(5.0, PhyMode.ESB_4M, curve)


def test_esb_4m_degrades_before_ble_2m():
    for rssi in (-85.0, -80.0, -75.0):
        assert packet_error_prob(rssi, PhyMode.ESB_4M) > packet_error_prob(rssi, PhyMode.BLE_2M)


def test_channel_rejects_bad_inputs():
    rng = RngStream(1, "channel")
    with pytest.raises(SimError):
        ChannelState(-130.0, rng)
    with pytest.raises(SimError):
        ChannelState(-40.0, rng, per_override={FrameKind.DATA: 1.5})


def test_override_forces_loss_and_counts_frames():
    channel = ChannelState(-40.0, RngStream(1, "channel"), per_override={FrameKind.DATA: 1.0}, record=True)
    data = Frame(FrameKind.DATA, PhyMode.ESB_4M, 10, ESB_OVERHEAD)
    ack = Frame(FrameKind.ACK, PhyMode.ESB_4M, 0, ESB_OVERHEAD)
    assert deliver(data, channel, at=5) is Delivery.LOST
    assert deliver(ack, channel, at=6) is Delivery.DELIVERED
    assert channel.lost_count(FrameKind.DATA) == 1
    assert channel.delivered_count(FrameKind.ACK) == 1
    assert channel.log == [("data", "ESB-4M", 5, "lost"), ("ack", "ESB-4M", 6, "delivered")]


@pytest.mark.slow
def test_loss_rate_matches_per():
    channel = ChannelState(-40.0, RngStream(9, "channel"), per_override={FrameKind.DATA: 0.3})
    frame = Frame(FrameKind.DATA, PhyMode.ESB_4M, 32, ESB_OVERHEAD)
    n = 100_000
    lost = sum(deliver(frame, channel) is Delivery.LOST for _ in range(n))
    assert lost / n == pytest.approx(0.3, abs=0.01)
