import numpy as np
import pytest

from core.energy.calibration import Protocol
from core.energy.power import PowerTrace
from core.phy.channel import ChannelState, FrameKind
from core.protocols.ble import (
    BleConfig,
    BleConnection,
    LinkPhase,
    QueuedPdu,
    Role,
    ble_latency,
    ble_notify,
    ble_stream,
    connect,
)
from core.protocols.packet import ble_packet_event
from core.services.reporting import fit_slope
from core.sim.engine import Simulator
from core.sim.rng import RngFactory, RngStream
from core.utils.errors import PayloadTooLarge, SimError


def test_single_packet_event(ble_cfg, make_channel, calib):
    event = ble_packet_event(244, ble_cfg, make_channel(), calib)
    assert event.acked
    assert event.duration_us == 2600
    assert event.energy_uj == pytest.approx(38.16, rel=0.05)
    assert event.peak_power_mw == pytest.approx(35.0)


def test_latency_depends_on_connection_phase(ble_cfg, calib):
    values = []
    for seed in range(1, 101):
        rngs = RngFactory(seed)
        channel = ChannelState(-40.0, rngs.stream("channel"))
        values.append(ble_latency(244, ble_cfg, channel, rngs.stream("send-phase"), calib.ble))
    air_and_rx = ble_cfg.data_air(244) + calib.ble.rx_processing_us
    assert min(values) >= calib.ble.stack_latency_us + air_and_rx
    assert max(values) < calib.ble.stack_latency_us + ble_cfg.conn_interval_us + air_and_rx
    assert np.mean(values) == pytest.approx(5000, rel=0.2)
    assert np.std(values) > 1700


def test_latency_is_reproducible_per_seed(ble_cfg, calib):
    def one(seed):
        rngs = RngFactory(seed)
        return ble_latency(66, ble_cfg, ChannelState(-40.0, rngs.stream("channel")), rngs.stream("send-phase"), calib.ble)

    assert one(42) == one(42)


def test_notification_limits(ble_cfg, channel, calib):
    sim = Simulator()
    conn = BleConnection(sim, BleConfig(tx_queue_depth=2), channel, calib.ble)
    with pytest.raises(SimError):
        ble_notify(conn, 10)
    conn.start(anchor=conn.lead_us)
    assert ble_notify(conn, 10).accepted
    assert ble_notify(conn, 10).accepted
    receipt = ble_notify(conn, 10)
    assert not receipt.accepted
    assert receipt.queue_depth == 2
    with pytest.raises(PayloadTooLarge):
        ble_notify(conn, 245)


def test_keep_alive_events_run_without_data(ble_cfg, channel, calib):
    sim = Simulator()
    conn = BleConnection(sim, ble_cfg, channel, calib.ble)
    conn.keep_reports = True
    conn.start(anchor=conn.lead_us)
    # each CE is dispatched lead_us before its anchor, the first one at t=0
    sim.run_until(10 * ble_cfg.conn_interval_us - 1)
    assert conn.events == 10
    anchors = [r.anchor for r in conn.reports]
    assert anchors[0] == conn.lead_us
    assert {b - a for a, b in zip(anchors, anchors[1:])} == {ble_cfg.conn_interval_us}
    assert all(r.empty_pdu and r.frames_m2s == 0 for r in conn.reports)
    assert conn.phase is LinkPhase.CONNECTED


def test_supervision_timeout_drops_a_silent_link(calib):
    cfg = BleConfig(supervision_timeout_us=100_000)
    channel = ChannelState(-40.0, RngStream(1, "channel"), per_override={FrameKind.EMPTY: 1.0})
    sim = Simulator()
    conn = BleConnection(sim, cfg, channel, calib.ble)
    conn.start(anchor=conn.lead_us)
    sim.run_until(1_000_000)
    assert conn.phase is LinkPhase.STANDBY
    assert conn.events < 20


def test_more_data_fills_the_connection_event(ble_cfg, channel, calib):
    sim = Simulator()
    conn = BleConnection(sim, ble_cfg, channel, calib.ble)
    for _ in range(10):
        conn.notify(Role.CENTRAL, 244, stack_latency=False)
    report = conn.connection_event(conn.lead_us)
    # two full exchanges fit before the guard
    assert report.frames_m2s >= 2
    assert report.end <= conn.lead_us + ble_cfg.conn_interval_us
    assert conn.delivered[Role.PERIPHERAL] == report.frames_m2s


def test_saturated_stream(ble_cfg, make_channel, calib):
    trace = PowerTrace(calib.profile(Protocol.BLE))
    result = ble_stream(ble_cfg, make_channel(), trace, calib.ble)
    assert result.forward_kbps == pytest.approx(1041, rel=0.03)
    assert result.reverse_kbps == 0


def test_idle_connection_power(ble_cfg, make_channel, calib):
    trace = PowerTrace(calib.profile(Protocol.BLE))
    result = ble_stream(ble_cfg, make_channel(), trace, calib.ble, offered_kbps=0)
    assert result.forward_bytes == 0
    assert result.avg_power_mw == pytest.approx(1.41, rel=0.05)


def test_reverse_saturation_splits_the_aggregate(ble_cfg, make_channel, calib):
    trace = PowerTrace(calib.profile(Protocol.BLE))
    both = ble_stream(ble_cfg, make_channel(), trace, calib.ble, reverse_saturated=True)
    assert both.forward_kbps == pytest.approx(both.reverse_kbps, rel=0.05)
    assert both.forward_kbps + both.reverse_kbps == pytest.approx(1041, rel=0.05)


def _bidir_connection(ble_cfg, channel, calib):
    sim = Simulator()
    conn = BleConnection(sim, ble_cfg, channel, calib.ble)
    for _ in range(8):
        conn.notify(Role.PERIPHERAL, 244, stack_latency=False)
    return conn


def test_late_central_pdu_still_lets_the_peripheral_send(ble_cfg, channel, calib):
    conn = _bidir_connection(ble_cfg, channel, calib)
    anchor = conn.lead_us
    central = conn.endpoints[Role.CENTRAL]
    # ready after three polls, when a full exchange no longer fits but a poll does
    central.queue.append(QueuedPdu(244, 0, anchor + 3700))
    report = conn.connection_event(anchor)
    assert report.frames_m2s == 0
    assert report.frames_s2m == 4
    assert len(central.queue) == 1
    assert central.pending is None


def test_budget_break_leaves_no_stale_empty_pdu(ble_cfg, channel, calib):
    conn = _bidir_connection(ble_cfg, channel, calib)
    anchor = conn.lead_us
    conn.connection_event(anchor)
    arrivals = []
    conn.on_deliver = lambda receiver, pdu, at: arrivals.append(at) if receiver is Role.PERIPHERAL else None
    conn.notify(Role.CENTRAL, 244, stack_latency=False)
    next_anchor = anchor + ble_cfg.conn_interval_us
    report = conn.connection_event(next_anchor)
    assert report.frames_m2s == 1
    # queued data goes out in the first exchange, not after an empty poll
    assert arrivals == [next_anchor + ble_cfg.data_air(244) + calib.ble.rx_processing_us]


def test_partial_forward_load_trades_off_with_the_reverse_direction(ble_cfg, make_channel, calib):
    def run(offered_kbps):
        trace = PowerTrace(calib.profile(Protocol.BLE))
        return ble_stream(ble_cfg, make_channel(), trace, calib.ble, duration_us=500_000,
                          offered_kbps=offered_kbps, reverse_saturated=True)

    top = run(None)
    aggregate = top.forward_kbps + top.reverse_kbps
    points = [run(f * top.forward_kbps) for f in (0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0)] + [top]
    for point in points:
        assert abs(point.forward_kbps + point.reverse_kbps - aggregate) / aggregate < 0.1
    fit = fit_slope([p.forward_kbps for p in points], [p.reverse_kbps for p in points])
    assert fit.k == pytest.approx(-1.016, abs=0.05)


def test_connect_reports_advertising(ble_cfg, calib):
    rngs = RngFactory(3)
    trace = PowerTrace(calib.profile(Protocol.BLE))
    result = connect(ble_cfg, ChannelState(-40.0, rngs.stream("channel")), rngs.stream("advertising"),
                     calib.ble, trace)
    assert result.adv_events >= 1
    assert result.t_established_us > calib.ble.init_cpu_us + calib.ble.init_radio_us + calib.ble.connect_delay_us
    assert set(result.phase_energies_uj) >= {"Init", "Advertising"}


def _deliveries(per: float, seed: int, duration_us: int = 20_000_000):
    channel = ChannelState(-40.0, RngStream(seed, "channel"),
                           per_override={FrameKind.DATA: per, FrameKind.EMPTY: per})
    sim = Simulator()
    tags = []
    conn = BleConnection(sim, BleConfig(), channel,
                         on_deliver=lambda receiver, pdu, at: tags.append(pdu.tag))
    conn.start(anchor=conn.lead_us)

    def arrive(event):
        conn.notify(Role.CENTRAL, 20, tag=event.payload)
        if event.fire_at + 2000 < duration_us:
            sim.schedule(event.fire_at + 2000, "app", "arrival", arrive, event.payload + 1)

    sim.schedule(0, "app", "arrival", arrive, 0)
    sim.run_until(duration_us)
    return tags


@pytest.mark.slow
@pytest.mark.parametrize("per", [0.0, 0.1, 0.3, 0.9])
def test_at_most_once_in_order_delivery(per):
    tags = _deliveries(per, seed=7)
    assert tags == sorted(set(tags))
    if per == 0.0:
        assert len(tags) > 9_000
