"""
Physical layer: frame timing and the packet-error channel
"""

from .channel import (
    ADV_IND_BYTES,
    BLE_ADV_OVERHEAD,
    BLE_DATA_OVERHEAD,
    BLE_EMPTY_OVERHEAD,
    BLE_MAX_APP_PAYLOAD,
    CONNECT_IND_BYTES,
    DEFAULT_PER_CURVES,
    ESB_MAX_PAYLOAD,
    ESB_OVERHEAD,
    SCAN_REQ_BYTES,
    SCAN_RSP_BYTES,
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

__all__ = [
    'ADV_IND_BYTES',
    'BLE_ADV_OVERHEAD',
    'BLE_DATA_OVERHEAD',
    'BLE_EMPTY_OVERHEAD',
    'BLE_MAX_APP_PAYLOAD',
    'CONNECT_IND_BYTES',
    'DEFAULT_PER_CURVES',
    'ESB_MAX_PAYLOAD',
    'ESB_OVERHEAD',
    'SCAN_REQ_BYTES',
    'SCAN_RSP_BYTES',
    'ChannelState',
    'Delivery',
    'Frame',
    'FrameKind',
    'FrameOverhead',
    'PerCurve',
    'PhyMode',
    'deliver',
    'on_air_time',
    'packet_error_prob',
]
