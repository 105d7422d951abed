"""
Link-layer protocol models
"""

from .ble import (
    BleConfig,
    BleConnection,
    BleStreamResult,
    ConnectionEventReport,
    EnqueueReceipt,
    LinkPhase,
    Role,
    advertise_and_connect,
    ble_latency,
    ble_notify,
    ble_stream,
    connect,
)
from .esb import (
    EsbConfig,
    EsbPacket,
    EsbPrx,
    EsbPtx,
    RxOutcome,
    StreamResult,
    TransactionResult,
    esb_latency,
    esb_stream,
    ptx_transact,
)
from .packet import PacketEvent, ble_packet_event, esb_packet_event, packet_event
from .warmup import WarmupResult, ble_warmup, esb_warmup, warmup

__all__ = [
    'BleConfig',
    'BleConnection',
    'BleStreamResult',
    'ConnectionEventReport',
    'EnqueueReceipt',
    'LinkPhase',
    'Role',
    'advertise_and_connect',
    'ble_latency',
    'ble_notify',
    'ble_stream',
    'connect',
    'EsbConfig',
    'EsbPacket',
    'EsbPrx',
    'EsbPtx',
    'RxOutcome',
    'StreamResult',
    'TransactionResult',
    'esb_latency',
    'esb_stream',
    'ptx_transact',
    'PacketEvent',
    'ble_packet_event',
    'esb_packet_event',
    'packet_event',
    'WarmupResult',
    'ble_warmup',
    'esb_warmup',
    'warmup',
]
