"""L2 frames: 802.1Q-tagged Ethernet with an IEEE CRC-32 FCS.

Wire layout is dst(6) src(6) tpid(2)=0x8100 tci(2) ethertype(2) payload
(46..1500) fcs(4), so the wire length is 18 + payload + 4 and tops out at
1522 bytes.  Simulation-only bookkeeping (final destination, TTL, flow tag,
timestamps) lives in ``FrameMeta`` and occupies no wire bytes; it stands in
for the L3 headers the fabric's software routing reads.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

from .fabric import NodeId

TPID = 0x8100
ETHERTYPE_RUNTIME = 0x88B5
ETHERTYPE_PTP = 0x88F7

HEADER_BYTES = 18          # dst + src + 802.1Q tag + ethertype
FCS_BYTES = 4
MIN_PAYLOAD = 46
MAX_PAYLOAD = 1500
MAX_WIRE_BYTES = HEADER_BYTES + MAX_PAYLOAD + FCS_BYTES  # 1522


def crc32(data: bytes) -> int:
    """IEEE 802.3 CRC-32 (reflected, init and final xor 0xFFFFFFFF)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def serialization_time_ns(wire_bytes: int, rate_bps: int) -> float:
    """Exact serialization time; the engine rounds this up to whole ns."""
    return wire_bytes * 8 * 1e9 / rate_bps


def serialization_ticks(wire_bytes: int, rate_bps: int) -> int:
    """Integer-ns serialization time, rounded up (never undercounts the port)."""
    bits = wire_bytes * 8
    return -(-bits * 1_000_000_000 // rate_bps)


@dataclass(slots=True)
class FrameMeta:
    final_dst: NodeId | None = None   # L3-analog destination read by routing
    ttl: int = 64
    local_origin: bool = False        # counts against the host injection cap
    flow_id: int | None = None
    msg_id: int | None = None
    frag_index: int | None = None
    send_local_ts: int | None = None  # sender clock at send_msg time
    send_true_ns: int | None = None
    enqueue_ts: int | None = None     # local clock at last queue admission
    tx_ts: int | None = None
    rx_ts: int | None = None
    hops: int = 0
    route: list[tuple[NodeId, str]] | None = None


@dataclass(slots=True)
class Frame:
    dst_mac: bytes
    src_mac: bytes
    pcp: int
    ethertype: int
    payload: bytes
    vid: int = 0
    fcs: int | None = None
    meta: FrameMeta = field(default_factory=FrameMeta)

    def __post_init__(self) -> None:
        if not 0 <= self.pcp <= 7:
            raise ValueError(f"pcp {self.pcp} out of range")
        if not MIN_PAYLOAD <= len(self.payload) <= MAX_PAYLOAD:
            raise ValueError(f"payload of {len(self.payload)} bytes is not in 46..1500")

    @property
    def wire_bytes(self) -> int:
        return HEADER_BYTES + len(self.payload) + FCS_BYTES

    def tci(self) -> int:
        return (self.pcp << 13) | (self.vid & 0x0FFF)

    def covered_bytes(self) -> bytes:
        """The bytes the FCS covers: full header plus payload."""
        tci = self.tci()
        return b"".join((
            self.dst_mac,
            self.src_mac,
            TPID.to_bytes(2, "big"),
            tci.to_bytes(2, "big"),
            self.ethertype.to_bytes(2, "big"),
            self.payload,
        ))

    def stamp_fcs(self) -> None:
        self.fcs = crc32(self.covered_bytes())

    def fcs_ok(self) -> bool:
        return self.fcs is not None and self.fcs == crc32(self.covered_bytes())


def pad_payload(data: bytes) -> bytes:
    if len(data) >= MIN_PAYLOAD:
        return data
    return data + bytes(MIN_PAYLOAD - len(data))
