"""Grandmaster/slave clock synchronization over the data fabric.

One grandmaster periodically runs a two-way exchange with every other
node: Sync (master to slave, carrying the hardware departure timestamp),
Delay-Req (slave to master) and Delay-Resp (master to slave, carrying the
request's arrival timestamp).  The slave computes the classic offset
estimate ((t2-t1) - (t4-t3)) / 2 and feeds its servo.

Sync frames ride the regular data links (EtherType 0x88F7) but are queued
on each port's dedicated management queue, so they never occupy a
time-scheduled slot and are not charged against the host injection budget.
Other-slave exchanges are staggered inside the sync interval to keep them
from queueing behind each other.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .clock import ServoState, apply_servo, ptp_offset_estimate
from .engine import TICKS_PER_MS
from .fabric import NodeId
from .frame import ETHERTYPE_PTP, Frame, pad_payload

if TYPE_CHECKING:  # pragma: no cover
    from .node import Network, Node

MSG_SYNC = 0
MSG_DELAY_REQ = 1
MSG_DELAY_RESP = 2

_WIRE = struct.Struct(">BQI")  # msg_type u8, origin_timestamp u64, exchange_id u32


@dataclass(slots=True, frozen=True)
class PtpMessage:
    msg_type: int
    origin_timestamp: int
    exchange_id: int

    def pack(self) -> bytes:
        return _WIRE.pack(self.msg_type, self.origin_timestamp, self.exchange_id)

    @staticmethod
    def unpack(payload: bytes) -> "PtpMessage":
        return PtpMessage(*_WIRE.unpack(payload[:_WIRE.size]))


@dataclass(slots=True)
class _Exchange:
    t1: int | None = None
    t2: int | None = None
    t3: int | None = None


@dataclass(slots=True)
class SlaveSync:
    servo: ServoState = field(default_factory=ServoState)
    pending_id: int | None = None
    pending: _Exchange = field(default_factory=_Exchange)
    estimates: list[tuple[int, int]] = field(default_factory=list)  # (true_ns, est_ns)
    rounds_completed: int = 0


class PtpService:
    """Drives the periodic exchanges and owns per-slave servo state."""

    def __init__(self, network: "Network", grandmaster: NodeId,
                 interval_ms: int = 250):
        self.network = network
        self.grandmaster = grandmaster
        self.interval_ns = interval_ms * TICKS_PER_MS
        self.slaves: dict[NodeId, SlaveSync] = {
            n: SlaveSync() for n in network.topology.nodes if n != grandmaster
        }
        self._next_exchange_id = 1
        self._id_to_slave: dict[int, NodeId] = {}

    def start(self) -> None:
        ordered = sorted(self.slaves)
        stagger = min(2 * TICKS_PER_MS, self.interval_ns // (len(ordered) + 1) or 1)
        for k, slave in enumerate(ordered):
            first = (k + 1) * stagger
            self.network.sim.at(first, self._round_fn(slave), label=f"ptp:sync:{slave}")

    def _round_fn(self, slave: NodeId):
        def fire() -> None:
            self._send_sync(slave)
            self.network.sim.after(self.interval_ns, fire, label=f"ptp:sync:{slave}")
        return fire

    # -- frame construction ----------------------------------------------

    def _send(self, src: NodeId, dst: NodeId, msg: PtpMessage) -> None:
        self.network.send_protocol_frame(src, dst, ETHERTYPE_PTP, msg.pack(), pcp=7)

    def _send_sync(self, slave: NodeId) -> None:
        eid = self._next_exchange_id
        self._next_exchange_id += 1
        self._id_to_slave[eid] = slave
        state = self.slaves[slave]
        state.pending_id = eid
        state.pending = _Exchange()
        # origin timestamp is patched in hardware as the frame leaves the wire
        self._send(self.grandmaster, slave, PtpMessage(MSG_SYNC, 0, eid))

    # -- hardware timestamp hook ------------------------------------------

    def on_tx_start(self, node_id: NodeId, frame: Frame, tx_local: int) -> None:
        """One-step timestamping: patch origin time at the originating port."""
        if frame.meta.hops != 1:
            return  # transit hop (hops counts link traversals, origin = 1)
        msg = PtpMessage.unpack(frame.payload)
        if msg.msg_type == MSG_SYNC:
            frame.payload = pad_payload(PtpMessage(MSG_SYNC, tx_local, msg.exchange_id).pack())
        elif msg.msg_type == MSG_DELAY_REQ:
            frame.payload = pad_payload(PtpMessage(MSG_DELAY_REQ, tx_local, msg.exchange_id).pack())
            state = self.slaves.get(node_id)
            if state is not None and state.pending_id == msg.exchange_id:
                state.pending.t3 = tx_local

    # -- protocol handlers --------------------------------------------------

    def on_frame(self, node: "Node", frame: Frame) -> None:
        msg = PtpMessage.unpack(frame.payload)
        rx_ts = frame.meta.rx_ts
        if msg.msg_type == MSG_SYNC and node.node_id in self.slaves:
            state = self.slaves[node.node_id]
            if state.pending_id != msg.exchange_id:
                return
            state.pending.t1 = msg.origin_timestamp
            state.pending.t2 = rx_ts
            self._send(node.node_id, self.grandmaster, PtpMessage(MSG_DELAY_REQ, 0, msg.exchange_id))
        elif msg.msg_type == MSG_DELAY_REQ and node.node_id == self.grandmaster:
            slave = self._id_to_slave.get(msg.exchange_id)
            if slave is None:
                return
            self._send(self.grandmaster, slave, PtpMessage(MSG_DELAY_RESP, rx_ts, msg.exchange_id))
        elif msg.msg_type == MSG_DELAY_RESP and node.node_id in self.slaves:
            state = self.slaves[node.node_id]
            ex = state.pending
            if state.pending_id != msg.exchange_id or None in (ex.t1, ex.t2, ex.t3):
                return
            est = ptp_offset_estimate(ex.t1, ex.t2, ex.t3, msg.origin_timestamp)
            now = self.network.sim.now
            apply_servo(node.clock, est, now, state.servo)
            state.estimates.append((now, est))
            state.rounds_completed += 1
            state.pending_id = None

    def true_offset_ns(self, slave: NodeId, true_now: int) -> float:
        """Exact slave-minus-grandmaster clock divergence (test oracle)."""
        gm_clock = self.network.nodes[self.grandmaster].clock
        slave_clock = self.network.nodes[slave].clock
        return slave_clock.local_exact(true_now) - gm_clock.local_exact(true_now)
