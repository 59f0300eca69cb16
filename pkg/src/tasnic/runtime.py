"""Node-level messaging and configuration primitives.

``send_msg`` splits application data into tagged Ethernet frames (EtherType
0x88B5), each starting with an 18-byte fragment header; ``recv_msg`` blocks
the calling application context until a matching message has been fully
reassembled, realized by driving the event engine rather than busy-waiting.
``set_conf``/``get_conf`` translate schedule configurations to and from the
NIC's register file.

Fragment header layout (big-endian): msg_id u16, frag_index u16,
frag_count u16, total_len u32, src_id u32, dst_id u32.  Each fragment
carries up to 1482 payload bytes (1500 minus the header).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from .engine import TICKS_PER_S, SimTime
from .fabric import AddressError, decode_id, encode_id
from .frame import Frame
from .nic import (
    REG_COMMIT,
    REG_GUARDBAND_NS,
    REG_NUM_ENTRIES,
    REG_SCR_BASE,
    REG_TQCR_BASE,
    REG_WINDOW_US,
    SCR_ENABLE,
    default_guardband_ns,
)
from .fabric import PortKind

if TYPE_CHECKING:  # pragma: no cover
    from .node import Node

_HEADER = struct.Struct(">HHHIII")
FRAGMENT_HEADER_BYTES = _HEADER.size  # 18
MAX_CHUNK = 1500 - FRAGMENT_HEADER_BYTES  # 1482 usable bytes per frame
DEFAULT_REASSEMBLY_DEADLINE_NS = TICKS_PER_S


class MessageError(Exception):
    """Bad send_msg arguments."""


class ReceiveTimeout(Exception):
    """recv_msg deadline elapsed without a matching message."""


class ReceiveStalled(Exception):
    """recv_msg can never complete: the event queue drained."""


class ConfigError(Exception):
    """Schedule configuration rejected by the register commit."""


@dataclass(slots=True, frozen=True)
class FragmentHeader:
    msg_id: int
    frag_index: int
    frag_count: int
    total_len: int
    src_id: int
    dst_id: int

    def pack(self) -> bytes:
        return _HEADER.pack(self.msg_id, self.frag_index, self.frag_count,
                            self.total_len, self.src_id, self.dst_id)

    @staticmethod
    def unpack(payload: bytes) -> "FragmentHeader":
        return FragmentHeader(*_HEADER.unpack(payload[:_HEADER.size]))


@dataclass(slots=True)
class Message:
    src_id: int
    data: bytes
    send_local_ts: int | None
    send_true_ns: int | None
    deliver_local_ts: int
    deliver_true_ns: int
    flow_id: int | None
    hops: int


@dataclass(slots=True)
class ScheduleConfig:
    port: PortKind
    window_us: int
    entries: tuple[tuple[int, int], ...]  # (queue_idx, slot_us)
    guardband_ns: int | None = None       # None picks the port default


@dataclass(slots=True)
class _Reassembly:
    frag_count: int
    total_len: int
    buffer: bytearray
    received: set[int] = field(default_factory=set)
    max_hops: int = 0
    deadline_handle: object = None


@dataclass(slots=True)
class _PendingRecv:
    src_id: int
    size: int
    result: Message | None = None


class NodeRuntime:
    """Messaging endpoint for one node's single application context."""

    def __init__(self, node: "Node",
                 reassembly_deadline_ns: SimTime = DEFAULT_REASSEMBLY_DEADLINE_NS):
        self.node = node
        self.reassembly_deadline_ns = reassembly_deadline_ns
        self._msg_counters: dict[int, int] = {}
        self._partials: dict[tuple[int, int], _Reassembly] = {}
        self._completed: list[Message] = []
        self._pending_recv: _PendingRecv | None = None
        self.message_sink: Callable[[Message], None] | None = None
        self.expired_partials = 0
        self.messages_delivered = 0

    # -- sending ----------------------------------------------------------

    def send_msg(self, data: bytes, dst: int, pcp: int = 0,
                 flow_id: int | None = None) -> int:
        """Transfer ``data`` to the node with encoded id ``dst``; returns msg_id."""
        if len(data) < 1:
            raise MessageError("size must be >= 1")
        dst_node = decode_id(dst)
        if not self.node.network.topology.has_node(dst_node):
            raise AddressError(f"destination {dst_node} is not a populated node")
        key = dst
        msg_id = self._msg_counters.get(key, 0)
        self._msg_counters[key] = (msg_id + 1) & 0xFFFF
        frag_count = -(-len(data) // MAX_CHUNK)
        now = self.node.sim.now
        send_local = self.node.clock.read_ns(now)
        src_id = encode_id(self.node.node_id)
        for idx in range(frag_count):
            chunk = data[idx * MAX_CHUNK:(idx + 1) * MAX_CHUNK]
            header = FragmentHeader(msg_id, idx, frag_count, len(data), src_id, dst)
            frame = self.node.network.build_runtime_frame(
                self.node, dst_node, header.pack() + chunk, pcp)
            frame.meta.flow_id = flow_id
            frame.meta.msg_id = msg_id
            frame.meta.frag_index = idx
            frame.meta.send_local_ts = send_local
            frame.meta.send_true_ns = now
            self.node.network.note_offered(frame)
            self.node.send_frame(frame)
        return msg_id

    # -- receiving ---------------------------------------------------------

    def on_frame(self, frame: Frame) -> None:
        """Host side of the RX path, called after the processing delay."""
        header = FragmentHeader.unpack(frame.payload)
        key = (header.src_id, header.msg_id)
        part = self._partials.get(key)
        if part is None:
            part = _Reassembly(header.frag_count, header.total_len,
                               bytearray(header.total_len))
            part.deadline_handle = self.node.sim.after(
                self.reassembly_deadline_ns, lambda: self._expire(key),
                label=f"reasm-deadline:{self.node.node_id}")
            self._partials[key] = part
        if header.frag_count != part.frag_count or header.total_len != part.total_len:
            return  # inconsistent fragment; ignore
        if header.frag_index in part.received or header.frag_index >= header.frag_count:
            return
        start = header.frag_index * MAX_CHUNK
        length = min(MAX_CHUNK, header.total_len - start)
        chunk = frame.payload[FRAGMENT_HEADER_BYTES:FRAGMENT_HEADER_BYTES + length]
        part.buffer[start:start + length] = chunk
        part.received.add(header.frag_index)
        part.max_hops = max(part.max_hops, frame.meta.hops)
        if len(part.received) == part.frag_count:
            part.deadline_handle.cancel()
            del self._partials[key]
            now = self.node.sim.now
            msg = Message(
                src_id=header.src_id,
                data=bytes(part.buffer),
                send_local_ts=frame.meta.send_local_ts,
                send_true_ns=frame.meta.send_true_ns,
                deliver_local_ts=self.node.clock.read_ns(now),
                deliver_true_ns=now,
                flow_id=frame.meta.flow_id,
                hops=part.max_hops,
            )
            self._complete(msg)

    def _expire(self, key: tuple[int, int]) -> None:
        if key in self._partials:
            del self._partials[key]
            self.expired_partials += 1

    def _complete(self, msg: Message) -> None:
        self.messages_delivered += 1
        pending = self._pending_recv
        if (pending is not None and pending.result is None
                and msg.src_id == pending.src_id and len(msg.data) == pending.size):
            pending.result = msg
            return
        if self.message_sink is not None:
            self.message_sink(msg)
            return
        self._completed.append(msg)

    def recv_msg(self, size: int, src: int, timeout: SimTime | None = None) -> bytes:
        """Block until ``size`` bytes from ``src`` have arrived; returns them.

        Blocking is realized by advancing the simulation from the caller's
        application context; it must not be invoked from inside an event.
        """
        for i, msg in enumerate(self._completed):
            if msg.src_id == src and len(msg.data) == size:
                return self._completed.pop(i).data
        sim = self.node.sim
        deadline = sim.now + timeout if timeout is not None else None
        pending = _PendingRecv(src, size)
        self._pending_recv = pending
        try:
            while pending.result is None:
                nxt = sim.peek_time()
                if nxt is None or (deadline is not None and nxt > deadline):
                    if deadline is not None:
                        sim.run_until(deadline)
                        raise ReceiveTimeout(
                            f"no {size}-byte message from {decode_id(src)} within {timeout} ns")
                    raise ReceiveStalled(
                        "event queue drained with the receive still incomplete")
                sim.step()
            return pending.result.data
        finally:
            self._pending_recv = None

    # -- schedule configuration ---------------------------------------------

    def set_conf(self, cfg: ScheduleConfig) -> None:
        """Program and commit a transmission schedule on a local port."""
        port = self.node.ports.get(cfg.port)
        if port is None:
            raise ConfigError(f"node {self.node.node_id} has no connected {cfg.port.value} port")
        guard = cfg.guardband_ns
        if guard is None:
            guard = default_guardband_ns(port.rate_bps)
        port.write_register(REG_WINDOW_US, cfg.window_us)
        port.write_register(REG_GUARDBAND_NS, guard)
        port.write_register(REG_NUM_ENTRIES, len(cfg.entries))
        for j, (queue_idx, slot_us) in enumerate(cfg.entries):
            port.write_register(REG_SCR_BASE + 8 * j, SCR_ENABLE | queue_idx)
            port.write_register(REG_TQCR_BASE + 8 * j, slot_us)
        port.write_register(REG_COMMIT, 1)
        if not port.read_register(REG_COMMIT) & 1:
            raise ConfigError("; ".join(port.regs.last_commit_errors))

    def get_conf(self, port_kind: PortKind) -> ScheduleConfig:
        """Read back the most recently committed schedule of a local port."""
        port = self.node.ports.get(port_kind)
        if port is None:
            raise ConfigError(f"node {self.node.node_id} has no connected {port_kind.value} port")
        table = port.committed_table
        return ScheduleConfig(
            port=port_kind,
            window_us=table.window_us,
            entries=tuple((e.queue_idx, e.slot_us) for e in table.entries),
            guardband_ns=table.guardband_ns,
        )
