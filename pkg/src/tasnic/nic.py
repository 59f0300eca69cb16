"""Per-port NIC egress: multi-queue TX with a time-aware slot scheduler.

Each data port owns its TX queues, a register file and an independent
scheduler.  The active schedule divides a repeating window (local-clock
time, microsecond-granular slots) among queues; inside a slot only that
queue may transmit, a guardband keeps frames from starting too close to
the slot end, and an empty scheduled queue stalls the port for its whole
slot.  Window time left over after the programmed slots is served to the
remaining queues round-robin, one frame at a time.  A schedule with no
entries degenerates to plain round-robin over all queues with no window
bookkeeping at all.

Schedule updates are staged in shadow registers and applied atomically at
the next window boundary after a successful commit.

Locally-originated frames are additionally gated by the node's host
injection budget (a token bucket refilled at the configured rate), which
models the host side feeding the NIC; transit and sync-protocol frames
are not host-fed and bypass it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .clock import LocalClock
from .engine import SimTime, Simulator
from .fabric import Link, NodeId, PortKind
from .frame import Frame, serialization_ticks

if TYPE_CHECKING:  # pragma: no cover
    from .node import Network

MAX_SCHEDULE_ENTRIES = 16

REG_WINDOW_US = 0x000
REG_NUM_ENTRIES = 0x004
REG_GUARDBAND_NS = 0x008
REG_COMMIT = 0x00C
REG_SCR_BASE = 0x010   # + 8*j, bits [15:0] queue index, bit 31 enable
REG_TQCR_BASE = 0x014  # + 8*j, slot length in microseconds
SHADOW_OFFSET = 0x100
SCR_ENABLE = 1 << 31


class RegisterError(Exception):
    """Access to an offset outside the register map."""


def default_guardband_ns(rate_bps: int) -> int:
    """One maximum-size frame's serialization time at the port rate."""
    return serialization_ticks(1522, rate_bps)


@dataclass(slots=True, frozen=True)
class ScheduleEntry:
    queue_idx: int
    slot_us: int


class ScheduleTable:
    """A committed schedule plus derived ns-resolution slot boundaries."""

    def __init__(self, window_us: int, entries: tuple[ScheduleEntry, ...], guardband_ns: int):
        self.window_us = window_us
        self.entries = entries
        self.guardband_ns = guardband_ns
        self.window_ns = window_us * 1_000
        self.slots_ns: list[tuple[int, int, int]] = []
        start = 0
        for e in entries:
            end = start + e.slot_us * 1_000
            self.slots_ns.append((start, end, e.queue_idx))
            start = end
        self.filler_start_ns = start
        self.scheduled_set = frozenset(e.queue_idx for e in entries)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, ScheduleTable)
                and self.window_us == other.window_us
                and self.entries == other.entries
                and self.guardband_ns == other.guardband_ns)


def validate_schedule(window_us: int, entries: tuple[ScheduleEntry, ...],
                      guardband_ns: int, num_tx_queues: int) -> list[str]:
    errors: list[str] = []
    if window_us < 1:
        errors.append(f"window_us={window_us} must be >= 1")
    if guardband_ns < 0:
        errors.append(f"guardband_ns={guardband_ns} must be >= 0")
    if len(entries) > MAX_SCHEDULE_ENTRIES:
        errors.append(f"{len(entries)} entries exceed the maximum of {MAX_SCHEDULE_ENTRIES}")
    seen: set[int] = set()
    total = 0
    for j, e in enumerate(entries):
        if e.slot_us < 1:
            errors.append(f"entry {j}: slot_us={e.slot_us} below the microsecond granularity")
        if not 0 <= e.queue_idx < num_tx_queues:
            errors.append(f"entry {j}: queue {e.queue_idx} does not exist")
        elif e.queue_idx in seen:
            errors.append(f"entry {j}: queue {e.queue_idx} referenced twice")
        seen.add(e.queue_idx)
        total += e.slot_us
    if window_us >= 1 and total > window_us:
        errors.append(f"slots sum to {total} us, exceeding the {window_us} us window")
    return errors


@dataclass(slots=True)
class TxQueue:
    index: int
    depth: int = 1024
    time_aware: bool = False           # member of the schedulable subgroup
    frames: deque = field(default_factory=deque)
    enqueued: int = 0
    dequeued: int = 0
    drops: int = 0


class TokenBucket:
    """Integer-exact token bucket (bits at rate_bps, remainder carried)."""

    def __init__(self, rate_bps: int, capacity_bits: int):
        self.rate_bps = rate_bps
        self.capacity = capacity_bits
        self.tokens = capacity_bits
        self._last = 0
        self._rem = 0

    def _advance(self, now: SimTime) -> None:
        if now <= self._last:
            return
        num = (now - self._last) * self.rate_bps + self._rem
        gained, self._rem = divmod(num, 1_000_000_000)
        self.tokens += gained
        if self.tokens >= self.capacity:
            self.tokens = self.capacity
            self._rem = 0
        self._last = now

    def ready_time(self, bits: int, now: SimTime) -> SimTime:
        """Earliest instant at which ``bits`` tokens are available."""
        self._advance(now)
        if self.tokens >= bits:
            return now
        deficit_units = (bits - self.tokens) * 1_000_000_000 - self._rem
        dt = -(-deficit_units // self.rate_bps)
        return now + dt

    def consume(self, bits: int, now: SimTime) -> None:
        self._advance(now)
        self.tokens -= bits


@dataclass(slots=True, frozen=True)
class TxRecord:
    true_start: SimTime
    local_start: int
    queue_idx: int
    wire_bytes: int
    ser_ns: int
    flow_id: int | None


class RegisterFile:
    """Shadow-staged 32-bit registers; COMMIT validates and arms the swap."""

    def __init__(self, port: "NicPort"):
        self._port = port
        self.shadow = {
            REG_WINDOW_US: 100,
            REG_NUM_ENTRIES: 0,
            REG_GUARDBAND_NS: default_guardband_ns(port.rate_bps),
        }
        for j in range(MAX_SCHEDULE_ENTRIES):
            self.shadow[REG_SCR_BASE + 8 * j] = 0
            self.shadow[REG_TQCR_BASE + 8 * j] = 0
        self.last_commit_ok = True
        self.last_commit_errors: list[str] = []

    def write(self, offset: int, value: int) -> None:
        value &= 0xFFFFFFFF
        if offset == REG_COMMIT:
            if value & 1:
                self._commit()
            return
        if offset not in self.shadow:
            raise RegisterError(f"write to unknown register offset {offset:#x}")
        self.shadow[offset] = value

    def read(self, offset: int) -> int:
        if offset >= SHADOW_OFFSET:
            base = offset - SHADOW_OFFSET
            if base not in self.shadow:
                raise RegisterError(f"read from unknown shadow offset {offset:#x}")
            return self.shadow[base]
        if offset == REG_COMMIT:
            return 1 if self.last_commit_ok else 0
        active = self._port.committed_table
        if offset == REG_WINDOW_US:
            return active.window_us
        if offset == REG_NUM_ENTRIES:
            return len(active.entries)
        if offset == REG_GUARDBAND_NS:
            return active.guardband_ns
        for j in range(MAX_SCHEDULE_ENTRIES):
            if offset == REG_SCR_BASE + 8 * j:
                if j < len(active.entries):
                    return SCR_ENABLE | active.entries[j].queue_idx
                return 0
            if offset == REG_TQCR_BASE + 8 * j:
                if j < len(active.entries):
                    return active.entries[j].slot_us
                return 0
        raise RegisterError(f"read from unknown register offset {offset:#x}")

    def _commit(self) -> None:
        num = self.shadow[REG_NUM_ENTRIES]
        errors: list[str] = []
        if num > MAX_SCHEDULE_ENTRIES:
            errors.append(f"NUM_ENTRIES={num} exceeds {MAX_SCHEDULE_ENTRIES}")
            num = 0
        entries = []
        for j in range(num):
            scr = self.shadow[REG_SCR_BASE + 8 * j]
            if not scr & SCR_ENABLE:
                continue
            entries.append(ScheduleEntry(scr & 0xFFFF, self.shadow[REG_TQCR_BASE + 8 * j]))
        entries = tuple(entries)
        window = self.shadow[REG_WINDOW_US]
        guard = self.shadow[REG_GUARDBAND_NS]
        errors += validate_schedule(window, entries, guard, self._port.num_tx_queues)
        if errors:
            self.last_commit_ok = False
            self.last_commit_errors = errors
            return
        self.last_commit_ok = True
        self.last_commit_errors = []
        self._port.arm_table(ScheduleTable(window, entries, guard))


class NicPort:
    """Egress state machine for one data port."""

    MGMT_IDX = -1  # sentinel resolved to the extra management queue

    def __init__(self, network: "Network", node_id: NodeId, kind: PortKind,
                 link: Link, clock: LocalClock, sim: Simulator,
                 num_tx_queues: int, time_aware_queues: tuple[int, ...],
                 queue_depth: int, bucket: TokenBucket | None):
        self.network = network
        self.node_id = node_id
        self.kind = kind
        self.link = link
        self.clock = clock
        self.sim = sim
        self.num_tx_queues = num_tx_queues
        self.rate_bps = link.rate_bps
        self.bucket = bucket
        self.queues = [TxQueue(i, queue_depth, i in time_aware_queues)
                       for i in range(num_tx_queues)]
        self.mgmt_queue = TxQueue(num_tx_queues, queue_depth)
        self.regs = RegisterFile(self)
        self.active_table = ScheduleTable(100, (), default_guardband_ns(self.rate_bps))
        self.committed_table = self.active_table
        self._pending: ScheduleTable | None = None
        self._pending_at_local = 0
        self.busy_until: SimTime = 0
        self._wake = None
        self._rr_last: int | None = None
        self.trace: list[TxRecord] | None = None
        self.tx_frames = 0

    # -- queue access -------------------------------------------------

    def queue(self, idx: int) -> TxQueue:
        if idx == self.MGMT_IDX or idx == self.num_tx_queues:
            return self.mgmt_queue
        return self.queues[idx]

    def enqueue(self, idx: int, frame: Frame) -> bool:
        """Admit a frame to queue ``idx``; False when tail-dropped."""
        q = self.queue(idx)
        if len(q.frames) >= q.depth:
            q.drops += 1
            self.network.count_drop(frame, "queue_overflow")
            return False
        frame.meta.enqueue_ts = self.clock.read_ns(self.sim.now)
        q.frames.append(frame)
        q.enqueued += 1
        self.kick()
        return True

    # -- schedule management -------------------------------------------

    def arm_table(self, table: ScheduleTable) -> None:
        """Register a committed table; it activates at the window boundary."""
        self.committed_table = table
        local = self.clock.read_ns(self.sim.now)
        if not self.active_table.entries:
            effective = local
        else:
            w = self.active_table.window_ns
            effective = ((local + w - 1) // w) * w
        self._pending = table
        self._pending_at_local = effective
        if effective <= local:
            self._activate_pending()
            self.kick()
        else:
            when = self.clock.true_at_local(effective, self.sim.now)
            self.sim.at(when, self.kick, label=f"commit:{self.node_id}:{self.kind.value}")

    def _activate_pending(self) -> None:
        if self._pending is not None:
            self.active_table = self._pending
            self._pending = None

    # -- scheduler -----------------------------------------------------

    def kick(self) -> None:
        """Re-evaluate the egress decision unless mid-transmission."""
        now = self.sim.now
        if self.busy_until > now:
            return
        local = self.clock.read_ns(now)
        if self._pending is not None and local >= self._pending_at_local:
            self._activate_pending()
        action = self._decide(local, now)
        kind = action[0]
        if kind == "tx":
            self._clear_wake()
            self._transmit(action[1], now)
        elif kind == "idle_local":
            self._set_wake(self.clock.true_at_local(action[1], now))
        elif kind == "idle_true":
            self._set_wake(action[1])
        else:  # sleep until an enqueue kicks us
            self._clear_wake()

    def _decide(self, local: int, now: SimTime):
        table = self.active_table
        if not table.entries:
            cands = list(range(self.num_tx_queues)) + [self.MGMT_IDX]
            return self._rr_decide(cands, None, None, local, now)
        w = table.window_ns
        phase = local % w
        window_start = local - phase
        for start, end, qidx in table.slots_ns:
            if phase < end:
                q = self.queues[qidx]
                slot_end_abs = window_start + end
                if not q.frames:
                    return ("idle_local", slot_end_abs)  # stall-on-empty
                head = q.frames[0]
                ser = serialization_ticks(head.wire_bytes, self.rate_bps)
                if phase > end - table.guardband_ns:
                    return ("idle_local", slot_end_abs)
                if phase + ser > end:
                    return ("idle_local", slot_end_abs)
                ready = self._token_ready(head, now)
                if ready is not None:
                    cap = self.clock.true_at_local(slot_end_abs, now)
                    return ("idle_true", min(ready, cap))
                return ("tx", qidx)
        deadline = window_start + w - table.guardband_ns
        window_end = window_start + w
        cands = [i for i in range(self.num_tx_queues) if i not in table.scheduled_set]
        cands.append(self.MGMT_IDX)
        return self._rr_decide(cands, deadline, window_end, local, now)

    def _rr_decide(self, candidates: list[int], deadline_local: int | None,
                   window_end_local: int | None, local: int, now: SimTime):
        if self._rr_last is not None and self._rr_last in candidates:
            i = candidates.index(self._rr_last)
            candidates = candidates[i + 1:] + candidates[:i + 1]
        token_wake: SimTime | None = None
        fit_failed = False
        for idx in candidates:
            q = self.queue(idx)
            if not q.frames:
                continue
            head = q.frames[0]
            ser = serialization_ticks(head.wire_bytes, self.rate_bps)
            if deadline_local is not None and local + ser > deadline_local:
                fit_failed = True
                continue
            ready = self._token_ready(head, now)
            if ready is not None:
                if token_wake is None or ready < token_wake:
                    token_wake = ready
                continue
            self._rr_last = idx
            return ("tx", idx)
        if token_wake is not None:
            if window_end_local is not None:
                cap = self.clock.true_at_local(window_end_local, now)
                token_wake = min(token_wake, cap)
            return ("idle_true", token_wake)
        if fit_failed and window_end_local is not None:
            return ("idle_local", window_end_local)
        if window_end_local is not None:
            return ("idle_local", window_end_local)
        return ("sleep",)

    def _token_ready(self, frame: Frame, now: SimTime) -> SimTime | None:
        """None when the host budget allows the frame now, else the wake time."""
        if self.bucket is None or not frame.meta.local_origin:
            return None
        ready = self.bucket.ready_time(frame.wire_bytes * 8, now)
        return None if ready <= now else ready

    def _transmit(self, qidx: int, now: SimTime) -> None:
        q = self.queue(qidx)
        frame = q.frames.popleft()
        q.dequeued += 1
        if self.bucket is not None and frame.meta.local_origin:
            self.bucket.consume(frame.wire_bytes * 8, now)
        ser = serialization_ticks(frame.wire_bytes, self.rate_bps)
        tx_local = self.clock.read_ns(now)
        frame.meta.tx_ts = tx_local
        self.network.on_tx_start(self, frame, tx_local)
        frame.stamp_fcs()
        if self.trace is not None:
            self.trace.append(TxRecord(now, tx_local, qidx, frame.wire_bytes,
                                       ser, frame.meta.flow_id))
        self.tx_frames += 1
        self.link.tx_frames += 1
        self.busy_until = now + ser
        self.sim.at(self.busy_until, self.kick, label=f"txdone:{self.node_id}:{self.kind.value}")
        self.network.schedule_delivery(self.link, self.node_id, frame, now, self.busy_until)
        self.network.on_frame_dequeued(frame)

    def _set_wake(self, when: SimTime) -> None:
        if self._wake is not None:
            self._wake.cancel()
        if when <= self.sim.now:
            when = self.sim.now + 1
        self._wake = self.sim.at(when, self.kick, label=f"wake:{self.node_id}:{self.kind.value}")

    def _clear_wake(self) -> None:
        if self._wake is not None:
            self._wake.cancel()
            self._wake = None

    # -- register access ------------------------------------------------

    def write_register(self, offset: int, value: int) -> None:
        self.regs.write(offset, value)

    def read_register(self, offset: int) -> int:
        return self.regs.read(offset)
