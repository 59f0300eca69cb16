"""Living simulation composition: nodes with NIC ports over a fabric.

A Node glues together its local clock, the per-port NIC egress machinery,
the messaging runtime and the RX pipeline (CRC check, local delivery with
a fixed host processing delay, or software forwarding with MAC rewrite).
The Network owns the shared pieces: the event engine, the topology and its
link state, the sync service, frame delivery across links, and global
drop/offered accounting hooks that the traffic harness taps into.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .clock import LocalClock
from .engine import RngStreams, Simulator
from .fabric import (
    DATA_PORT_KINDS,
    Link,
    NodeId,
    PortKind,
    Topology,
    abs_coords,
    encode_id,
    mac_of,
)
from .frame import ETHERTYPE_PTP, ETHERTYPE_RUNTIME, Frame, FrameMeta, pad_payload
from .nic import NicPort, TokenBucket
from .ptp import PtpService
from .qdisc import PriorityMap, classify, validate_map
from .routing import DEFAULT_TTL, Verdict, next_hop
from .runtime import NodeRuntime


@dataclass(slots=True)
class NicSettings:
    num_tx_queues: int = 8
    time_aware_queues: tuple[int, ...] = (0, 1, 2)
    queue_depth: int = 1024


@dataclass(slots=True)
class HostSettings:
    injection_cap_bps: int | None = 2_250_000_000
    processing_delay_ns: int = 10_000


@dataclass(slots=True)
class PtpSettings:
    enabled: bool = True
    grandmaster: NodeId | None = None  # None: lowest populated id
    interval_ms: int = 250
    quantization_ns: int = 8
    convergence_rounds: int = 10


@dataclass(slots=True)
class NodeCounters:
    rx_frames: int = 0
    delivered_local: int = 0
    forwarded: int = 0
    drops: dict[str, int] = field(default_factory=dict)

    def drop(self, cause: str) -> None:
        self.drops[cause] = self.drops.get(cause, 0) + 1


class Node:
    def __init__(self, network: "Network", node_id: NodeId, clock: LocalClock,
                 priority_map: PriorityMap):
        self.network = network
        self.node_id = node_id
        self.coord = abs_coords(node_id)
        self.mac = mac_of(self.coord)
        self.encoded = encode_id(node_id)
        self.clock = clock
        self.priority_map = priority_map
        self.counters = NodeCounters()
        self.bucket: TokenBucket | None = None
        self.ports: dict[PortKind, NicPort] = {}
        self.runtime = NodeRuntime(self)

    @property
    def sim(self) -> Simulator:
        return self.network.sim

    # -- egress ------------------------------------------------------------

    def send_frame(self, frame: Frame) -> None:
        """Route and enqueue a locally-originated frame."""
        dst = frame.meta.final_dst
        if dst == self.node_id:
            # loopback: no wire involved, just the host processing delay
            self.sim.after(self.network.host.processing_delay_ns,
                           lambda: self.runtime.on_frame(frame), label=f"loopback:{self.node_id}")
            return
        decision = next_hop(self.network.topology, self.node_id, dst, ingress=None)
        if decision.verdict != Verdict.FORWARD:
            self.counters.drop("no_route")
            self.network.count_drop(frame, "no_route")
            return
        self._dispatch(frame, decision.out_port)

    def _dispatch(self, frame: Frame, out_kind: PortKind) -> None:
        """Rewrite the hop MAC, burn a TTL step and enqueue on the egress port."""
        if frame.meta.ttl <= 0:
            self.counters.drop("ttl_expired")
            self.network.count_drop(frame, "ttl_expired")
            return
        frame.meta.ttl -= 1
        frame.meta.hops += 1
        peer = self.network.topology.peer_of(self.node_id, out_kind)
        frame.dst_mac = mac_of(abs_coords(peer[0]))
        if frame.meta.route is not None:
            frame.meta.route.append((self.node_id, out_kind.value))
        port = self.ports[out_kind]
        if frame.ethertype == ETHERTYPE_PTP:
            port.enqueue(NicPort.MGMT_IDX, frame)
        else:
            port.enqueue(classify(frame.pcp, self.priority_map), frame)

    # -- ingress -------------------------------------------------------------

    def handle_rx(self, frame: Frame, ingress: PortKind) -> None:
        self.counters.rx_frames += 1
        if not frame.fcs_ok():
            self.counters.drop("crc")
            self.network.count_drop(frame, "crc")
            return
        if frame.dst_mac != self.mac:
            self.counters.drop("mac_mismatch")
            self.network.count_drop(frame, "mac_mismatch")
            return
        now = self.sim.now
        frame.meta.rx_ts = self.clock.read_ns(now)
        if frame.meta.final_dst == self.node_id:
            self.counters.delivered_local += 1
            if frame.meta.route is not None:
                self.network.record_route(frame)
            if frame.ethertype == ETHERTYPE_PTP:
                # hardware fast path: the sync agent sees the frame directly
                if self.network.ptp is not None:
                    self.network.ptp.on_frame(self, frame)
                return
            self.network.count_frame_delivered(frame)
            self.sim.after(self.network.host.processing_delay_ns,
                           lambda: self.runtime.on_frame(frame),
                           label=f"hostrx:{self.node_id}")
            return
        decision = next_hop(self.network.topology, self.node_id,
                            frame.meta.final_dst, ingress)
        if decision.verdict != Verdict.FORWARD:
            self.counters.drop("no_route")
            self.network.count_drop(frame, "no_route")
            return
        self.counters.forwarded += 1
        self._dispatch(frame, decision.out_port)


class Network:
    """One simulation instance: engine + fabric + nodes + sync service."""

    def __init__(self, topology: Topology, sim: Simulator | None = None,
                 nic: NicSettings | None = None, host: HostSettings | None = None,
                 ptp: PtpSettings | None = None, priority_map: PriorityMap | None = None,
                 drift_by_node: dict[NodeId, float] | None = None,
                 seed: int = 0, trace_routes: bool = False, trace_tx: bool = False):
        self.topology = topology
        self.sim = sim if sim is not None else Simulator()
        self.nic = nic if nic is not None else NicSettings()
        self.host = host if host is not None else HostSettings()
        self.ptp_settings = ptp if ptp is not None else PtpSettings()
        self.priority_map = priority_map if priority_map is not None else PriorityMap()
        self.rng = RngStreams(seed)
        self.trace_routes = trace_routes
        map_errors = validate_map(self.priority_map, self.nic.num_tx_queues,
                                  self.nic.time_aware_queues)
        if map_errors:
            raise ValueError("invalid priority map: " + "; ".join(map_errors))

        drift_by_node = drift_by_node or {}
        self.nodes: dict[NodeId, Node] = {}
        for node_id in topology.nodes:
            clock = LocalClock(drift_ppm=drift_by_node.get(node_id, 0.0),
                               quantum_ns=self.ptp_settings.quantization_ns)
            node = Node(self, node_id, clock, self.priority_map)
            if self.host.injection_cap_bps:
                node.bucket = TokenBucket(self.host.injection_cap_bps, 1522 * 8)
            for kind in DATA_PORT_KINDS:
                port = topology.port(node_id, kind)
                if port.link is None:
                    continue
                node.ports[kind] = NicPort(
                    self, node_id, kind, port.link, clock, self.sim,
                    self.nic.num_tx_queues, self.nic.time_aware_queues,
                    self.nic.queue_depth, node.bucket)
                if trace_tx:
                    node.ports[kind].trace = []
            self.nodes[node_id] = node

        self.ptp: PtpService | None = None
        if self.ptp_settings.enabled:
            gm = self.ptp_settings.grandmaster
            if gm is None:
                gm = min(topology.nodes)
            if not topology.has_node(gm):
                raise ValueError(f"grandmaster {gm} is not a populated node")
            self.ptp = PtpService(self, gm, self.ptp_settings.interval_ms)

        # harness hooks and global accounting
        self.on_frame_dequeued: Callable[[Frame], None] = lambda frame: None
        self._flow_drop_cb: Callable[[Frame, str], None] = lambda frame, cause: None
        self._flow_delivered_cb: Callable[[Frame], None] = lambda frame: None
        self.frames_offered = 0
        self.frames_delivered = 0
        self.drops_by_cause: dict[str, int] = {}
        self.route_traces: list[dict] = []
        self.route_trace_cap = 10_000

    def start(self) -> None:
        if self.ptp is not None:
            self.ptp.start()

    def node(self, node_id: NodeId) -> Node:
        return self.nodes[node_id]

    # -- frame construction ---------------------------------------------------

    def build_runtime_frame(self, src: Node, dst: NodeId, payload: bytes,
                            pcp: int) -> Frame:
        meta = FrameMeta(final_dst=dst, ttl=DEFAULT_TTL, local_origin=True,
                         route=[] if self.trace_routes else None)
        return Frame(dst_mac=mac_of(abs_coords(dst)), src_mac=src.mac, pcp=pcp,
                     ethertype=ETHERTYPE_RUNTIME, payload=pad_payload(payload),
                     meta=meta)

    def send_protocol_frame(self, src_id: NodeId, dst: NodeId, ethertype: int,
                            payload: bytes, pcp: int = 7) -> None:
        src = self.nodes[src_id]
        meta = FrameMeta(final_dst=dst, ttl=DEFAULT_TTL, local_origin=False,
                         route=[] if self.trace_routes else None)
        frame = Frame(dst_mac=mac_of(abs_coords(dst)), src_mac=src.mac, pcp=pcp,
                      ethertype=ethertype, payload=pad_payload(payload), meta=meta)
        src.send_frame(frame)

    # -- wire-level delivery ---------------------------------------------------

    def schedule_delivery(self, link: Link, src_id: NodeId, frame: Frame,
                          tx_start: int, tx_end: int) -> None:
        dst_id, dst_kind = link.other_end(src_id)
        arrival = tx_end + link.prop_delay_ns
        self.sim.at(arrival,
                    lambda: self._arrive(link, frame, tx_start, arrival, dst_id, dst_kind),
                    label=f"arrive:{dst_id}:{dst_kind.value}")

    def _arrive(self, link: Link, frame: Frame, tx_start: int, arrival: int,
                dst_id: NodeId, dst_kind: PortKind) -> None:
        if not link.up_throughout(tx_start, arrival):
            link.drops += 1
            self.count_drop(frame, "link_down")
            return
        self.nodes[dst_id].handle_rx(frame, dst_kind)

    def on_tx_start(self, port: NicPort, frame: Frame, tx_local: int) -> None:
        if frame.ethertype == ETHERTYPE_PTP and self.ptp is not None:
            self.ptp.on_tx_start(port.node_id, frame, tx_local)

    # -- accounting -------------------------------------------------------------

    def note_offered(self, frame: Frame) -> None:
        self.frames_offered += 1

    def count_drop(self, frame: Frame, cause: str) -> None:
        self.drops_by_cause[cause] = self.drops_by_cause.get(cause, 0) + 1
        self._flow_drop_cb(frame, cause)

    def count_frame_delivered(self, frame: Frame) -> None:
        self.frames_delivered += 1
        self._flow_delivered_cb(frame)

    def record_route(self, frame: Frame) -> None:
        if len(self.route_traces) >= self.route_trace_cap:
            return
        self.route_traces.append({
            "flow": frame.meta.flow_id,
            "msg_id": frame.meta.msg_id,
            "frag_index": frame.meta.frag_index,
            "route": [[str(n), p] for n, p in frame.meta.route],
            "delivered_to": str(frame.meta.final_dst),
        })

    def set_flow_hooks(self, drop_cb: Callable[[Frame, str], None],
                       delivered_cb: Callable[[Frame], None]) -> None:
        self._flow_drop_cb = drop_cb
        self._flow_delivered_cb = delivered_cb

    # -- fault injection -----------------------------------------------------

    def schedule_link_state(self, link: Link, up: bool, at: int) -> None:
        self.sim.at(at, lambda: self.topology.set_link_state(link, up, at),
                    label=f"link:{'up' if up else 'down'}")
