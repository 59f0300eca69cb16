"""Traffic harness: open-loop generators, scenario execution, reports.

Flows send single-frame messages through the node runtime.  A backlogged
flow keeps a fixed number of frames outstanding in its egress queue
(refilled synchronously as the scheduler drains them), which is how
scheduler shares are measured; a rate-driven flow emits frames on an exact
integer schedule.  Reports are deterministic: the same scenario and seed
produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .engine import TICKS_PER_MS, Simulator
from .fabric import NodeId, encode_id
from .frame import Frame
from .metrics import CSV_HEADER, FlowRecorder, csv_row
from .node import Network
from .runtime import FRAGMENT_HEADER_BYTES, Message, ScheduleConfig
from .scenario import Scenario

BACKLOG_OUTSTANDING = 16
_PATTERN = bytes(range(256)) * 8  # shared payload content for generated traffic


def _payload(size: int) -> bytes:
    reps = -(-size // len(_PATTERN))
    return (_PATTERN * reps)[:size]


@dataclass(slots=True)
class _FlowGen:
    network: Network
    recorder: FlowRecorder
    flow_id: int
    src: NodeId
    dst_encoded: int
    pcp: int
    stop_ns: int
    payload: bytes
    backlogged: bool
    rate_bps: int | None = None
    emitted: int = 0
    active: bool = False
    _t0: int = 0

    def begin(self) -> None:
        self.active = True
        self._t0 = self.network.sim.now
        if self.backlogged:
            for _ in range(BACKLOG_OUTSTANDING):
                self._send_one()
        else:
            self._emit_paced()

    def _send_one(self) -> None:
        if self.network.sim.now >= self.stop_ns:
            self.active = False
            return
        runtime = self.network.nodes[self.src].runtime
        runtime.send_msg(self.payload, self.dst_encoded, self.pcp, flow_id=self.flow_id)
        self.emitted += 1

    def on_dequeued(self) -> None:
        if self.active and self.backlogged:
            self._send_one()

    def _emit_paced(self) -> None:
        if self.network.sim.now >= self.stop_ns:
            self.active = False
            return
        self._send_one()
        wire_bits = self.frame_wire_bytes() * 8
        next_t = self._t0 + (self.emitted * wire_bits * 1_000_000_000) // self.rate_bps
        if next_t < self.stop_ns:
            self.network.sim.at(next_t, self._emit_paced, label=f"flowgen:{self.flow_id}")

    def frame_wire_bytes(self) -> int:
        body = FRAGMENT_HEADER_BYTES + len(self.payload)
        return 18 + max(body, 46) + 4


@dataclass(slots=True)
class PtpSlaveReport:
    samples: int = 0
    max_abs_offset_ns: float = 0.0


@dataclass(slots=True)
class RunResult:
    scenario: Scenario
    network: Network
    recorders: list[FlowRecorder]
    ptp_offsets: dict[NodeId, PtpSlaveReport]
    events_processed: int

    def report(self) -> dict:
        net = self.network
        nodes = {}
        for node_id in sorted(net.nodes):
            node = net.nodes[node_id]
            nodes[str(node_id)] = {
                "rx_frames": node.counters.rx_frames,
                "delivered_local": node.counters.delivered_local,
                "forwarded": node.counters.forwarded,
                "drops": dict(sorted(node.counters.drops.items())),
                "tx_frames": {k.value: p.tx_frames for k, p in sorted(
                    node.ports.items(), key=lambda kv: kv[0].value)},
            }
        links = []
        for link in net.topology.links:
            links.append({
                "a": f"{link.a[0]}:{link.a[1].value}",
                "b": f"{link.b[0]}:{link.b[1].value}",
                "tx_frames": link.tx_frames,
                "drops": link.drops,
            })
        ptp = {"enabled": net.ptp is not None}
        if net.ptp is not None:
            ptp["grandmaster"] = str(net.ptp.grandmaster)
            ptp["slaves"] = {
                str(slave): {
                    "rounds_completed": state.rounds_completed,
                    "post_convergence_samples": self.ptp_offsets[slave].samples,
                    "max_abs_offset_ns": round(self.ptp_offsets[slave].max_abs_offset_ns, 3),
                }
                for slave, state in sorted(net.ptp.slaves.items())
            }
        return {
            "scenario_digest": self.scenario.digest(),
            "seed": self.scenario.seed,
            "duration_ns": self.scenario.duration_ns,
            "flows": [r.summary() for r in self.recorders],
            "nodes": nodes,
            "links": links,
            "ptp": ptp,
            "totals": {
                "events_processed": self.events_processed,
                "frames_offered": net.frames_offered,
                "frames_delivered": net.frames_delivered,
                "drops_by_cause": dict(sorted(net.drops_by_cause.items())),
            },
        }


def build_network(scenario: Scenario, trace_tx: bool = False) -> Network:
    topo = scenario.build_fabric()
    sim = Simulator()
    net = Network(
        topo, sim,
        nic=scenario.nic, host=scenario.host, ptp=scenario.ptp,
        priority_map=scenario.priority_map,
        drift_by_node=None, seed=scenario.seed,
        trace_routes=scenario.trace, trace_tx=trace_tx or scenario.trace)
    drift = scenario.resolve_drift(topo, net.rng)
    for node_id, node in net.nodes.items():
        node.clock.drift_ppm = drift.get(node_id, 0.0)
    return net


def run_scenario(scenario: Scenario, trace_tx: bool = False) -> RunResult:
    net = build_network(scenario, trace_tx=trace_tx)
    sim = net.sim

    recorders: list[FlowRecorder] = []
    gens: list[_FlowGen] = []
    by_flow: dict[int, FlowRecorder] = {}
    for i, f in enumerate(scenario.flows):
        stop = f.stop if f.stop is not None else scenario.duration_ns
        rec = FlowRecorder(i, str(f.src), str(f.dst), f.pcp, f.start, stop)
        recorders.append(rec)
        by_flow[i] = rec
        gen = _FlowGen(net, rec, i, f.src, encode_id(f.dst), f.pcp, stop,
                       _payload(f.frame_payload_bytes), f.backlogged,
                       f.offered_rate_bps)
        gens.append(gen)
        sim.at(f.start, gen.begin, label=f"flowstart:{i}")

    def on_offered(frame: Frame) -> None:
        if frame.meta.flow_id is not None:
            by_flow[frame.meta.flow_id].on_offered()
    orig_note = net.note_offered

    def note_offered(frame: Frame) -> None:
        orig_note(frame)
        on_offered(frame)
    net.note_offered = note_offered  # type: ignore[method-assign]

    def on_drop(frame: Frame, cause: str) -> None:
        if frame.meta.flow_id is not None:
            by_flow[frame.meta.flow_id].on_drop(cause)

    def on_delivered(frame: Frame) -> None:
        if frame.meta.flow_id is not None:
            by_flow[frame.meta.flow_id].on_frame_delivered()
    net.set_flow_hooks(on_drop, on_delivered)

    def on_dequeued(frame: Frame) -> None:
        if (frame.meta.flow_id is not None and frame.meta.local_origin
                and frame.meta.hops == 1):
            gens[frame.meta.flow_id].on_dequeued()
    net.on_frame_dequeued = on_dequeued  # type: ignore[method-assign]

    def make_sink(node_id: NodeId):
        def sink(msg: Message) -> None:
            if msg.flow_id is not None:
                by_flow[msg.flow_id].on_message(msg)
        return sink
    for node_id, node in net.nodes.items():
        node.runtime.message_sink = make_sink(node_id)

    for sched in scenario.schedules:
        net.nodes[sched.node].runtime.set_conf(ScheduleConfig(
            sched.port, sched.window_us, sched.entries, sched.guardband_ns))

    for fault in scenario.faults:
        link = net.topology.link_between(fault.a, fault.b)
        net.schedule_link_state(link, fault.up, fault.time_ns)

    ptp_offsets: dict[NodeId, PtpSlaveReport] = {}
    if net.ptp is not None:
        for slave in net.ptp.slaves:
            ptp_offsets[slave] = PtpSlaveReport()
        horizon = (scenario.ptp.convergence_rounds + 1) * scenario.ptp.interval_ms * TICKS_PER_MS
        if horizon < scenario.duration_ns:
            def sample() -> None:
                now = sim.now
                for slave, rep in ptp_offsets.items():
                    off = net.ptp.true_offset_ns(slave, now)
                    rep.samples += 1
                    if abs(off) > rep.max_abs_offset_ns:
                        rep.max_abs_offset_ns = abs(off)
                if now + TICKS_PER_MS <= scenario.duration_ns:
                    sim.after(TICKS_PER_MS, sample, label="ptp-sample")
            sim.at(horizon, sample, label="ptp-sample")

    net.start()
    stats = sim.run_until(scenario.duration_ns)
    return RunResult(scenario, net, recorders, ptp_offsets, stats.events_processed)


def emit_report(result: RunResult, fmt: str, out_dir: str | Path) -> list[Path]:
    """Write report files with stable content; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = result.report()
    written: list[Path] = []
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        written.append(path)
    elif fmt == "csv":
        path = out / "flows.csv"
        rows = [CSV_HEADER] + [csv_row(s) for s in report["flows"]]
        path.write_text("\n".join(rows) + "\n")
        written.append(path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if result.scenario.trace:
        trace_path = out / "traces.jsonl"
        lines = []
        for node_id in sorted(result.network.nodes):
            node = result.network.nodes[node_id]
            for kind in sorted(node.ports, key=lambda k: k.value):
                port = node.ports[kind]
                if port.trace is None:
                    continue
                for rec in port.trace:
                    lines.append(json.dumps({
                        "node": str(node_id), "port": kind.value,
                        "true_start": rec.true_start, "local_start": rec.local_start,
                        "queue": rec.queue_idx, "wire_bytes": rec.wire_bytes,
                        "ser_ns": rec.ser_ns, "flow": rec.flow_id,
                    }, sort_keys=True))
        trace_path.write_text("\n".join(lines) + ("\n" if lines else ""))
        written.append(trace_path)
        routes_path = out / "routes.jsonl"
        route_lines = [json.dumps(r, sort_keys=True) for r in result.network.route_traces]
        routes_path.write_text("\n".join(route_lines) + ("\n" if route_lines else ""))
        written.append(routes_path)
    return written
