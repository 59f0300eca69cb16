"""Scenario files: schema, validation, defaults and the provenance digest.

JSON is the reference encoding.  Node ids appear either as 4-element
arrays [Grc, Gcc, Lrc, Lcc] or dotted strings "Grc.Gcc.Lrc.Lcc".  The
``grid`` section takes explicit dimensions (plus an optional ``populated``
subset) or the ``"preset": "tile_plus_two"`` lab shape.  Every loaded
scenario is fully validated: the topology must build, the priority map
must be acceptable, schedules must be committable, and flows and faults
must reference populated nodes and existing links.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .fabric import (
    DEFAULT_LINK_RATE_BPS,
    DEFAULT_PROP_DELAY_NS,
    NodeId,
    PortKind,
    Topology,
    build_topology,
    tile_plus_two_nodes,
)
from .nic import ScheduleEntry, validate_schedule
from .node import HostSettings, NicSettings, PtpSettings
from .qdisc import PriorityMap, validate_map
from .runtime import MAX_CHUNK


class ScenarioError(Exception):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


def _parse_node(value, path: str, errors: list[str]) -> NodeId | None:
    try:
        if isinstance(value, str):
            return NodeId.parse(value)
        if isinstance(value, (list, tuple)) and len(value) == 4:
            return NodeId(*(int(v) for v in value))
    except Exception:
        pass
    errors.append(f"{path}: {value!r} is not a node id")
    return None


@dataclass(slots=True)
class GridSpec:
    g_r: int = 1
    g_c: int = 1
    populated: list[NodeId] | None = None
    preset: str | None = None


@dataclass(slots=True)
class ScheduleSpec:
    node: NodeId
    port: PortKind
    window_us: int
    entries: tuple[tuple[int, int], ...]  # (queue_idx, slot_us)
    guardband_ns: int | None = None


@dataclass(slots=True)
class FaultSpec:
    a: NodeId
    b: NodeId
    time_ns: int
    up: bool


@dataclass(slots=True)
class FlowSpec:
    src: NodeId
    dst: NodeId
    pcp: int = 0
    start: int = 0
    stop: int | None = None  # None runs to the scenario end
    backlogged: bool = False
    offered_rate_bps: int | None = None
    frame_payload_bytes: int = MAX_CHUNK


@dataclass(slots=True)
class Scenario:
    grid: GridSpec = field(default_factory=GridSpec)
    rate_bps: int = DEFAULT_LINK_RATE_BPS
    prop_delay_ns: int = DEFAULT_PROP_DELAY_NS
    host: HostSettings = field(default_factory=HostSettings)
    ptp: PtpSettings = field(default_factory=PtpSettings)
    drift_spec: object = None  # None (seeded 10 ppm), number, or mapping
    nic: NicSettings = field(default_factory=NicSettings)
    priority_map: PriorityMap = field(default_factory=PriorityMap)
    schedules: list[ScheduleSpec] = field(default_factory=list)
    faults: list[FaultSpec] = field(default_factory=list)
    flows: list[FlowSpec] = field(default_factory=list)
    duration_ns: int = 1_000_000_000
    seed: int = 0
    trace: bool = False

    def build_fabric(self) -> Topology:
        if self.grid.preset == "tile_plus_two":
            return tile_plus_two_nodes(self.rate_bps, self.prop_delay_ns)
        return build_topology(self.grid.g_r, self.grid.g_c,
                              self.rate_bps, self.prop_delay_ns,
                              populated=self.grid.populated)

    def canonical_dict(self) -> dict:
        """Defaults-filled dict with stable shapes, used for the digest."""
        return {
            "grid": {
                "G_r": self.grid.g_r, "G_c": self.grid.g_c,
                "populated": ([str(n) for n in self.grid.populated]
                              if self.grid.populated is not None else None),
                "preset": self.grid.preset,
            },
            "link": {"rate_bps": self.rate_bps, "prop_delay_ns": self.prop_delay_ns},
            "host": {"injection_cap_bps": self.host.injection_cap_bps,
                     "processing_delay_ns": self.host.processing_delay_ns},
            "ptp": {"enabled": self.ptp.enabled,
                    "grandmaster": str(self.ptp.grandmaster) if self.ptp.grandmaster else None,
                    "interval_ms": self.ptp.interval_ms,
                    "quantization_ns": self.ptp.quantization_ns,
                    "convergence_rounds": self.ptp.convergence_rounds,
                    "drift_ppm": self.drift_spec},
            "nic": {"num_tx_queues": self.nic.num_tx_queues,
                    "time_aware_queues": list(self.nic.time_aware_queues),
                    "queue_depth": self.nic.queue_depth},
            "priority_map": {"num_classes": self.priority_map.num_classes,
                             "prio_to_tc": list(self.priority_map.prio_to_tc),
                             "tc_to_queue": list(self.priority_map.tc_to_queue)},
            "schedules": [{"node": str(s.node), "port": s.port.value,
                           "window_us": s.window_us,
                           "entries": [list(e) for e in s.entries],
                           "guardband_ns": s.guardband_ns} for s in self.schedules],
            "faults": [{"a": str(f.a), "b": str(f.b), "time_ns": f.time_ns,
                        "state": "up" if f.up else "down"} for f in self.faults],
            "flows": [{"src": str(f.src), "dst": str(f.dst), "pcp": f.pcp,
                       "start": f.start, "stop": f.stop,
                       "backlogged": f.backlogged,
                       "offered_rate_bps": f.offered_rate_bps,
                       "frame_payload_bytes": f.frame_payload_bytes} for f in self.flows],
            "duration_ns": self.duration_ns,
            "seed": self.seed,
            "trace": self.trace,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def resolve_drift(self, topology: Topology, rng) -> dict[NodeId, float]:
        spec = self.drift_spec
        out: dict[NodeId, float] = {}
        if spec is None:
            spec = {"seeded_max_ppm": 10.0}
        if isinstance(spec, (int, float)):
            return {n: float(spec) for n in topology.nodes}
        if "seeded_max_ppm" in spec:
            limit = float(spec["seeded_max_ppm"])
            for n in topology.nodes:
                out[n] = rng.stream("drift", str(n)).uniform(-limit, limit)
            return out
        default = float(spec.get("default", 0.0))
        for n in topology.nodes:
            out[n] = float(spec.get(str(n), default))
        return out


def parse_scenario(doc: dict) -> Scenario:
    """Validate a decoded scenario document; raises ScenarioError."""
    errors: list[str] = []
    sc = Scenario()

    grid = doc.get("grid", {})
    if grid.get("preset") == "tile_plus_two":
        sc.grid = GridSpec(1, 3, None, "tile_plus_two")
    elif grid.get("preset"):
        errors.append(f"grid.preset: unknown preset {grid['preset']!r}")
    else:
        g_r = int(grid.get("G_r", 1))
        g_c = int(grid.get("G_c", 1))
        if g_r < 1 or g_c < 1:
            errors.append(f"grid: dimensions {g_r}x{g_c} must be >= 1")
            g_r, g_c = max(g_r, 1), max(g_c, 1)
        populated = None
        if grid.get("populated") is not None:
            populated = []
            for i, v in enumerate(grid["populated"]):
                n = _parse_node(v, f"grid.populated[{i}]", errors)
                if n is not None:
                    populated.append(n)
        sc.grid = GridSpec(g_r, g_c, populated, None)

    link = doc.get("link", {})
    sc.rate_bps = int(link.get("rate_bps", DEFAULT_LINK_RATE_BPS))
    sc.prop_delay_ns = int(link.get("prop_delay_ns", DEFAULT_PROP_DELAY_NS))
    if sc.rate_bps <= 0:
        errors.append(f"link.rate_bps: {sc.rate_bps} must be > 0")
    if sc.prop_delay_ns < 0:
        errors.append(f"link.prop_delay_ns: {sc.prop_delay_ns} must be >= 0")

    host = doc.get("host", {})
    cap = host.get("injection_cap_bps", 2_250_000_000)
    sc.host = HostSettings(
        injection_cap_bps=None if cap in (None, 0) else int(cap),
        processing_delay_ns=int(host.get("processing_delay_ns", 10_000)))

    ptp = doc.get("ptp", {})
    gm = None
    if ptp.get("grandmaster") is not None:
        gm = _parse_node(ptp["grandmaster"], "ptp.grandmaster", errors)
    sc.ptp = PtpSettings(
        enabled=bool(ptp.get("enabled", True)),
        grandmaster=gm,
        interval_ms=int(ptp.get("interval_ms", 250)),
        quantization_ns=int(ptp.get("quantization_ns", 8)),
        convergence_rounds=int(ptp.get("convergence_rounds", 10)))
    sc.drift_spec = ptp.get("drift_ppm")
    if sc.ptp.interval_ms < 1:
        errors.append(f"ptp.interval_ms: {sc.ptp.interval_ms} must be >= 1")
    if sc.ptp.quantization_ns < 1:
        errors.append(f"ptp.quantization_ns: {sc.ptp.quantization_ns} must be >= 1")

    nic = doc.get("nic", {})
    sc.nic = NicSettings(
        num_tx_queues=int(nic.get("num_tx_queues", 8)),
        time_aware_queues=tuple(nic.get("time_aware_queues", (0, 1, 2))),
        queue_depth=int(nic.get("queue_depth", 1024)))
    if sc.nic.num_tx_queues < 1:
        errors.append(f"nic.num_tx_queues: {sc.nic.num_tx_queues} must be >= 1")
    for q in sc.nic.time_aware_queues:
        if not 0 <= q < sc.nic.num_tx_queues:
            errors.append(f"nic.time_aware_queues: queue {q} does not exist")

    pm = doc.get("priority_map", {})
    sc.priority_map = PriorityMap(
        num_classes=int(pm.get("num_classes", 3)),
        prio_to_tc=tuple(pm.get("prio_to_tc", (0, 1, 2))),
        tc_to_queue=tuple(pm.get("tc_to_queue", (0, 1, 2))))
    for e in validate_map(sc.priority_map, sc.nic.num_tx_queues, sc.nic.time_aware_queues):
        errors.append(f"priority_map: {e}")

    sc.duration_ns = int(doc.get("duration_ns", 1_000_000_000))
    if sc.duration_ns < 1:
        errors.append(f"duration_ns: {sc.duration_ns} must be >= 1")
    sc.seed = int(doc.get("seed", 0))
    sc.trace = bool(doc.get("trace", False))

    if errors:
        raise ScenarioError(errors)

    topo = sc.build_fabric()
    if sc.ptp.enabled and sc.ptp.grandmaster is not None and not topo.has_node(sc.ptp.grandmaster):
        errors.append(f"ptp.grandmaster: {sc.ptp.grandmaster} is not a populated node")

    for i, s in enumerate(doc.get("schedules", [])):
        path = f"schedules[{i}]"
        node = _parse_node(s.get("node"), f"{path}.node", errors)
        try:
            port = PortKind(s.get("port", "external"))
        except ValueError:
            errors.append(f"{path}.port: {s.get('port')!r} is not a port kind")
            continue
        if node is None:
            continue
        if not topo.has_node(node):
            errors.append(f"{path}.node: {node} is not populated")
            continue
        if topo.port(node, port).link is None:
            errors.append(f"{path}: node {node} port {port.value} is not connected")
            continue
        entries = tuple((int(q), int(slot)) for q, slot in s.get("entries", []))
        window = int(s.get("window_us", 100))
        guard = s.get("guardband_ns")
        guard_val = int(guard) if guard is not None else None
        table_entries = tuple(ScheduleEntry(q, slot) for q, slot in entries)
        for e in validate_schedule(window, table_entries,
                                   guard_val if guard_val is not None else 0,
                                   sc.nic.num_tx_queues):
            errors.append(f"{path} (node {node} port {port.value}): {e}")
        sc.schedules.append(ScheduleSpec(node, port, window, entries, guard_val))

    for i, f in enumerate(doc.get("faults", [])):
        path = f"faults[{i}]"
        a = _parse_node(f.get("a"), f"{path}.a", errors)
        b = _parse_node(f.get("b"), f"{path}.b", errors)
        if a is None or b is None:
            continue
        if topo.link_between(a, b) is None:
            errors.append(f"{path}: no link between {a} and {b}")
            continue
        t = int(f.get("time_ns", 0))
        if not 0 <= t <= sc.duration_ns:
            errors.append(f"{path}.time_ns: {t} outside the run duration")
        state = f.get("state", "down")
        if state not in ("up", "down"):
            errors.append(f"{path}.state: {state!r} must be 'up' or 'down'")
            continue
        sc.faults.append(FaultSpec(a, b, t, state == "up"))

    for i, f in enumerate(doc.get("flows", [])):
        path = f"flows[{i}]"
        src = _parse_node(f.get("src"), f"{path}.src", errors)
        dst = _parse_node(f.get("dst"), f"{path}.dst", errors)
        if src is None or dst is None:
            continue
        if not topo.has_node(src):
            errors.append(f"{path}.src: {src} is not populated")
            continue
        if not topo.has_node(dst):
            errors.append(f"{path}.dst: {dst} is not populated")
            continue
        if src == dst:
            errors.append(f"{path}: src and dst must differ")
            continue
        pcp = int(f.get("pcp", 0))
        if not 0 <= pcp <= 7:
            errors.append(f"{path}.pcp: {pcp} out of 0..7")
        start = int(f.get("start", 0))
        stop = f.get("stop")
        stop_val = int(stop) if stop is not None else None
        if start < 0 or start >= sc.duration_ns:
            errors.append(f"{path}.start: {start} outside the run duration")
        if stop_val is not None and not start < stop_val <= sc.duration_ns:
            errors.append(f"{path}.stop: {stop_val} must be in (start, duration]")
        backlogged = bool(f.get("backlogged", False))
        rate = f.get("offered_rate_bps")
        rate_val = int(rate) if rate is not None else None
        if backlogged == (rate_val is not None):
            errors.append(f"{path}: exactly one of backlogged/offered_rate_bps required")
        if rate_val is not None and rate_val <= 0:
            errors.append(f"{path}.offered_rate_bps: must be > 0")
        payload = int(f.get("frame_payload_bytes", MAX_CHUNK))
        if not 1 <= payload <= MAX_CHUNK:
            errors.append(f"{path}.frame_payload_bytes: {payload} not in 1..{MAX_CHUNK}")
        sc.flows.append(FlowSpec(src, dst, pcp, start, stop_val, backlogged,
                                 rate_val, payload))

    if errors:
        raise ScenarioError(errors)
    return sc


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: not valid JSON ({exc})"]) from exc
    if not isinstance(doc, dict):
        raise ScenarioError([f"{path}: top level must be an object"])
    return parse_scenario(doc)
