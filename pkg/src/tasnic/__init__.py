"""Deterministic simulator for time-aware NIC scheduling on a tiled torus fabric."""

from .clock import LocalClock, ServoState, apply_servo, ptp_offset_estimate
from .engine import RngStreams, SchedulingError, Simulator
from .fabric import (
    GridCoord,
    Link,
    NodeId,
    PortKind,
    Topology,
    abs_coords,
    build_topology,
    decode_id,
    encode_id,
    ip_of,
    mac_of,
    tile_plus_two_nodes,
)
from .frame import Frame, crc32, serialization_ticks, serialization_time_ns
from .harness import RunResult, build_network, emit_report, run_scenario
from .metrics import FlowRecorder
from .nic import NicPort, ScheduleEntry, ScheduleTable, TokenBucket, TxQueue
from .node import HostSettings, Network, NicSettings, Node, PtpSettings
from .qdisc import PriorityMap, classify, validate_map
from .routing import ForwardDecision, Verdict, next_hop
from .runtime import FragmentHeader, NodeRuntime, ScheduleConfig
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"
