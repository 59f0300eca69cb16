"""Hierarchical fabric: a 2D-torus of 2x2 compute tiles.

Every node is addressed by the tuple <Grc, Gcc, Lrc, Lcc> (tile row/column,
local row/column within the tile).  The absolute grid position <Rc, Cc>
derives the MAC (02:00:00:00:Rc:Cc) and IP (10.0.Rc.Cc/16).  Within a tile
each node has two intra-tile data ports plus one external port whose
direction follows the node's local position: (0,0) west, (0,1) north,
(1,0) south, (1,1) east.  External links wrap torus-wise between adjacent
tiles.  The management port is out-of-band and carries no simulated
traffic.

Topologies may be built partially populated (a subset of node positions);
links touching an absent node simply do not exist, and the routing layer
treats them as permanently down.  That is how the lab shape "one full tile
plus two single nodes on the horizontal axis" is expressed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .engine import SimTime


class AddressError(Exception):
    """Coordinate or identifier out of the encodable range."""


class PortKind(Enum):
    INTRA_H = "intra_h"
    INTRA_V = "intra_v"
    EXTERNAL = "external"
    MGMT = "mgmt"


DATA_PORT_KINDS = (PortKind.INTRA_H, PortKind.INTRA_V, PortKind.EXTERNAL)

# external port direction owned by each local position
EXTERNAL_DIRECTION = {(0, 0): "W", (0, 1): "N", (1, 0): "S", (1, 1): "E"}
OWNER_OF_DIRECTION = {d: pos for pos, d in EXTERNAL_DIRECTION.items()}

DEFAULT_LINK_RATE_BPS = 10_000_000_000
DEFAULT_PROP_DELAY_NS = 500


@dataclass(slots=True, frozen=True, order=True)
class NodeId:
    grc: int
    gcc: int
    lrc: int
    lcc: int

    def __str__(self) -> str:
        return f"{self.grc}.{self.gcc}.{self.lrc}.{self.lcc}"

    @staticmethod
    def parse(text: str) -> "NodeId":
        parts = text.split(".")
        if len(parts) != 4:
            raise AddressError(f"bad node id {text!r}")
        return NodeId(*(int(p) for p in parts))


@dataclass(slots=True, frozen=True)
class GridCoord:
    rc: int  # absolute row
    cc: int  # absolute column


def encode_id(node_id: NodeId) -> int:
    """Pack the id tuple into 32 bits, one byte per field."""
    for name, value in (("grc", node_id.grc), ("gcc", node_id.gcc),
                        ("lrc", node_id.lrc), ("lcc", node_id.lcc)):
        if not 0 <= value <= 255:
            raise AddressError(f"{name}={value} does not fit one byte")
    return (node_id.grc << 24) | (node_id.gcc << 16) | (node_id.lrc << 8) | node_id.lcc


def decode_id(value: int) -> NodeId:
    if not 0 <= value <= 0xFFFFFFFF:
        raise AddressError(f"encoded id {value:#x} is not a u32")
    return NodeId((value >> 24) & 0xFF, (value >> 16) & 0xFF, (value >> 8) & 0xFF, value & 0xFF)


def abs_coords(node_id: NodeId) -> GridCoord:
    return GridCoord(node_id.grc * 2 + node_id.lrc, node_id.gcc * 2 + node_id.lcc)


def mac_of(coord: GridCoord) -> bytes:
    """Locally-administered MAC 02:00:00:00:Rc:Cc."""
    if not (0 <= coord.rc <= 255 and 0 <= coord.cc <= 255):
        raise AddressError(f"coordinate {coord} exceeds one byte")
    return bytes((0x02, 0x00, 0x00, 0x00, coord.rc, coord.cc))


def ip_of(coord: GridCoord) -> tuple[str, str]:
    """IP 10.0.Rc.Cc with the /16 mask selecting the two low bytes."""
    if not (0 <= coord.rc <= 255 and 0 <= coord.cc <= 255):
        raise AddressError(f"coordinate {coord} exceeds one byte")
    return f"10.0.{coord.rc}.{coord.cc}", "255.255.0.0"


def coord_of_mac(mac: bytes) -> GridCoord:
    if len(mac) != 6 or mac[:4] != bytes((0x02, 0, 0, 0)):
        raise AddressError(f"mac {mac.hex(':')} is not fabric-derived")
    return GridCoord(mac[4], mac[5])


def format_mac(mac: bytes) -> str:
    return ":".join(f"{b:02x}" for b in mac)


@dataclass(slots=True)
class Link:
    """Full-duplex point-to-point segment between two data ports."""

    a: tuple[NodeId, PortKind]
    b: tuple[NodeId, PortKind]
    rate_bps: int = DEFAULT_LINK_RATE_BPS
    prop_delay_ns: int = DEFAULT_PROP_DELAY_NS
    up: bool = True
    # (time, up) transitions in event order; consulted for in-flight drops
    transitions: list[tuple[SimTime, bool]] = field(default_factory=list)
    drops: int = 0
    tx_frames: int = 0

    def other_end(self, node_id: NodeId) -> tuple[NodeId, PortKind]:
        if node_id == self.a[0]:
            return self.b
        if node_id == self.b[0]:
            return self.a
        raise ValueError(f"{node_id} is not an endpoint of this link")

    def set_state(self, up: bool, at: SimTime) -> None:
        self.transitions.append((at, up))
        self.up = up

    def up_throughout(self, start: SimTime, end: SimTime) -> bool:
        """True when the link was continuously up over [start, end]."""
        state = True
        last_before = None
        for t, up in self.transitions:
            if t <= start:
                last_before = up
            elif t <= end and not up:
                return False
        if last_before is not None and not last_before:
            return False
        return True


@dataclass(slots=True)
class Port:
    kind: PortKind
    link: Link | None = None  # None: unconnected (absent peer or mgmt)

    @property
    def connected(self) -> bool:
        return self.link is not None


class Topology:
    """Immutable wiring (nodes, ports, links); only link state mutates."""

    def __init__(self, g_r: int, g_c: int, populated: list[NodeId],
                 rate_bps: int, prop_delay_ns: int):
        self.g_r = g_r
        self.g_c = g_c
        self.n_r = 2 * g_r
        self.n_c = 2 * g_c
        self.nodes: list[NodeId] = sorted(populated)
        self._present = set(self.nodes)
        self.ports: dict[NodeId, dict[PortKind, Port]] = {}
        self.links: list[Link] = []
        self._link_by_ends: dict[frozenset, Link] = {}
        self._by_coord = {abs_coords(n): n for n in self.nodes}
        self._rate = rate_bps
        self._prop = prop_delay_ns
        for n in self.nodes:
            self.ports[n] = {k: Port(k) for k in (*DATA_PORT_KINDS, PortKind.MGMT)}

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self._present

    def node_at(self, coord: GridCoord) -> NodeId | None:
        return self._by_coord.get(coord)

    def port(self, node_id: NodeId, kind: PortKind) -> Port:
        return self.ports[node_id][kind]

    def link_between(self, a: NodeId, b: NodeId) -> Link | None:
        return self._link_by_ends.get(frozenset((a, b)))

    def peer_of(self, node_id: NodeId, kind: PortKind) -> tuple[NodeId, PortKind] | None:
        port = self.ports[node_id][kind]
        if port.link is None:
            return None
        return port.link.other_end(node_id)

    def _wire(self, a: NodeId, pa: PortKind, b: NodeId, pb: PortKind) -> None:
        if not (self.has_node(a) and self.has_node(b)):
            return
        link = Link((a, pa), (b, pb), self._rate, self._prop)
        self.ports[a][pa].link = link
        self.ports[b][pb].link = link
        self.links.append(link)
        self._link_by_ends[frozenset((a, b))] = link

    def intra_h_neighbor(self, n: NodeId) -> NodeId:
        return NodeId(n.grc, n.gcc, n.lrc, 1 - n.lcc)

    def intra_v_neighbor(self, n: NodeId) -> NodeId:
        return NodeId(n.grc, n.gcc, 1 - n.lrc, n.lcc)

    def wrap_link(self, grc: int, gcc: int, direction: str) -> Link | None:
        """The external link a frame crosses leaving tile (grc, gcc) via ``direction``."""
        owner_pos = OWNER_OF_DIRECTION[direction]
        owner = NodeId(grc, gcc, *owner_pos)
        if not self.has_node(owner):
            return None
        return self.ports[owner][PortKind.EXTERNAL].link

    def set_link_state(self, link: Link, up: bool, at: SimTime) -> None:
        link.set_state(up, at)

    def echo(self) -> str:
        """Stable one-line-per-port wiring dump for debugging."""
        lines = []
        for n in self.nodes:
            coord = abs_coords(n)
            ip, mask = ip_of(coord)
            for kind in (*DATA_PORT_KINDS, PortKind.MGMT):
                port = self.ports[n][kind]
                if kind == PortKind.MGMT:
                    peer = "mgmt(out-of-band)"
                elif port.link is None:
                    peer = "unconnected"
                else:
                    pn, pk = port.link.other_end(n)
                    peer = f"{pn}:{pk.value} rate={port.link.rate_bps} prop_ns={port.link.prop_delay_ns}"
                lines.append(
                    f"node {n} abs=({coord.rc},{coord.cc}) mac={format_mac(mac_of(coord))} "
                    f"ip={ip}/{mask} port={kind.value} peer={peer}"
                )
        return "\n".join(lines)


def all_node_ids(g_r: int, g_c: int) -> list[NodeId]:
    return [NodeId(gr, gc, lr, lc)
            for gr in range(g_r) for gc in range(g_c)
            for lr in (0, 1) for lc in (0, 1)]


def build_topology(g_r: int, g_c: int,
                   rate_bps: int = DEFAULT_LINK_RATE_BPS,
                   prop_delay_ns: int = DEFAULT_PROP_DELAY_NS,
                   populated: Iterable[NodeId] | None = None) -> Topology:
    """Build the tile grid; ``populated`` restricts which positions exist."""
    if g_r < 1 or g_c < 1:
        raise ValueError("grid dimensions must be >= 1")
    universe = all_node_ids(g_r, g_c)
    if populated is None:
        nodes = universe
    else:
        nodes = sorted(set(populated))
        unknown = [n for n in nodes if n not in set(universe)]
        if unknown:
            raise AddressError(f"populated nodes outside the {g_r}x{g_c} grid: {unknown}")
    topo = Topology(g_r, g_c, nodes, rate_bps, prop_delay_ns)

    for gr in range(g_r):
        for gc in range(g_c):
            # intra-tile mesh: horizontal pairs then vertical pairs
            for lr in (0, 1):
                topo._wire(NodeId(gr, gc, lr, 0), PortKind.INTRA_H,
                           NodeId(gr, gc, lr, 1), PortKind.INTRA_H)
            for lc in (0, 1):
                topo._wire(NodeId(gr, gc, 0, lc), PortKind.INTRA_V,
                           NodeId(gr, gc, 1, lc), PortKind.INTRA_V)
            # torus wraps: east-of-(gr,gc) to west-of-(gr,gc+1), south to north below
            east_owner = NodeId(gr, gc, *OWNER_OF_DIRECTION["E"])
            west_owner = NodeId(gr, (gc + 1) % g_c, *OWNER_OF_DIRECTION["W"])
            topo._wire(east_owner, PortKind.EXTERNAL, west_owner, PortKind.EXTERNAL)
            south_owner = NodeId(gr, gc, *OWNER_OF_DIRECTION["S"])
            north_owner = NodeId((gr + 1) % g_r, gc, *OWNER_OF_DIRECTION["N"])
            topo._wire(south_owner, PortKind.EXTERNAL, north_owner, PortKind.EXTERNAL)
    return topo


def tile_plus_two_nodes(rate_bps: int = DEFAULT_LINK_RATE_BPS,
                        prop_delay_ns: int = DEFAULT_PROP_DELAY_NS) -> Topology:
    """The lab shape: one full tile flanked by two single nodes horizontally.

    Expressed as a 1x3 tile grid where only the middle tile is complete;
    the left neighbor contributes its east-port node and the right neighbor
    its west-port node.
    """
    populated = [NodeId(0, 0, 1, 1), NodeId(0, 2, 0, 0)]
    populated += [NodeId(0, 1, lr, lc) for lr in (0, 1) for lc in (0, 1)]
    return build_topology(1, 3, rate_bps, prop_delay_ns, populated)
