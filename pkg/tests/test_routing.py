from collections import deque

import pytest

from tasnic.fabric import NodeId, PortKind, build_topology, tile_plus_two_nodes
from tasnic.routing import Verdict, next_hop

# ---------------------------------------------------------------------------
# Independent straight-line reimplementation of the routing rule, used as the
# oracle.  Table-driven, sharing no code with the implementation.
# ---------------------------------------------------------------------------

_OWNER = {"E": (1, 1), "W": (0, 0), "N": (0, 1), "S": (1, 0)}


def oracle_port(topo, cur, dst):
    """Expected egress port kind on a fault-free fabric; None means local."""
    if cur == dst:
        return None
    if dst.gcc != cur.gcc:
        east = (dst.gcc - cur.gcc) % topo.g_c
        west = (cur.gcc - dst.gcc) % topo.g_c
        direction = "E" if east <= west else "W"
    elif dst.grc != cur.grc:
        south = (dst.grc - cur.grc) % topo.g_r
        north = (cur.grc - dst.grc) % topo.g_r
        direction = "S" if south <= north else "N"
    else:
        if cur.lcc != dst.lcc:
            return PortKind.INTRA_H
        return PortKind.INTRA_V
    owner_row, owner_col = _OWNER[direction]
    if cur.lrc == owner_row and cur.lcc == owner_col:
        return PortKind.EXTERNAL
    if cur.lcc != owner_col:
        return PortKind.INTRA_H
    return PortKind.INTRA_V


def walk(topo, src, dst, ttl=64):
    """Iterate next_hop; returns the node path or None on loop/drop."""
    cur, ingress = src, None
    visited = set()
    path = [cur]
    for _ in range(ttl):
        decision = next_hop(topo, cur, dst, ingress)
        if decision.verdict == Verdict.LOCAL:
            return path
        if decision.verdict == Verdict.DROP:
            return None
        key = (cur, decision.out_port)
        if key in visited:
            return None
        visited.add(key)
        peer = topo.peer_of(cur, decision.out_port)
        if peer is None:
            return None
        cur, ingress = peer
        path.append(cur)
    return None


def bfs_distance(topo, src, dst):
    dist = {src: 0}
    frontier = deque([src])
    while frontier:
        n = frontier.popleft()
        if n == dst:
            return dist[n]
        for kind in topo.ports[n]:
            port = topo.ports[n][kind]
            if port.link is None or not port.link.up:
                continue
            peer, _ = port.link.other_end(n)
            if peer not in dist:
                dist[peer] = dist[n] + 1
                frontier.append(peer)
    return None


# ---------------------------------------------------------------------------


def test_destination_reached_is_local():
    topo = build_topology(1, 1)
    n = NodeId(0, 0, 0, 0)
    assert next_hop(topo, n, n).verdict == Verdict.LOCAL


def test_neighbor_goes_out_the_joining_port():
    topo = build_topology(1, 1)
    src, dst = NodeId(0, 0, 0, 0), NodeId(0, 0, 0, 1)
    decision = next_hop(topo, src, dst)
    assert decision.verdict == Verdict.FORWARD
    assert topo.peer_of(src, decision.out_port)[0] == dst
    assert bfs_distance(topo, src, dst) == 1


def test_shorter_wrap_direction_wins():
    # three tile columns: from column 0 to column 2 the west wrap is 1 hop
    topo = build_topology(1, 3)
    src = NodeId(0, 0, 0, 0)  # the west-port owner itself
    dst = NodeId(0, 2, 0, 0)
    decision = next_hop(topo, src, dst)
    assert decision.out_port == PortKind.EXTERNAL
    assert topo.peer_of(src, PortKind.EXTERNAL)[0].gcc == 2


def test_column_tie_breaks_east():
    topo = build_topology(1, 2)
    src = NodeId(0, 0, 1, 1)  # east-port owner; distances tie at 1
    dst = NodeId(0, 1, 0, 0)
    decision = next_hop(topo, src, dst)
    assert decision.out_port == PortKind.EXTERNAL


def test_unknown_destination_drops():
    topo = tile_plus_two_nodes()
    decision = next_hop(topo, NodeId(0, 1, 0, 0), NodeId(0, 0, 0, 0))
    assert decision.verdict == Verdict.DROP
    assert decision.reason == "no-route"


@pytest.mark.parametrize("dims", [(2, 2), (1, 3)])
def test_oracle_equivalence_all_pairs(dims):
    topo = build_topology(*dims)
    checked = 0
    for src in topo.nodes:
        for dst in topo.nodes:
            expected = oracle_port(topo, src, dst)
            decision = next_hop(topo, src, dst)
            if expected is None:
                assert decision.verdict == Verdict.LOCAL
            else:
                assert decision.verdict == Verdict.FORWARD
                assert decision.out_port == expected, (src, dst)
            checked += 1
    assert checked == len(topo.nodes) ** 2


@pytest.mark.parametrize("dims", [(1, 1), (2, 2), (3, 3), (1, 3), (3, 1)])
def test_fault_free_completeness_no_repeats(dims):
    topo = build_topology(*dims)
    for src in topo.nodes:
        for dst in topo.nodes:
            assert walk(topo, src, dst) is not None, (src, dst)


def test_preferred_port_faulty_uses_alternative_and_delivers():
    topo = build_topology(1, 1)
    src, dst = NodeId(0, 0, 0, 0), NodeId(0, 0, 0, 1)
    direct = topo.link_between(src, dst)
    direct.up = False
    decision = next_hop(topo, src, dst)
    assert decision.verdict == Verdict.FORWARD
    assert decision.out_port != PortKind.INTRA_H
    path = walk(topo, src, dst)
    assert path is not None and path[-1] == dst
    direct.up = True


def test_single_fault_delivery_with_sane_path_lengths():
    # Every single-fault scenario that leaves the graph connected must still
    # deliver all pairs, loop-free (walk already rejects repeats), with path
    # lengths floored by the shortest path and capped by a small detour.
    # Universal "faulted >= fault-free" does not hold for this routing family:
    # a fault can flip a tie-broken wrap direction (or an intra bypass can
    # exit through the external port) onto a path that happens to be shorter
    # at node level, so the bound is asserted both ways instead.
    topo = build_topology(2, 2)
    baseline = {}
    for src in topo.nodes:
        for dst in topo.nodes:
            baseline[(src, dst)] = len(walk(topo, src, dst)) - 1
    for link in topo.links:
        link.up = False
        if all(bfs_distance(topo, topo.nodes[0], n) is not None for n in topo.nodes):
            for src in topo.nodes:
                for dst in topo.nodes:
                    path = walk(topo, src, dst)
                    assert path is not None, (link.a, link.b, src, dst)
                    hops = len(path) - 1
                    assert hops >= bfs_distance(topo, src, dst)
                    assert hops <= baseline[(src, dst)] + 8
        link.up = True


def test_never_selects_ingress_port():
    topo = build_topology(2, 2)
    for src in topo.nodes:
        for dst in topo.nodes:
            cur, ingress = src, None
            for _ in range(64):
                decision = next_hop(topo, cur, dst, ingress)
                if decision.verdict != Verdict.FORWARD:
                    break
                assert decision.out_port != ingress
                cur, ingress = topo.peer_of(cur, decision.out_port)


def test_tile_plus_two_path_is_four_hops_each_way():
    topo = tile_plus_two_nodes()
    west, east = NodeId(0, 0, 1, 1), NodeId(0, 2, 0, 0)
    assert len(walk(topo, west, east)) - 1 == 4
    assert len(walk(topo, east, west)) - 1 == 4


def test_tile_plus_two_reroute_adds_a_hop():
    topo = tile_plus_two_nodes()
    west, east = NodeId(0, 0, 1, 1), NodeId(0, 2, 0, 0)
    link = topo.link_between(NodeId(0, 1, 0, 1), NodeId(0, 1, 1, 1))
    link.up = False
    path = walk(topo, west, east)
    assert path is not None
    assert len(path) - 1 == 5
    link.up = True
