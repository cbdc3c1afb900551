import random

import pytest

from chainsdn.engine import _build_topology
from chainsdn.scenario import load_builtin
from chainsdn.topology import (
    Controller,
    DisconnectedGraph,
    DuplicateId,
    EdgeLinkOnNonEdgeSwitch,
    Host,
    LinkInput,
    LinkKind,
    NoPath,
    Switch,
    Topology,
    TopologyError,
    build_topology,
)
from oracles import all_simple_paths, min_hop_length, topology_neighbors

MBPS = 1_000_000


def _host(name, switch, octet):
    return Host(name, f"AA-00-00-00-00-{octet:02X}", switch, 0)


def _single_domain(switch_ids, edges, hosts):
    switches = [Switch(s, 0, False) for s in switch_ids]
    links = [LinkInput(a, b, 10 * MBPS, 5 * MBPS) for a, b in edges]
    host_objs = []
    for i, (name, attach) in enumerate(hosts, start=1):
        host_objs.append(_host(name, attach, i))
        links.append(LinkInput(name, attach, 10 * MBPS, 5 * MBPS))
    return build_topology([Controller(0, 0, ())], switches, host_objs, links)


def test_case_a_shape():
    topo = _build_topology(load_builtin("case_a"))
    assert len(topo.controllers) == 3
    assert {s.domain_id for s in topo.switches.values()} == {0, 1, 2}
    inter = [l for l in topo.links.values() if l.kind is LinkKind.InterDomain]
    assert len(inter) == 3
    for link in inter:
        assert topo.switches[link.a].is_domain_edge
        assert topo.switches[link.b].is_domain_edge


def test_case_b_is_depth2_fanout4_tree():
    topo = _build_topology(load_builtin("case_b"))
    assert len(topo.switches) == 5
    assert len(topo.hosts) == 16
    spine = [l for l in topo.links.values() if l.kind is LinkKind.IntraDomain]
    access = [l for l in topo.links.values() if l.kind is LinkKind.HostAccess]
    assert len(spine) == 4 and len(access) == 16
    # root s0 touches all four leaves
    assert all("s0" in (l.a, l.b) for l in spine)


def test_trivial_two_host_topology():
    topo = _single_domain(["s1"], [], [("h1", "s1"), ("h2", "s1")])
    assert len(topo.links) == 2
    assert topo.local_shortest_path(0, "h1", "h2") == ["h1", "s1", "h2"]


def test_identity_path():
    topo = _single_domain(["s1"], [], [("h1", "s1")])
    assert topo.local_shortest_path(0, "s1", "s1") == ["s1"]


def test_case_b_leaf_to_leaf_via_root():
    topo = _build_topology(load_builtin("case_b"))
    leaf1 = topo.hosts["h1"].attached_switch
    leaf2 = topo.hosts["h5"].attached_switch
    assert topo.local_shortest_path(0, leaf1, leaf2) == [leaf1, "s0", leaf2]


def test_diamond_tie_breaks_lexicographically():
    topo = _single_domain(
        ["sa", "sb1", "sb2", "sc"],
        [("sa", "sb1"), ("sa", "sb2"), ("sb1", "sc"), ("sb2", "sc")],
        [("h1", "sa"), ("h2", "sc")],
    )
    assert topo.local_shortest_path(0, "sa", "sc") == ["sa", "sb1", "sc"]


def test_path_is_deterministic_across_rebuilds():
    build = lambda: _single_domain(
        ["s1", "s2", "s3", "s4"],
        [("s1", "s2"), ("s2", "s3"), ("s3", "s4"), ("s1", "s4"), ("s2", "s4")],
        [("h1", "s1"), ("h2", "s3")],
    )
    a, b = build(), build()
    assert a.local_shortest_path(0, "h1", "h2") == b.local_shortest_path(0, "h1", "h2")


def _random_connected(rng, n_switches):
    switch_ids = [f"s{i}" for i in range(n_switches)]
    edges = set()
    for i in range(1, n_switches):
        edges.add((f"s{rng.randrange(i)}", f"s{i}"))  # random spanning tree
    extra = rng.randint(0, n_switches)
    for _ in range(extra):
        a, b = rng.sample(switch_ids, 2)
        edges.add((min(a, b), max(a, b)))
    hosts = [("h1", rng.choice(switch_ids)), ("h2", rng.choice(switch_ids))]
    return _single_domain(switch_ids, sorted(edges), hosts)


def test_minimality_matches_brute_force_on_small_graphs():
    rng = random.Random(1234)
    for _ in range(40):
        topo = _random_connected(rng, rng.randint(2, 8))
        neighbors = topology_neighbors(topo)
        nodes = sorted(neighbors)
        for src in nodes:
            for dst in nodes:
                if src == dst:
                    continue
                expected = min_hop_length(neighbors, src, dst, len(nodes))
                path = topo.shortest_path(src, dst)
                assert len(path) - 1 == expected
                # returned path is a connected chain of existing links
                for a, b in zip(path, path[1:]):
                    assert b in neighbors[a]


def test_simple_paths_order_and_bound():
    topo = _single_domain(
        ["sa", "sb1", "sb2", "sc"],
        [("sa", "sb1"), ("sa", "sb2"), ("sb1", "sc"), ("sb2", "sc")],
        [("h1", "sa"), ("h2", "sc")],
    )
    got = list(topo.simple_paths("sa", "sc", max_links=4))
    lengths = [len(p) - 1 for p in got]
    assert lengths == sorted(lengths)
    assert got[0] == ["sa", "sb1", "sc"]  # lexicographic among 2-hop paths
    oracle = all_simple_paths(topology_neighbors(topo), "sa", "sc", 4)
    assert sorted(map(tuple, got)) == sorted(map(tuple, oracle))


def test_duplicate_ids_rejected():
    with pytest.raises(DuplicateId):
        build_topology([Controller(0, 0, ()), Controller(0, 0, ())], [], [], [])
    with pytest.raises(DuplicateId):
        build_topology([Controller(0, 0, ())],
                       [Switch("s1", 0, False), Switch("s1", 0, False)], [], [])


def test_inter_domain_link_requires_edge_switches():
    controllers = [Controller(0, 0, (1,)), Controller(1, 1, (0,))]
    switches = [Switch("s1", 0, False), Switch("s2", 1, True)]
    with pytest.raises(EdgeLinkOnNonEdgeSwitch):
        build_topology(controllers, switches, [],
                       [LinkInput("s1", "s2", MBPS, MBPS)])


def test_disconnected_hosts_rejected():
    with pytest.raises(DisconnectedGraph):
        _single_domain(["s1", "s2"], [], [("h1", "s1"), ("h2", "s2")])


def test_asymmetric_peers_rejected():
    with pytest.raises(TopologyError):
        build_topology([Controller(0, 0, (1,)), Controller(1, 1, ())], [], [], [])


def test_guaranteed_queue_cannot_exceed_capacity():
    with pytest.raises(TopologyError):
        _ = build_topology(
            [Controller(0, 0, ())], [Switch("s1", 0, False), Switch("s2", 0, False)],
            [], [LinkInput("s1", "s2", MBPS, 2 * MBPS)])


def test_controller_path_cases():
    topo = _build_topology(load_builtin("case_a"))
    assert topo.controller_path(1, 1) == [1]
    assert topo.controller_path(1, 0) == [1, 0]
    # line topology 0-1-2
    controllers = [Controller(0, 0, (1,)), Controller(1, 1, (0, 2)),
                   Controller(2, 2, (1,))]
    switches = [Switch("e0", 0, True), Switch("e1", 1, True), Switch("e2", 2, True)]
    links = [LinkInput("e0", "e1", MBPS, MBPS), LinkInput("e1", "e2", MBPS, MBPS)]
    line = build_topology(controllers, switches, [], links)
    assert line.controller_path(0, 2) == [0, 1, 2]


def test_no_controller_path_raises():
    controllers = [Controller(0, 0, ()), Controller(1, 1, ())]
    topo = build_topology(controllers, [Switch("s1", 0, False),
                                        Switch("s2", 1, False)], [], [])
    with pytest.raises(NoPath):
        topo.controller_path(0, 1)


def test_link_specs_cover_every_link_with_gq_max():
    topo = _build_topology(load_builtin("case_b"))
    specs = topo.link_specs()
    assert len(specs) == len(topo.links)
    assert all(s.guaranteed_queue_max_bps == 5 * MBPS for s in specs)
