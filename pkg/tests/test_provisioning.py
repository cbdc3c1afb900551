import pytest

from chainsdn.engine import Simulation, _build_topology
from chainsdn.ledger import Ledger, SlaEntry, SlaFlag
from chainsdn.provisioning import (
    FlowState,
    InvalidMeter,
    NoControllerPath,
    OutcomeKind,
    ProvisionRequest,
    Provisioner,
    UnknownFlow,
    UnqualifiedHostPair,
    classify_request,
    compose_path,
    controller_path,
)
from chainsdn.scenario import load_builtin
from chainsdn.topology import Controller, Host, LinkInput, Switch, build_topology

MBPS = 1_000_000


def case_b_world():
    """case_b after its t=0 events: DHCP done, pairs qualified, BE flows live."""
    sim = Simulation(load_builtin("case_b"))
    sim.run(ticks=1)
    return sim


def req_for(sim, src, dst):
    hosts = sim.topology.hosts
    return ProvisionRequest(src, dst, hosts[src].ip, hosts[dst].ip)


def two_switch_world(n_pairs=3, gq_mbps=5):
    """n host pairs across one contended sa-sb link; IPs assigned directly."""
    switches = [Switch("sa", 0, False), Switch("sb", 0, False)]
    hosts, links = [], [LinkInput("sa", "sb", 2 * gq_mbps * MBPS, gq_mbps * MBPS)]
    for i in range(1, n_pairs + 1):
        hosts += [Host(f"ha{i}", f"AA-00-00-00-0A-{i:02X}", "sa", 0),
                  Host(f"hb{i}", f"AA-00-00-00-0B-{i:02X}", "sb", 0)]
        links += [LinkInput(f"ha{i}", "sa", 10 * MBPS, gq_mbps * MBPS),
                  LinkInput(f"hb{i}", "sb", 10 * MBPS, gq_mbps * MBPS)]
    topo = build_topology([Controller(0, 0, ())], switches, hosts, links)
    for i in range(1, n_pairs + 1):
        topo.hosts[f"ha{i}"].ip = f"10.1.0.{i}"
        topo.hosts[f"hb{i}"].ip = f"10.2.0.{i}"
    ledger = Ledger(topo.link_specs())
    return topo, ledger, Provisioner(topo, ledger)


def sla_for_pair(ledger, topo, index, src, dst, bw_bps, flag=SlaFlag.Guaranteed):
    ledger.put_sla(SlaEntry(index, topo.hosts[src].ip, topo.hosts[dst].ip,
                            bw_bps, flag))


def test_classification_follows_the_flag():
    sim = case_b_world()
    guaranteed = classify_request(sim.ledger, req_for(sim, "h3", "h7"))
    assert guaranteed is not None and guaranteed.sla_bandwidth_bps == round(1.8 * MBPS)
    assert classify_request(sim.ledger, req_for(sim, "h1", "h5")) is None  # flag 0
    sim.topology.hosts["h9"].ip = "10.0.0.9"
    sim.topology.hosts["h10"].ip = "10.0.0.10"
    assert classify_request(sim.ledger, req_for(sim, "h9", "h10")) is None  # no row


def test_controller_path_delegates_and_raises():
    topo = _build_topology(load_builtin("case_a"))
    assert controller_path(topo, 1, 0) == [1, 0]
    isolated = build_topology(
        [Controller(0, 0, ()), Controller(1, 1, ())],
        [Switch("s1", 0, False), Switch("s2", 1, False)], [], [])
    with pytest.raises(NoControllerPath):
        controller_path(isolated, 0, 1)


def test_compose_path_intra_domain_is_pure_local():
    sim = case_b_world()
    links = compose_path(sim.topology, sim.ledger, req_for(sim, "h3", "h7"))
    assert links == ["intra:h3-s1", "intra:s0-s1", "intra:s0-s2", "intra:h7-s2"]


def test_compose_path_crosses_designated_edge_switches():
    sim = Simulation(load_builtin("case_a"))
    sim.run(ticks=1)
    links = compose_path(sim.topology, sim.ledger, req_for(sim, "h1", "h2"))
    inter = [k for k in links if k.startswith("inter:")]
    assert inter == ["inter:0-1"]
    crossing = sim.topology.links["inter:0-1"]
    assert {crossing.a, crossing.b} == {"s10", "s5"}  # traversal matrix entries
    assert links[0] == "intra:h1-s9" and links[-1] == "intra:h2-s4"


def test_guaranteed_admission_sequence_matches_fig10():
    sim = case_b_world()
    prov = sim.provisioner
    spine = ["intra:s0-s1", "intra:s0-s2"]

    out1 = prov.provision(req_for(sim, "h3", "h7"), round(1.8 * MBPS),
                          meter_cap_bps=2 * MBPS, flow_id="G1")
    assert out1.kind is OutcomeKind.GuaranteedOnPrimaryPath
    assert all(sim.ledger.available_bandwidth(k) == round(3.2 * MBPS) for k in spine)

    out2 = prov.provision(req_for(sim, "h4", "h8"), round(2.8 * MBPS),
                          meter_cap_bps=3 * MBPS, flow_id="G2")
    assert out2.kind is OutcomeKind.GuaranteedOnPrimaryPath  # 3.2 >= 2.8
    assert all(sim.ledger.available_bandwidth(k) == round(0.4 * MBPS) for k in spine)

    # a third guaranteed request over the saturated spine has no alternate (tree)
    sla_for_pair(sim.ledger, sim.topology, 4, "h2", "h7", 1 * MBPS)
    sim.control.registry.qualified.add(
        frozenset((sim.topology.hosts["h2"].ip, sim.topology.hosts["h7"].ip)))
    out3 = prov.provision(req_for(sim, "h2", "h7"), 1 * MBPS, flow_id="G3")
    assert out3.kind is OutcomeKind.BestEffortFallback
    assert out3.flow.state is FlowState.DemotedAwaitingPromotion
    assert all(sim.ledger.available_bandwidth(k) == round(0.4 * MBPS) for k in spine)

    # teardown of G1 frees 1.8 Mbps; teardown itself triggers the promotion
    prov.teardown("G1")
    assert prov.flows["G3"].state is FlowState.ActiveGuaranteed
    # matrices now hold G2 (2.8) + G3 (1.0) on the spine
    assert all(sim.ledger.available_bandwidth(k) == round(1.2 * MBPS) for k in spine)


def test_alternate_path_found_in_hop_order():
    switches = [Switch(s, 0, False) for s in ("sa", "sb1", "sb2", "sc")]
    hosts = [Host("h1", "AA-00-00-00-00-01", "sa", 0),
             Host("h2", "AA-00-00-00-00-02", "sc", 0),
             Host("h3", "AA-00-00-00-00-03", "sa", 0),
             Host("h4", "AA-00-00-00-00-04", "sc", 0)]
    links = [LinkInput(a, b, 10 * MBPS, 5 * MBPS) for a, b in
             [("sa", "sb1"), ("sa", "sb2"), ("sb1", "sc"), ("sb2", "sc"),
              ("h1", "sa"), ("h2", "sc"), ("h3", "sa"), ("h4", "sc")]]
    topo = build_topology([Controller(0, 0, ())], switches, hosts, links)
    for i, name in enumerate(("h1", "h2", "h3", "h4"), start=1):
        topo.hosts[name].ip = f"10.0.0.{i}"
    ledger = Ledger(topo.link_specs())
    prov = Provisioner(topo, ledger)
    sla_for_pair(ledger, topo, 0, "h1", "h2", 4 * MBPS)
    sla_for_pair(ledger, topo, 1, "h3", "h4", 4 * MBPS)

    first = prov.provision(ProvisionRequest("h1", "h2", "10.0.0.1", "10.0.0.2"),
                           4 * MBPS)
    assert first.kind is OutcomeKind.GuaranteedOnPrimaryPath
    assert "intra:sa-sb1" in first.flow.path  # lexicographic primary

    second = prov.provision(ProvisionRequest("h3", "h4", "10.0.0.3", "10.0.0.4"),
                            4 * MBPS)
    assert second.kind is OutcomeKind.GuaranteedOnAlternatePath
    assert "intra:sa-sb2" in second.flow.path
    assert "intra:sa-sb1" not in second.flow.path


def test_promotion_order_earlier_demoted_wins():
    topo, ledger, prov = two_switch_world()
    sla_for_pair(ledger, topo, 0, "ha1", "hb1", 4 * MBPS)
    sla_for_pair(ledger, topo, 1, "ha2", "hb2", 3 * MBPS)
    sla_for_pair(ledger, topo, 2, "ha3", "hb3", 3 * MBPS)
    prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"),
                   4 * MBPS, flow_id="G1")
    prov.provision(ProvisionRequest("ha2", "hb2", "10.1.0.2", "10.2.0.2"),
                   3 * MBPS, flow_id="G2")
    prov.provision(ProvisionRequest("ha3", "hb3", "10.1.0.3", "10.2.0.3"),
                   3 * MBPS, flow_id="G3")
    assert prov.flows["G2"].state is FlowState.DemotedAwaitingPromotion
    assert prov.flows["G3"].state is FlowState.DemotedAwaitingPromotion

    prov.teardown("G1")  # frees 4; only one 3 Mbps flow fits
    assert prov.flows["G2"].state is FlowState.ActiveGuaranteed
    assert prov.flows["G3"].state is FlowState.DemotedAwaitingPromotion


def test_try_promote_with_nothing_demoted_is_empty():
    topo, ledger, prov = two_switch_world()
    assert prov.try_promote() == []


def test_teardown_best_effort_leaves_chain_untouched():
    topo, ledger, prov = two_switch_world()
    chain_before = len(ledger.blocks)
    prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"),
                   MBPS, flow_id="BE")
    prov.teardown("BE")
    assert len(ledger.blocks) == chain_before
    with pytest.raises(UnknownFlow):
        prov.teardown("BE")


def test_teardown_then_identical_request_replays_identically():
    topo, ledger, prov = two_switch_world()
    sla_for_pair(ledger, topo, 0, "ha1", "hb1", 2 * MBPS)
    req = ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1")
    first = prov.provision(req, 2 * MBPS, flow_id="X1")
    snapshot = ledger.state.matrices.snapshot()
    prov.teardown("X1")
    second = prov.provision(req, 2 * MBPS, flow_id="X2")
    assert first.kind == second.kind
    assert first.flow.path == second.flow.path
    assert ledger.state.matrices.snapshot() == snapshot


def test_meter_below_sla_bandwidth_rejected():
    topo, ledger, prov = two_switch_world()
    sla_for_pair(ledger, topo, 0, "ha1", "hb1", 3 * MBPS)
    with pytest.raises(InvalidMeter):
        prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"),
                       3 * MBPS, meter_cap_bps=2 * MBPS)


def test_unqualified_pair_is_refused():
    topo, ledger, prov = two_switch_world()
    prov._can_communicate = lambda a, b: False
    with pytest.raises(UnqualifiedHostPair):
        prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"), MBPS)


def test_compose_path_requires_traversal_entries():
    sim = Simulation(load_builtin("case_a"))
    sim.run(ticks=1)
    bare = Ledger(sim.topology.link_specs())  # no traversal rows loaded
    with pytest.raises(Exception, match="traversal"):
        compose_path(sim.topology, bare, req_for(sim, "h1", "h2"))


def test_same_tick_requests_are_processed_in_arrival_order():
    # both request 3 Mbps over the 5 Mbps contended link in one tick:
    # the first is admitted, the second demoted, regardless of batching
    topo, ledger, prov = two_switch_world()
    sla_for_pair(ledger, topo, 0, "ha1", "hb1", 3 * MBPS)
    sla_for_pair(ledger, topo, 1, "ha2", "hb2", 3 * MBPS)
    first = prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"),
                           3 * MBPS, flow_id="A")
    second = prov.provision(ProvisionRequest("ha2", "hb2", "10.1.0.2", "10.2.0.2"),
                            3 * MBPS, flow_id="B")
    assert first.kind is OutcomeKind.GuaranteedOnPrimaryPath
    assert second.kind is OutcomeKind.BestEffortFallback


def test_provision_event_line_format():
    lines = []
    topo, ledger, _ = two_switch_world()
    prov = Provisioner(topo, ledger, event_sink=lines.append)
    prov.now_ms = 7000
    prov.provision(ProvisionRequest("ha1", "hb1", "10.1.0.1", "10.2.0.1"),
                   MBPS, flow_id="F9")
    assert lines == [
        "7000,provision,F9,BestEffort,intra:ha1-sa;intra:sa-sb;intra:hb1-sb"]
