"""SLA-driven bandwidth provisioning.

Requests are classified by the SLA flag, routed over per-domain shortest
paths stitched together at the traversal edge switches, and admitted against
the ledger's bandwidth matrices.  Guaranteed requests that do not fit on the
primary path try alternate loop-free paths in increasing hop order; if none
fits they ride the best-effort path and are promoted back once reservations
free up.  All mutating calls are processed strictly one at a time, which is
how the admission arithmetic stays consistent with the ledger.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .ledger import Ledger, SlaEntry, SlaFlag
from .topology import Host, NoPath, Topology


class ProvisioningError(Exception):
    pass


class NoControllerPath(ProvisioningError):
    pass


class UnknownFlow(ProvisioningError):
    pass


class UnqualifiedHostPair(ProvisioningError):
    pass


class InvalidMeter(ProvisioningError):
    pass


class FlowClass(Enum):
    Guaranteed = "Guaranteed"
    BestEffort = "BestEffort"


class FlowState(Enum):
    ActiveGuaranteed = "ActiveGuaranteed"
    ActiveBestEffort = "ActiveBestEffort"
    DemotedAwaitingPromotion = "DemotedAwaitingPromotion"


class OutcomeKind(Enum):
    GuaranteedOnPrimaryPath = "GuaranteedOnPrimaryPath"
    GuaranteedOnAlternatePath = "GuaranteedOnAlternatePath"
    BestEffortFallback = "BestEffortFallback"
    BestEffort = "BestEffort"


@dataclass(frozen=True)
class ProvisionRequest:
    src_host: str
    dst_host: str
    src_ip: str
    dst_ip: str
    requested_at_ms: int = 0


@dataclass
class Flow:
    id: str
    flow_class: FlowClass
    demand_bps: int
    meter_cap_bps: Optional[int]
    path: Tuple[str, ...]
    state: FlowState
    src_host: str
    dst_host: str
    sla_index: Optional[int] = None
    sla_bandwidth_bps: Optional[int] = None
    guaranteed_path: Optional[Tuple[str, ...]] = None
    demoted_seq: Optional[int] = None


@dataclass(frozen=True)
class ProvisionOutcome:
    kind: OutcomeKind
    flow: Flow


def classify_request(ledger: Ledger, req: ProvisionRequest) -> Optional[SlaEntry]:
    """The SLA row driving a guaranteed admission, or None for best-effort.

    Rows flagged best-effort classify the same as a missing row; only flag 1
    makes a request guaranteed.
    """
    entry = ledger.find_sla(req.src_ip, req.dst_ip)
    if entry is not None and entry.flag is SlaFlag.Guaranteed:
        return entry
    return None


def controller_path(topology: Topology, src_domain: int, dst_domain: int) -> List[int]:
    """Controller ids visited between two domains, both endpoints included."""
    try:
        return topology.controller_path(src_domain, dst_domain)
    except NoPath as exc:
        raise NoControllerPath(str(exc)) from exc


def compose_path(topology: Topology, ledger: Ledger, req: ProvisionRequest
                 ) -> List[str]:
    """End-to-end link keys from the source access link to the destination's.

    Per-domain shortest segments are joined at the edge switches named by the
    traversal matrix; the segments plus the crossed backbone links must form
    one contiguous, loop-free walk.
    """
    src = topology.hosts[req.src_host]
    dst = topology.hosts[req.dst_host]
    if src.domain_id == dst.domain_id:
        nodes = topology.local_shortest_path(src.domain_id, src.name, dst.name)
        return topology.path_links(nodes)

    ctrl_ids = controller_path(topology, src.domain_id, dst.domain_id)
    domains = [topology.controllers[c].domain_id for c in ctrl_ids]
    links: List[str] = []
    entry_node = src.name
    for i, (ctrl_here, ctrl_next) in enumerate(zip(ctrl_ids, ctrl_ids[1:])):
        exit_switch = ledger.traversal_edge(ctrl_here, ctrl_next)
        if exit_switch is None:
            raise NoPath(f"no traversal entry for {ctrl_here} -> {ctrl_next}")
        segment = topology.local_shortest_path(domains[i], entry_node, exit_switch)
        links.extend(topology.path_links(segment))
        crossing = topology.inter_domain_link(domains[i], domains[i + 1])
        links.append(crossing.key)
        entry_node = crossing.b if crossing.a == exit_switch else crossing.a
    tail = topology.local_shortest_path(domains[-1], entry_node, dst.name)
    links.extend(topology.path_links(tail))
    if len(set(links)) != len(links):
        raise NoPath(f"composed path revisits a link: {links}")
    return links


class Provisioner:
    """Admission, demotion and switch-back over one topology + ledger pair."""

    def __init__(
        self,
        topology: Topology,
        ledger: Ledger,
        can_communicate: Optional[Callable[[Host, Host], bool]] = None,
        event_sink: Optional[Callable[[str], None]] = None,
    ):
        self.topology = topology
        self.ledger = ledger
        self._can_communicate = can_communicate
        self._event_sink = event_sink
        self.flows: Dict[str, Flow] = {}
        self.now_ms = 0
        self._flow_counter = 0
        self._demotion_counter = 0

    # -- helpers ---------------------------------------------------------------

    def _next_flow_id(self) -> str:
        self._flow_counter += 1
        return f"f{self._flow_counter}"

    def _log(self, flow: Flow, kind: OutcomeKind) -> None:
        if self._event_sink:
            path = ";".join(flow.path)
            self._event_sink(f"{self.now_ms},provision,{flow.id},{kind.value},{path}")

    def _check_request(self, req: ProvisionRequest) -> None:
        src = self.topology.hosts[req.src_host]
        dst = self.topology.hosts[req.dst_host]
        if src.ip != req.src_ip or dst.ip != req.dst_ip:
            raise ProvisioningError(
                f"{req.src_host}/{req.dst_host}: request IPs do not match host IPs")
        if self._can_communicate and not self._can_communicate(src, dst):
            raise UnqualifiedHostPair(
                f"{req.src_host} and {req.dst_host} lack a qualified ARP pair")

    def _feasible(self, links: Sequence[str], bw_bps: int) -> bool:
        return all(self.ledger.available_bandwidth(k) >= bw_bps for k in links)

    def _alternate_paths(self, src_host: str, dst_host: str):
        for nodes in self.topology.simple_paths(src_host, dst_host):
            yield self.topology.path_links(nodes)

    # -- operations --------------------------------------------------------------

    def provision(self, req: ProvisionRequest, demand_bps: int,
                  meter_cap_bps: Optional[int] = None,
                  flow_id: Optional[str] = None) -> ProvisionOutcome:
        """Admit one request; requests are handled one at a time, in order."""
        self._check_request(req)
        flow_id = flow_id or self._next_flow_id()
        if flow_id in self.flows:
            raise ProvisioningError(f"flow id {flow_id} already active")
        primary = tuple(compose_path(self.topology, self.ledger, req))
        sla = classify_request(self.ledger, req)

        if sla is None:
            flow = Flow(flow_id, FlowClass.BestEffort, demand_bps, None, primary,
                        FlowState.ActiveBestEffort, req.src_host, req.dst_host,
                        sla_index=self._best_effort_index(req))
            self.flows[flow_id] = flow
            self._log(flow, OutcomeKind.BestEffort)
            return ProvisionOutcome(OutcomeKind.BestEffort, flow)

        need = sla.sla_bandwidth_bps
        meter = meter_cap_bps if meter_cap_bps is not None else need
        if meter < need:
            raise InvalidMeter(
                f"meter {meter} bps below the SLA bandwidth {need} bps")

        if self._feasible(primary, need):
            self.ledger.reserve_bandwidth(primary, need)
            flow = Flow(flow_id, FlowClass.Guaranteed, demand_bps, meter, primary,
                        FlowState.ActiveGuaranteed, req.src_host, req.dst_host,
                        sla.index, need, guaranteed_path=primary)
            self.flows[flow_id] = flow
            self._log(flow, OutcomeKind.GuaranteedOnPrimaryPath)
            return ProvisionOutcome(OutcomeKind.GuaranteedOnPrimaryPath, flow)

        for candidate in self._alternate_paths(req.src_host, req.dst_host):
            if tuple(candidate) == primary:
                continue
            if self._feasible(candidate, need):
                path = tuple(candidate)
                self.ledger.reserve_bandwidth(path, need)
                flow = Flow(flow_id, FlowClass.Guaranteed, demand_bps, meter, path,
                            FlowState.ActiveGuaranteed, req.src_host, req.dst_host,
                            sla.index, need, guaranteed_path=path)
                self.flows[flow_id] = flow
                self._log(flow, OutcomeKind.GuaranteedOnAlternatePath)
                return ProvisionOutcome(OutcomeKind.GuaranteedOnAlternatePath, flow)

        self._demotion_counter += 1
        flow = Flow(flow_id, FlowClass.Guaranteed, demand_bps, meter, primary,
                    FlowState.DemotedAwaitingPromotion, req.src_host, req.dst_host,
                    sla.index, need, guaranteed_path=primary,
                    demoted_seq=self._demotion_counter)
        self.flows[flow_id] = flow
        self._log(flow, OutcomeKind.BestEffortFallback)
        return ProvisionOutcome(OutcomeKind.BestEffortFallback, flow)

    def _best_effort_index(self, req: ProvisionRequest) -> Optional[int]:
        entry = self.ledger.find_sla(req.src_ip, req.dst_ip)
        return entry.index if entry is not None else None

    def try_promote(self) -> List[str]:
        """Switch demoted flows back to their guaranteed paths, oldest first."""
        demoted = sorted(
            (f for f in self.flows.values()
             if f.state is FlowState.DemotedAwaitingPromotion),
            key=lambda f: f.demoted_seq,
        )
        promoted = []
        for flow in demoted:
            if self._feasible(flow.guaranteed_path, flow.sla_bandwidth_bps):
                self.ledger.reserve_bandwidth(flow.guaranteed_path,
                                              flow.sla_bandwidth_bps)
                flow.state = FlowState.ActiveGuaranteed
                flow.path = flow.guaranteed_path
                flow.demoted_seq = None
                promoted.append(flow.id)
        return promoted

    def teardown(self, flow_id: str):
        """Remove a flow, release its reservation, and re-check demoted flows."""
        flow = self.flows.pop(flow_id, None)
        if flow is None:
            raise UnknownFlow(flow_id)
        block = None
        if flow.state is FlowState.ActiveGuaranteed:
            block = self.ledger.release_bandwidth(flow.path, flow.sla_bandwidth_bps)
        self.try_promote()
        return block
