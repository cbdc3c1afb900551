"""Static network model: controllers, domains, switches, hosts and links.

The graph is immutable once built.  Shortest paths are minimum hop count with
ties broken toward the lexicographically smallest next node id, so identical
queries return byte-identical paths across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .ledger import LinkSpec, inter_link_key, intra_link_key


class TopologyError(Exception):
    pass


class DuplicateId(TopologyError):
    pass


class DisconnectedGraph(TopologyError):
    pass


class EdgeLinkOnNonEdgeSwitch(TopologyError):
    pass


class NoPath(TopologyError):
    pass


class UnknownNode(TopologyError):
    pass


@dataclass
class Controller:
    id: int
    domain_id: int
    peer_ids: Tuple[int, ...]


@dataclass
class Switch:
    id: str
    domain_id: int
    is_domain_edge: bool


@dataclass
class Host:
    name: str
    mac: str
    attached_switch: str
    domain_id: int
    ip: Optional[str] = None  # empty until DHCP succeeds


class LinkKind(Enum):
    IntraDomain = "IntraDomain"
    InterDomain = "InterDomain"
    HostAccess = "HostAccess"


@dataclass
class LinkState:
    key: str
    a: str
    b: str
    capacity_bps: int
    guaranteed_queue_max_bps: int
    kind: LinkKind
    domain_id: Optional[int]  # None for inter-domain links

    def __post_init__(self):
        if not 0 <= self.guaranteed_queue_max_bps <= self.capacity_bps:
            raise TopologyError(
                f"link {self.a}-{self.b}: guaranteed queue max must lie in "
                f"[0, capacity]"
            )


@dataclass(frozen=True)
class LinkInput:
    """Raw link description before kind/key classification."""

    a: str
    b: str
    capacity_bps: int
    guaranteed_queue_max_bps: int


class Topology:
    """Built, validated network graph with deterministic path queries."""

    def __init__(
        self,
        controllers: Sequence[Controller],
        switches: Sequence[Switch],
        hosts: Sequence[Host],
        links: Sequence[LinkInput],
    ):
        self.controllers: Dict[int, Controller] = {}
        self.switches: Dict[str, Switch] = {}
        self.hosts: Dict[str, Host] = {}
        self.links: Dict[str, LinkState] = {}
        self._adjacency: Dict[str, List[Tuple[str, str]]] = {}
        self._diameter: Optional[int] = None

        for ctrl in controllers:
            if ctrl.id in self.controllers:
                raise DuplicateId(f"controller {ctrl.id}")
            self.controllers[ctrl.id] = ctrl
        self._check_peers()

        for sw in switches:
            if sw.id in self.switches:
                raise DuplicateId(f"switch {sw.id}")
            if sw.domain_id not in self._domains():
                raise TopologyError(f"switch {sw.id}: unknown domain {sw.domain_id}")
            self.switches[sw.id] = sw

        for host in hosts:
            if host.name in self.hosts or host.name in self.switches:
                raise DuplicateId(f"host {host.name}")
            sw = self.switches.get(host.attached_switch)
            if sw is None:
                raise UnknownNode(f"host {host.name}: switch {host.attached_switch}")
            host.domain_id = sw.domain_id
            self.hosts[host.name] = host

        for link in links:
            self._add_link(link)

        self._check_connected()
        for node in self._adjacency:
            self._adjacency[node].sort()

    # -- construction helpers -------------------------------------------------

    def _domains(self) -> set:
        return {c.domain_id for c in self.controllers.values()}

    def _check_peers(self) -> None:
        for ctrl in self.controllers.values():
            for peer in ctrl.peer_ids:
                if peer not in self.controllers:
                    raise UnknownNode(f"controller {ctrl.id}: peer {peer}")
                if ctrl.id not in self.controllers[peer].peer_ids:
                    raise TopologyError(
                        f"peer relation not symmetric: {ctrl.id} -> {peer}"
                    )

    def _classify(self, link: LinkInput) -> LinkState:
        a, b = link.a, link.b
        sw_a, sw_b = self.switches.get(a), self.switches.get(b)
        host_a, host_b = self.hosts.get(a), self.hosts.get(b)
        if sw_a and sw_b:
            if sw_a.domain_id == sw_b.domain_id:
                return LinkState(intra_link_key(a, b), a, b, link.capacity_bps,
                                 link.guaranteed_queue_max_bps,
                                 LinkKind.IntraDomain, sw_a.domain_id)
            if not (sw_a.is_domain_edge and sw_b.is_domain_edge):
                raise EdgeLinkOnNonEdgeSwitch(f"{a}-{b}")
            ctrl_a = self._controller_for_domain(sw_a.domain_id)
            ctrl_b = self._controller_for_domain(sw_b.domain_id)
            return LinkState(inter_link_key(ctrl_a, ctrl_b), a, b,
                             link.capacity_bps, link.guaranteed_queue_max_bps,
                             LinkKind.InterDomain, None)
        if sw_a and host_b:
            return LinkState(intra_link_key(a, b), a, b, link.capacity_bps,
                             link.guaranteed_queue_max_bps,
                             LinkKind.HostAccess, sw_a.domain_id)
        if host_a and sw_b:
            return LinkState(intra_link_key(a, b), a, b, link.capacity_bps,
                             link.guaranteed_queue_max_bps,
                             LinkKind.HostAccess, sw_b.domain_id)
        raise UnknownNode(f"link {a}-{b}: endpoints must be switches or host+switch")

    def _controller_for_domain(self, domain_id: int) -> int:
        for ctrl in self.controllers.values():
            if ctrl.domain_id == domain_id:
                return ctrl.id
        raise TopologyError(f"no controller for domain {domain_id}")

    def _add_link(self, link: LinkInput) -> None:
        state = self._classify(link)
        if state.key in self.links:
            raise DuplicateId(f"link {state.key}")
        self.links[state.key] = state
        self._adjacency.setdefault(state.a, []).append((state.b, state.key))
        self._adjacency.setdefault(state.b, []).append((state.a, state.key))

    def _check_connected(self) -> None:
        if not self.hosts:
            return
        start = next(iter(self.hosts))
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for neighbor, _ in self._adjacency.get(node, ()):
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        unreachable = set(self.hosts) - seen
        if unreachable:
            raise DisconnectedGraph(f"hosts unreachable: {sorted(unreachable)}")

    # -- lookups ----------------------------------------------------------------

    def node_domain(self, node: str) -> int:
        if node in self.switches:
            return self.switches[node].domain_id
        if node in self.hosts:
            return self.hosts[node].domain_id
        raise UnknownNode(node)

    def host_by_mac(self, mac: str) -> Optional[Host]:
        for host in self.hosts.values():
            if host.mac == mac:
                return host
        return None

    def host_by_ip(self, ip: str) -> Optional[Host]:
        for host in self.hosts.values():
            if host.ip == ip:
                return host
        return None

    def controller_of_domain(self, domain_id: int) -> Controller:
        return self.controllers[self._controller_for_domain(domain_id)]

    def link_between(self, a: str, b: str) -> LinkState:
        for neighbor, key in self._adjacency.get(a, ()):
            if neighbor == b:
                return self.links[key]
        raise NoPath(f"no link between {a} and {b}")

    def inter_domain_link(self, domain_a: int, domain_b: int) -> LinkState:
        key = inter_link_key(self._controller_for_domain(domain_a),
                             self._controller_for_domain(domain_b))
        if key not in self.links:
            raise NoPath(f"no inter-domain link between {domain_a} and {domain_b}")
        return self.links[key]

    def link_specs(self) -> List[LinkSpec]:
        """Genesis rows for the ledger bandwidth matrices, one per link."""
        return [
            LinkSpec(link.key, link.guaranteed_queue_max_bps, link.domain_id)
            for link in sorted(self.links.values(), key=lambda l: l.key)
        ]

    # -- path queries -------------------------------------------------------------

    def _neighbors(self, node: str, domain_id: Optional[int]) -> List[str]:
        out = []
        for neighbor, key in self._adjacency.get(node, ()):
            if domain_id is not None and self.links[key].domain_id != domain_id:
                continue
            out.append(neighbor)
        return out

    def _distances_to(self, target: str, domain_id: Optional[int]) -> Dict[str, int]:
        dist = {target: 0}
        frontier = [target]
        while frontier:
            next_frontier = []
            for node in frontier:
                for neighbor in self._neighbors(node, domain_id):
                    if neighbor not in dist:
                        dist[neighbor] = dist[node] + 1
                        next_frontier.append(neighbor)
            frontier = next_frontier
        return dist

    def _greedy_walk(self, src: str, dst: str, domain_id: Optional[int]) -> List[str]:
        dist = self._distances_to(dst, domain_id)
        if src not in dist:
            raise NoPath(f"{src} -> {dst}")
        path = [src]
        node = src
        while node != dst:
            # neighbors are pre-sorted, so the first one that descends wins
            node = next(n for n in self._neighbors(node, domain_id)
                        if dist.get(n, -1) == dist[node] - 1)
            path.append(node)
        return path

    def local_shortest_path(self, domain_id: int, from_node: str, to_node: str) -> List[str]:
        """Minimum-hop node path inside one domain's subgraph."""
        for node in (from_node, to_node):
            if self.node_domain(node) != domain_id:
                raise NoPath(f"{node} is not in domain {domain_id}")
        if from_node == to_node:
            return [from_node]
        return self._greedy_walk(from_node, to_node, domain_id)

    def shortest_path(self, from_node: str, to_node: str) -> List[str]:
        """Minimum-hop node path over the whole graph, same tie rule."""
        if from_node == to_node:
            return [from_node]
        return self._greedy_walk(from_node, to_node, None)

    def path_links(self, node_path: Sequence[str]) -> List[str]:
        return [self.link_between(a, b).key
                for a, b in zip(node_path, node_path[1:])]

    def diameter(self) -> int:
        """Longest shortest path (in hops) over all connected node pairs."""
        if self._diameter is None:
            worst = 0
            for node in self._adjacency:
                dist = self._distances_to(node, None)
                worst = max(worst, max(dist.values(), default=0))
            self._diameter = worst
        return self._diameter

    def simple_paths(self, src: str, dst: str, max_links: Optional[int] = None
                     ) -> Iterator[List[str]]:
        """All loop-free node paths, shortest first, lexicographic within a length."""
        if max_links is None:
            max_links = self.diameter()
        found: List[List[str]] = []

        def walk(node: str, path: List[str]) -> None:
            if node == dst:
                found.append(list(path))
                return
            if len(path) - 1 >= max_links:
                return
            for neighbor in self._neighbors(node, None):
                if neighbor not in path:
                    path.append(neighbor)
                    walk(neighbor, path)
                    path.pop()

        walk(src, [src])
        found.sort(key=lambda p: (len(p), p))
        yield from found

    def controller_path(self, src_domain: int, dst_domain: int) -> List[int]:
        """Minimum-hop controller id path over the peer graph, lowest-id ties."""
        src = self._controller_for_domain(src_domain)
        dst = self._controller_for_domain(dst_domain)
        if src == dst:
            return [src]
        dist = {dst: 0}
        frontier = [dst]
        while frontier:
            next_frontier = []
            for node in frontier:
                for peer in sorted(self.controllers[node].peer_ids):
                    if peer not in dist:
                        dist[peer] = dist[node] + 1
                        next_frontier.append(peer)
            frontier = next_frontier
        if src not in dist:
            raise NoPath(f"no controller path {src_domain} -> {dst_domain}")
        path = [src]
        node = src
        while node != dst:
            node = next(p for p in sorted(self.controllers[node].peer_ids)
                        if dist.get(p, -1) == dist[node] - 1)
            path.append(node)
        return path


def build_topology(
    controllers: Sequence[Controller],
    switches: Sequence[Switch],
    hosts: Sequence[Host],
    links: Sequence[LinkInput],
) -> Topology:
    return Topology(controllers, switches, hosts, links)
