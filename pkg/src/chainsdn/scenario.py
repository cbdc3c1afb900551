"""Line-based scenario files: topology, table preloads and a timed event
schedule.  One record per line, ``#`` comments, key=value fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .control_plane import VerifyMode


class ScenarioError(Exception):
    pass


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownId(ScenarioError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnsortedEvents(ScenarioError):
    pass


@dataclass(frozen=True)
class ControllerRecord:
    id: int
    domain: int
    peers: Tuple[int, ...]


@dataclass(frozen=True)
class SwitchRecord:
    id: str
    domain: int
    edge: bool


@dataclass(frozen=True)
class LinkRecord:
    a: str
    b: str
    capacity_bps: int
    gq_bps: int


@dataclass(frozen=True)
class HostRecord:
    name: str
    mac: str
    switch: str


@dataclass(frozen=True)
class TraversalRecord:
    from_controller: int
    to_controller: int
    edge_switch: str


@dataclass(frozen=True)
class IpMacRecord:
    ip: str
    mac: str


@dataclass(frozen=True)
class SlaRecord:
    index: int
    src: str
    dst: str
    bw_bps: int
    flag: int


@dataclass(frozen=True)
class EventRecord:
    time: int
    kind: str
    args: Tuple[Tuple[str, str], ...]

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.args:
            if k == key:
                return v
        return default


@dataclass
class Scenario:
    controllers: List[ControllerRecord] = field(default_factory=list)
    switches: List[SwitchRecord] = field(default_factory=list)
    links: List[LinkRecord] = field(default_factory=list)
    hosts: List[HostRecord] = field(default_factory=list)
    traversal: List[TraversalRecord] = field(default_factory=list)
    ipmac: List[IpMacRecord] = field(default_factory=list)
    sla: List[SlaRecord] = field(default_factory=list)
    events: List[EventRecord] = field(default_factory=list)
    ticks: int = 10
    verify_mode: VerifyMode = VerifyMode.Immediate
    verify_delay_ticks: int = 0


_EVENT_KINDS = {"dhcp", "arp_exchange", "send_command", "tamper",
                "start_flow", "stop_flow", "provision"}


def _mbps_to_bps(text: str) -> int:
    return round(float(text) * 1_000_000)


def _bps_to_mbps(bps: int) -> str:
    return repr(bps / 1_000_000)


def _fields(line_no: int, tokens: List[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for token in tokens:
        if "=" not in token:
            raise ScenarioSyntaxError(line_no, f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        if key in out:
            raise ScenarioSyntaxError(line_no, f"duplicate key {key!r}")
        out[key] = value
    return out


def _need(line_no: int, fields: Dict[str, str], *keys: str) -> List[str]:
    missing = [k for k in keys if k not in fields]
    if missing:
        raise ScenarioSyntaxError(line_no, f"missing fields: {', '.join(missing)}")
    return [fields[k] for k in keys]


def _int(line_no: int, text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioSyntaxError(line_no, f"bad {what}: {text!r}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse and cross-validate one scenario; raises on the first bad line."""
    scn = Scenario()
    last_event_time = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        record, *tokens = line.split()
        f = _fields(line_no, tokens)
        if record == "controller":
            cid, domain, peers = _need(line_no, f, "id", "domain", "peers")
            peer_ids = tuple(_int(line_no, p, "peer id")
                             for p in peers.split(",") if p)
            scn.controllers.append(ControllerRecord(
                _int(line_no, cid, "controller id"),
                _int(line_no, domain, "domain id"), peer_ids))
        elif record == "switch":
            sid, domain, edge = _need(line_no, f, "id", "domain", "edge")
            if edge not in ("0", "1"):
                raise ScenarioSyntaxError(line_no, f"edge must be 0 or 1, got {edge!r}")
            scn.switches.append(SwitchRecord(
                sid, _int(line_no, domain, "domain id"), edge == "1"))
        elif record == "link":
            a, b, cap, gq = _need(line_no, f, "a", "b", "capacity_mbps", "gq_mbps")
            try:
                scn.links.append(LinkRecord(a, b, _mbps_to_bps(cap), _mbps_to_bps(gq)))
            except ValueError:
                raise ScenarioSyntaxError(line_no, "bad bandwidth value") from None
        elif record == "host":
            name, mac, switch = _need(line_no, f, "name", "mac", "switch")
            scn.hosts.append(HostRecord(name, mac, switch))
        elif record == "traversal":
            src, dst, sw = _need(line_no, f, "from", "to", "edge_switch")
            scn.traversal.append(TraversalRecord(
                _int(line_no, src, "controller id"),
                _int(line_no, dst, "controller id"), sw))
        elif record == "ipmac":
            ip, mac = _need(line_no, f, "ip", "mac")
            scn.ipmac.append(IpMacRecord(ip, mac))
        elif record == "sla":
            idx, src, dst, bw, flag = _need(line_no, f, "index", "src", "dst",
                                            "bw_mbps", "flag")
            if flag not in ("0", "1"):
                raise ScenarioSyntaxError(line_no, f"flag must be 0 or 1, got {flag!r}")
            try:
                bw_bps = _mbps_to_bps(bw)
            except ValueError:
                raise ScenarioSyntaxError(line_no, "bad bandwidth value") from None
            scn.sla.append(SlaRecord(_int(line_no, idx, "sla index"),
                                     src, dst, bw_bps, int(flag)))
        elif record == "run":
            if "ticks" in f:
                scn.ticks = _int(line_no, f["ticks"], "tick count")
            if "verify_mode" in f:
                try:
                    scn.verify_mode = VerifyMode(f["verify_mode"])
                except ValueError:
                    raise ScenarioSyntaxError(
                        line_no, f"bad verify_mode: {f['verify_mode']!r}") from None
            if "verify_delay" in f:
                scn.verify_delay_ticks = _int(line_no, f["verify_delay"], "delay")
        elif record == "event":
            time_text, kind = _need(line_no, f, "t", "kind")
            time = _int(line_no, time_text, "event time")
            if kind not in _EVENT_KINDS:
                raise ScenarioSyntaxError(line_no, f"unknown event kind {kind!r}")
            if last_event_time is not None and time < last_event_time:
                raise UnsortedEvents(
                    f"line {line_no}: event at t={time} after t={last_event_time}")
            last_event_time = time
            args = tuple((k, v) for k, v in f.items() if k not in ("t", "kind"))
            scn.events.append(EventRecord(time, kind, args))
        else:
            raise ScenarioSyntaxError(line_no, f"unknown record type {record!r}")
    _validate(scn)
    return scn


def _validate(scn: Scenario) -> None:
    if not scn.controllers or not scn.switches:
        raise ScenarioSyntaxError(0, "missing topology (controllers and switches)")
    switch_ids = {s.id for s in scn.switches}
    host_names = {h.name for h in scn.hosts}
    node_ids = switch_ids | host_names
    controller_ids = {c.id for c in scn.controllers}
    for host in scn.hosts:
        if host.switch not in switch_ids:
            raise UnknownId(0, f"host {host.name}: unknown switch {host.switch}")
    for link in scn.links:
        for end in (link.a, link.b):
            if end not in node_ids:
                raise UnknownId(0, f"link {link.a}-{link.b}: unknown endpoint {end}")
    for entry in scn.traversal:
        if entry.edge_switch not in switch_ids:
            raise UnknownId(0, f"traversal: unknown switch {entry.edge_switch}")
        for ctrl in (entry.from_controller, entry.to_controller):
            if ctrl not in controller_ids:
                raise UnknownId(0, f"traversal: unknown controller {ctrl}")
    declared_flows = set()
    for ev in scn.events:
        if ev.kind in ("dhcp",):
            host = ev.get("host")
            if host not in host_names:
                raise UnknownId(0, f"event dhcp: unknown host {host}")
        elif ev.kind in ("arp_exchange",):
            for key in ("src", "dst"):
                if ev.get(key) not in host_names:
                    raise UnknownId(0, f"event {ev.kind}: unknown host {ev.get(key)}")
        elif ev.kind in ("start_flow", "provision"):
            for key in ("src", "dst"):
                if ev.get(key) not in host_names:
                    raise UnknownId(0, f"event {ev.kind}: unknown host {ev.get(key)}")
            flow_id = ev.get("id")
            if flow_id:
                declared_flows.add(flow_id)
        elif ev.kind == "stop_flow":
            if ev.get("id") not in declared_flows:
                raise UnknownId(0, f"event stop_flow: unknown flow {ev.get('id')}")
        elif ev.kind == "send_command":
            for key in ("src", "dst"):
                value = ev.get(key)
                if value == "broadcast" and key == "dst":
                    continue
                if value is None or not value.lstrip("-").isdigit() \
                        or int(value) not in controller_ids:
                    raise UnknownId(0, f"event send_command: unknown controller {value}")


def serialize(scn: Scenario) -> str:
    """Inverse of :func:`parse_scenario` for valid scenarios."""
    lines: List[str] = []
    for c in scn.controllers:
        lines.append(f"controller id={c.id} domain={c.domain} "
                     f"peers={','.join(str(p) for p in c.peers)}")
    for s in scn.switches:
        lines.append(f"switch id={s.id} domain={s.domain} edge={int(s.edge)}")
    for l in scn.links:
        lines.append(f"link a={l.a} b={l.b} capacity_mbps={_bps_to_mbps(l.capacity_bps)} "
                     f"gq_mbps={_bps_to_mbps(l.gq_bps)}")
    for h in scn.hosts:
        lines.append(f"host name={h.name} mac={h.mac} switch={h.switch}")
    for t in scn.traversal:
        lines.append(f"traversal from={t.from_controller} to={t.to_controller} "
                     f"edge_switch={t.edge_switch}")
    for i in scn.ipmac:
        lines.append(f"ipmac ip={i.ip} mac={i.mac}")
    for s in scn.sla:
        lines.append(f"sla index={s.index} src={s.src} dst={s.dst} "
                     f"bw_mbps={_bps_to_mbps(s.bw_bps)} flag={s.flag}")
    lines.append(f"run ticks={scn.ticks} verify_mode={scn.verify_mode.value} "
                 f"verify_delay={scn.verify_delay_ticks}")
    for ev in scn.events:
        args = " ".join(f"{k}={v}" for k, v in ev.args)
        lines.append(f"event t={ev.time} kind={ev.kind}" + (f" {args}" if args else ""))
    return "\n".join(lines) + "\n"


# -- built-in case studies ------------------------------------------------------

# Three peer domains; h1 (domain 1) resolves h2 (domain 0) across the
# backbone, then sends one best-effort flow over the s10-s5 crossing.
CASE_A = """\
# case_a: three-domain mesh, cross-domain ARP round trip + one flow
controller id=0 domain=0 peers=1,2
controller id=1 domain=1 peers=0,2
controller id=2 domain=2 peers=0,1

switch id=s4 domain=0 edge=0
switch id=s5 domain=0 edge=1
switch id=s9 domain=1 edge=0
switch id=s10 domain=1 edge=1
switch id=s11 domain=2 edge=1
switch id=s12 domain=2 edge=0

link a=s4 b=s5 capacity_mbps=9.4 gq_mbps=5.0
link a=s9 b=s10 capacity_mbps=9.4 gq_mbps=5.0
link a=s11 b=s12 capacity_mbps=9.4 gq_mbps=5.0
link a=s5 b=s10 capacity_mbps=9.4 gq_mbps=5.0
link a=s10 b=s11 capacity_mbps=9.4 gq_mbps=5.0
link a=s5 b=s11 capacity_mbps=9.4 gq_mbps=5.0

host name=h1 mac=48-2C-6A-1E-59-3D switch=s9
host name=h2 mac=48-2C-6A-1E-58-AC switch=s4
host name=h3 mac=48-2C-6A-1E-A1-5D switch=s12

link a=h1 b=s9 capacity_mbps=9.4 gq_mbps=5.0
link a=h2 b=s4 capacity_mbps=9.4 gq_mbps=5.0
link a=h3 b=s12 capacity_mbps=9.4 gq_mbps=5.0

traversal from=0 to=1 edge_switch=s5
traversal from=1 to=0 edge_switch=s10
traversal from=0 to=2 edge_switch=s5
traversal from=2 to=0 edge_switch=s11
traversal from=1 to=2 edge_switch=s10
traversal from=2 to=1 edge_switch=s11

ipmac ip=20.0.0.1 mac=48-2C-6A-1E-59-3D
ipmac ip=20.0.0.2 mac=48-2C-6A-1E-58-AC
ipmac ip=20.0.0.5 mac=48-2C-6A-1E-A1-5D

run ticks=5 verify_mode=immediate verify_delay=0

event t=0 kind=dhcp host=h1
event t=0 kind=dhcp host=h2
event t=0 kind=dhcp host=h3
event t=0 kind=arp_exchange src=h1 dst=h2
event t=1 kind=start_flow id=F1 src=h1 dst=h2 demand_mbps=1.0
"""

_CASE_B_HEAD = """\
# case_b: depth-2 fan-out-4 tree, two best-effort and two guaranteed flows
controller id=0 domain=0 peers=

switch id=s0 domain=0 edge=0
switch id=s1 domain=0 edge=0
switch id=s2 domain=0 edge=0
switch id=s3 domain=0 edge=0
switch id=s4 domain=0 edge=0

link a=s0 b=s1 capacity_mbps=9.4 gq_mbps=5.0
link a=s0 b=s2 capacity_mbps=9.4 gq_mbps=5.0
link a=s0 b=s3 capacity_mbps=9.4 gq_mbps=5.0
link a=s0 b=s4 capacity_mbps=9.4 gq_mbps=5.0
"""

_CASE_B_TABLES = """\
sla index=0 src=10.0.0.1 dst=10.0.0.5 bw_mbps=5.7 flag=0
sla index=1 src=10.0.0.2 dst=10.0.0.6 bw_mbps=3.7 flag=0
sla index=2 src=10.0.0.3 dst=10.0.0.7 bw_mbps=1.8 flag=1
sla index=3 src=10.0.0.4 dst=10.0.0.8 bw_mbps=2.8 flag=1

run ticks=400 verify_mode=immediate verify_delay=0
"""

_CASE_B_EVENTS = """\
event t=0 kind=arp_exchange src=h1 dst=h5
event t=0 kind=arp_exchange src=h2 dst=h6
event t=0 kind=arp_exchange src=h3 dst=h7
event t=0 kind=arp_exchange src=h4 dst=h8
event t=0 kind=start_flow id=BE1 src=h1 dst=h5 demand_mbps=5.7
event t=0 kind=start_flow id=BE2 src=h2 dst=h6 demand_mbps=3.7
event t=203 kind=start_flow id=G1 src=h3 dst=h7 demand_mbps=1.8 meter_mbps=2.0
event t=203 kind=start_flow id=G2 src=h4 dst=h8 demand_mbps=2.8 meter_mbps=3.0
"""


def _case_b_text() -> str:
    hosts, access, ipmac, dhcp = [], [], [], []
    for i in range(1, 17):
        leaf = f"s{(i - 1) // 4 + 1}"
        mac = f"AA-00-00-00-00-{i:02X}"
        hosts.append(f"host name=h{i} mac={mac} switch={leaf}")
        access.append(f"link a=h{i} b={leaf} capacity_mbps=9.4 gq_mbps=5.0")
        ipmac.append(f"ipmac ip=10.0.0.{i} mac={mac}")
        dhcp.append(f"event t=0 kind=dhcp host=h{i}")
    blocks = [_CASE_B_HEAD, "\n".join(hosts), "\n".join(access),
              "\n".join(ipmac), _CASE_B_TABLES, "\n".join(dhcp), _CASE_B_EVENTS]
    return "\n".join(blocks) + "\n"


BUILTIN_SCENARIOS: Dict[str, str] = {
    "case_a": CASE_A,
    "case_b": _case_b_text(),
}


def builtin_text(name: str) -> str:
    try:
        return BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown built-in scenario {name!r}; "
            f"choose from {sorted(BUILTIN_SCENARIOS)}") from None


def load_builtin(name: str) -> Scenario:
    return parse_scenario(builtin_text(name))
