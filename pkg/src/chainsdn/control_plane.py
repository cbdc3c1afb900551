"""Controller-side logic: command integrity attestation and host admission.

Each controller records an MD5 digest of every outbound control command in
the ledger before the command leaves, and checks inbound commands against the
recorded digests, either immediately (drop on mismatch) or deferred through a
FIFO buffer that is flushed at tick boundaries.  The same module models DHCP
authorization against the IP-MAC table and ARP validation, including the
request-reply pairing rule that gates host-to-host traffic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

from .ledger import Ledger, md5_hex
from .topology import Host, Topology


class CommandKind(Enum):
    ArpRequest = "ArpRequest"
    ArpReply = "ArpReply"
    FlowMod = "FlowMod"
    Custom = "Custom"


BROADCAST = None  # dst_controller value meaning "all peers"


@dataclass(frozen=True)
class ControlCommand:
    kind: CommandKind
    src_controller: int
    dst_controller: Optional[int]  # None broadcasts to all peers
    payload: bytes
    timestamp_ms: int

    def __post_init__(self):
        if not self.payload:
            raise ValueError("command payload must be non-empty")
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be >= 0")

    def canonical_bytes(self) -> bytes:
        dst = "Broadcast" if self.dst_controller is None else str(self.dst_controller)
        text = (
            f"{self.kind.value}|{self.src_controller}|{dst}|"
            f"{self.payload.hex()}|{self.timestamp_ms}"
        )
        return text.encode("utf-8")


def compute_command_digest(cmd: ControlCommand) -> str:
    """MD5 over the canonical command encoding; pure and deterministic."""
    return md5_hex(cmd.canonical_bytes())


class VerifyMode(Enum):
    Immediate = "immediate"
    Deferred = "deferred"


@dataclass(frozen=True)
class VerificationResult:
    command_digest: str
    verified: bool
    mode: VerifyMode
    decided_at_ms: int


@dataclass(frozen=True)
class DeferredTicket:
    command_digest: str
    enqueued_at_ms: int
    eligible_tick: int


class SecurityEventKind(Enum):
    UnauthorizedHost = "UnauthorizedHost"
    ArpSpoof = "ArpSpoof"
    PostHocIntegrityFailure = "PostHocIntegrityFailure"
    ImmediateIntegrityFailure = "ImmediateIntegrityFailure"


@dataclass(frozen=True)
class SecurityEvent:
    time_ms: int
    kind: SecurityEventKind
    detail: str


class ArpOp(Enum):
    Request = "Request"
    Reply = "Reply"


@dataclass(frozen=True)
class ArpMessage:
    op: ArpOp
    sender_ip: str
    sender_mac: str
    target_ip: str
    target_mac: Optional[str] = None

    def __post_init__(self):
        if self.op is ArpOp.Request and self.target_mac:
            raise ValueError("ARP requests carry no target MAC")

    def encode(self) -> bytes:
        return (
            f"{self.op.value}|{self.sender_ip}|{self.sender_mac}|"
            f"{self.target_ip}|{self.target_mac or ''}"
        ).encode("utf-8")


def decode_arp(payload: bytes) -> ArpMessage:
    op, sender_ip, sender_mac, target_ip, target_mac = (
        payload.decode("utf-8").split("|")
    )
    return ArpMessage(ArpOp(op), sender_ip, sender_mac, target_ip,
                      target_mac or None)


class ArpAction(Enum):
    Flooded = "Flooded"
    Replied = "Replied"
    Qualified = "Qualified"
    Discarded = "Discarded"
    Forwarded = "Forwarded"
    Dropped = "Dropped"


class ArpPairRegistry:
    """Host-IP pairs allowed to talk, earned by a validated request+reply."""

    def __init__(self):
        self.pending: Set[Tuple[str, str]] = set()   # (requester_ip, target_ip)
        self.qualified: Set[frozenset] = set()

    def mark_request(self, requester_ip: str, target_ip: str) -> None:
        self.pending.add((requester_ip, target_ip))

    def mark_reply(self, requester_ip: str, replier_ip: str) -> bool:
        if (requester_ip, replier_ip) in self.pending:
            self.pending.discard((requester_ip, replier_ip))
            self.qualified.add(frozenset((requester_ip, replier_ip)))
            return True
        return False

    def is_qualified(self, ip_a: str, ip_b: str) -> bool:
        return frozenset((ip_a, ip_b)) in self.qualified


@dataclass
class TamperFault:
    """Armed in-transit fault: mutates one matching command at delivery time.

    Selection is by original (as-sent) digest when ``target_digest`` is set,
    otherwise by ``nth`` command sent after arming.
    """

    flip_byte: Optional[int] = 0
    timestamp_delta_ms: int = 0
    target_digest: Optional[str] = None
    nth: int = 1

    def matches(self, sent_digest: str, send_index: int) -> bool:
        if self.target_digest is not None:
            return sent_digest == self.target_digest
        return send_index == self.nth

    def apply(self, cmd: ControlCommand) -> ControlCommand:
        if self.timestamp_delta_ms:
            cmd = replace(cmd, timestamp_ms=cmd.timestamp_ms + self.timestamp_delta_ms)
        if self.flip_byte is not None:
            data = bytearray(cmd.payload)
            pos = self.flip_byte % len(data)
            data[pos] ^= 0xFF
            cmd = replace(cmd, payload=bytes(data))
        return cmd


@dataclass
class ControllerNode:
    id: int
    domain_id: int
    deferred: List[Tuple[DeferredTicket, ControlCommand]] = field(default_factory=list)
    last_sent_ms: int = 0


class ControlPlane:
    """All controllers plus the ordered message queue between them.

    Message delivery is driven by :meth:`drain`: sends enqueue, the driver
    drains in FIFO order, and deliveries may enqueue follow-ups (replies,
    forwards).  Everything is sequential, so runs are deterministic.
    """

    def __init__(
        self,
        topology: Topology,
        ledger: Ledger,
        verify_mode: VerifyMode = VerifyMode.Immediate,
        verify_delay_ticks: int = 0,
        event_sink: Optional[Callable[[SecurityEvent], None]] = None,
        audit_sink: Optional[Callable[[str, str, int], None]] = None,
    ):
        self.topology = topology
        self.ledger = ledger
        self.verify_mode = verify_mode
        self.verify_delay_ticks = verify_delay_ticks
        self.registry = ArpPairRegistry()
        self.nodes: Dict[int, ControllerNode] = {
            c.id: ControllerNode(c.id, c.domain_id)
            for c in topology.controllers.values()
        }
        self.now_ms = 0
        self.current_tick = 0
        self.results: List[VerificationResult] = []
        self._queue: List[Tuple[int, ControlCommand, str]] = []
        self._faults: List[TamperFault] = []
        self._sends_since_arm = 0
        self._event_sink = event_sink
        self._audit_sink = audit_sink

    # -- plumbing -------------------------------------------------------------

    def _emit(self, kind: SecurityEventKind, detail: str) -> None:
        if self._event_sink:
            self._event_sink(SecurityEvent(self.now_ms, kind, detail))

    def _audit(self, what: str, digest: str) -> None:
        if self._audit_sink:
            self._audit_sink(what, digest, self.now_ms)

    def arm_tamper(self, fault: TamperFault) -> None:
        self._faults.append(fault)
        self._sends_since_arm = 0

    def _controller_for_ip(self, ip: str) -> Optional[ControllerNode]:
        host = self.topology.host_by_ip(ip)
        if host is None:
            return None
        ctrl = self.topology.controller_of_domain(host.domain_id)
        return self.nodes[ctrl.id]

    # -- command integrity ------------------------------------------------------

    def send_command(self, src: int, cmd: ControlCommand) -> str:
        """Record the command digest in the ledger, then schedule delivery."""
        node = self.nodes[src]
        if cmd.src_controller != src:
            raise ValueError("src_controller does not match the sending controller")
        if cmd.timestamp_ms < node.last_sent_ms:
            raise ValueError("command timestamps must be non-decreasing per sender")
        digest = compute_command_digest(cmd)
        self.ledger.record_command_hash(digest)  # LedgerError => command not sent
        self._audit("recorded", digest)
        node.last_sent_ms = cmd.timestamp_ms
        self._sends_since_arm += 1
        if cmd.dst_controller is None:
            targets = sorted(self.topology.controllers[src].peer_ids)
        else:
            targets = [cmd.dst_controller]
        for dst in targets:
            queued = cmd
            for fault in list(self._faults):
                if fault.matches(digest, self._sends_since_arm):
                    queued = fault.apply(queued)
                    self._faults.remove(fault)
                    break
            self._queue.append((dst, queued, digest))
        return digest

    def drain(self) -> List[Union[VerificationResult, DeferredTicket]]:
        """Deliver queued commands in order until the queue settles."""
        outcomes = []
        while self._queue:
            dst, cmd, sent_digest = self._queue.pop(0)
            self._audit("delivered", sent_digest)
            outcomes.append(self.receive_command(dst, cmd, self.verify_mode))
        return outcomes

    def receive_command(self, dst: int, cmd: ControlCommand,
                        mode: Optional[VerifyMode] = None
                        ) -> Union[VerificationResult, DeferredTicket]:
        """Verify an inbound command now (Immediate) or deploy and buffer it."""
        mode = mode or self.verify_mode
        digest = compute_command_digest(cmd)
        if mode is VerifyMode.Immediate:
            verified = self.ledger.contains_command_hash(digest)
            result = VerificationResult(
                digest, verified, mode,
                self.now_ms + self.verify_delay_ticks * 1000,
            )
            self.results.append(result)
            if verified:
                self._deploy(dst, cmd)
            else:
                self._emit(SecurityEventKind.ImmediateIntegrityFailure, digest)
            return result
        ticket = DeferredTicket(digest, self.now_ms,
                                self.current_tick + self.verify_delay_ticks)
        self.nodes[dst].deferred.append((ticket, cmd))
        self._deploy(dst, cmd)  # deployed without verification
        return ticket

    def flush_deferred(self, dst: int) -> List[VerificationResult]:
        """Verify buffered digests in FIFO order; failures raise security events."""
        node = self.nodes[dst]
        flushed: List[VerificationResult] = []
        remaining: List[Tuple[DeferredTicket, ControlCommand]] = []
        for ticket, cmd in node.deferred:
            if ticket.eligible_tick > self.current_tick:
                remaining.append((ticket, cmd))
                continue
            verified = self.ledger.contains_command_hash(ticket.command_digest)
            result = VerificationResult(ticket.command_digest, verified,
                                        VerifyMode.Deferred, self.now_ms)
            self.results.append(result)
            flushed.append(result)
            if not verified:
                self._emit(SecurityEventKind.PostHocIntegrityFailure,
                           ticket.command_digest)
        node.deferred = remaining
        return flushed

    def flush_all_deferred(self) -> List[VerificationResult]:
        out = []
        for ctrl_id in sorted(self.nodes):
            out.extend(self.flush_deferred(ctrl_id))
        return out

    def _deploy(self, dst: int, cmd: ControlCommand) -> None:
        if cmd.kind in (CommandKind.ArpRequest, CommandKind.ArpReply):
            try:
                arp = decode_arp(cmd.payload)
            except (ValueError, UnicodeDecodeError):
                # Undecodable payload (e.g. deployed unverified after in-transit
                # corruption): nothing to deploy; the digest check still runs.
                return
            self.handle_arp(dst, arp, from_command=True)
        # FlowMod/Custom commands have no side effects beyond attestation.

    # -- host admission -----------------------------------------------------------

    def handle_dhcp(self, ctrl: int, mac: str) -> Optional[str]:
        """Release the bound IP for an authorized MAC, else deny and report."""
        ip = self.ledger.mac_authorized(mac)
        if ip is None:
            self._emit(SecurityEventKind.UnauthorizedHost, mac)
            return None
        host = self.topology.host_by_mac(mac)
        if host is not None:
            host.ip = ip
        return ip

    def _sender_binding_ok(self, arp: ArpMessage) -> bool:
        bound_mac = self.ledger.state.ip_to_mac.get(arp.sender_ip)
        return bound_mac is not None and bound_mac == arp.sender_mac

    def handle_arp(self, ctrl: int, arp: ArpMessage,
                   from_command: bool = False) -> ArpAction:
        """Validate one ARP message at controller ``ctrl`` and act on it."""
        node = self.nodes[ctrl]
        if not self._sender_binding_ok(arp):
            self._emit(SecurityEventKind.ArpSpoof,
                       f"{arp.sender_ip}/{arp.sender_mac}")
            return ArpAction.Dropped

        if arp.op is ArpOp.Request:
            target = self.topology.host_by_ip(arp.target_ip)
            if target is not None and target.domain_id == node.domain_id:
                # Target lives here: the target host answers the request.
                if not from_command:
                    self.registry.mark_request(arp.sender_ip, arp.target_ip)
                return self._reply_for(node, arp, target)
            if from_command:
                # Flood for somebody else's exchange; verified, then dropped.
                return ArpAction.Discarded
            self.registry.mark_request(arp.sender_ip, arp.target_ip)
            self.send_command(ctrl, ControlCommand(
                CommandKind.ArpRequest, ctrl, BROADCAST, arp.encode(), self.now_ms))
            return ArpAction.Flooded

        # Reply: route it to the requester's controller, then qualify the pair.
        requester = self.topology.host_by_ip(arp.target_ip)
        if requester is None:
            return ArpAction.Discarded
        if requester.domain_id == node.domain_id:
            if self.registry.mark_reply(arp.target_ip, arp.sender_ip):
                return ArpAction.Qualified
            return ArpAction.Discarded
        hop_path = self.topology.controller_path(node.domain_id, requester.domain_id)
        self.send_command(ctrl, ControlCommand(
            CommandKind.ArpReply, ctrl, hop_path[1], arp.encode(), self.now_ms))
        return ArpAction.Forwarded

    def _reply_for(self, node: ControllerNode, request: ArpMessage,
                   target: Host) -> ArpAction:
        reply = ArpMessage(ArpOp.Reply, target.ip, target.mac,
                           request.sender_ip, request.sender_mac)
        if not self._sender_binding_ok(reply):
            self._emit(SecurityEventKind.ArpSpoof, f"{reply.sender_ip}/{reply.sender_mac}")
            return ArpAction.Dropped
        requester = self.topology.host_by_ip(request.sender_ip)
        if requester is None:
            return ArpAction.Discarded
        if requester.domain_id == node.domain_id:
            # Both ends local: the exchange never crosses controllers.
            self.registry.mark_reply(request.sender_ip, reply.sender_ip)
            return ArpAction.Replied
        hop_path = self.topology.controller_path(node.domain_id, requester.domain_id)
        self.send_command(node.id, ControlCommand(
            CommandKind.ArpReply, node.id, hop_path[1], reply.encode(), self.now_ms))
        return ArpAction.Replied

    def originate_arp_request(self, src_host: Host, target_ip: str) -> ArpAction:
        """Entry point for a host-originated ARP request at its controller."""
        if src_host.ip is None:
            raise ValueError(f"host {src_host.name} has no IP (run DHCP first)")
        ctrl = self.topology.controller_of_domain(src_host.domain_id)
        arp = ArpMessage(ArpOp.Request, src_host.ip, src_host.mac, target_ip)
        return self.handle_arp(ctrl.id, arp)

    def can_communicate(self, h1: Host, h2: Host) -> bool:
        if h1.ip is None or h2.ip is None:
            return False
        return self.registry.is_qualified(h1.ip, h2.ip)
