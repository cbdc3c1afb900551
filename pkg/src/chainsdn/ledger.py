"""Simulated permissioned ledger: an append-only, MD5-chained block log.

Every mutation of the shared control state (command hashes, IP-MAC table,
SLA table, link bandwidth matrices, traversal edge-switch matrix) goes
through a transaction that is sealed into its own block.  Rejected
transactions leave the chain untouched.  The chain is single-writer and
strictly ordered; there is no consensus machinery.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

ZERO_DIGEST = "0" * 32

_HEX_CHARS = set("0123456789abcdef")


def md5_hex(data: bytes) -> str:
    """Lowercase 32-char hex MD5 of raw bytes."""
    return hashlib.md5(data).hexdigest()


def is_digest(value: str) -> bool:
    return isinstance(value, str) and len(value) == 32 and set(value) <= _HEX_CHARS


class LedgerError(Exception):
    """Base class for rejected transactions and malformed inputs."""


class MalformedDigest(LedgerError):
    pass


class DuplicateMac(LedgerError):
    pass


class DuplicateIp(LedgerError):
    pass


class DuplicateSlaIndex(LedgerError):
    pass


class DuplicateSlaRoute(LedgerError):
    pass


class UnknownSlaIndex(LedgerError):
    pass


class InvalidSlaEntry(LedgerError):
    pass


class NegativeBandwidth(LedgerError):
    pass


class UnknownLink(LedgerError):
    pass


class InsufficientBandwidth(LedgerError):
    def __init__(self, link_key: str, available: int, requested: int):
        super().__init__(
            f"link {link_key}: {requested} bps requested, {available} bps available"
        )
        self.link_key = link_key
        self.available = available
        self.requested = requested


class OverRelease(LedgerError):
    def __init__(self, link_key: str):
        super().__init__(f"release on {link_key} would exceed the guaranteed queue maximum")
        self.link_key = link_key


class BrokenSequence(LedgerError):
    pass


def normalize_mac(mac: str) -> str:
    """Canonical MAC form: uppercase, dash-separated octet pairs."""
    groups = mac.replace(":", "-").upper().split("-")
    if len(groups) != 6 or any(len(g) != 2 or set(g.lower()) - _HEX_CHARS for g in groups):
        raise LedgerError(f"malformed MAC address: {mac!r}")
    return "-".join(groups)


def _check_token(value: str, what: str) -> str:
    # Field values are embedded in '|'- and ','-joined canonical strings.
    if not value or any(c in value for c in "|,; \t\n"):
        raise LedgerError(f"malformed {what}: {value!r}")
    return value


class SlaFlag(IntEnum):
    BestEffort = 0
    Guaranteed = 1


@dataclass(frozen=True)
class SlaEntry:
    """One row of the SLA definition table."""

    index: int
    src_ip: str
    dst_ip: str
    sla_bandwidth_bps: int
    flag: SlaFlag

    def canonical(self) -> str:
        return (
            f"{self.index},{self.src_ip},{self.dst_ip},"
            f"{self.sla_bandwidth_bps},{int(self.flag)}"
        )


@dataclass(frozen=True)
class IpMacEntry:
    ip: str
    mac: str

    def canonical(self) -> str:
        return f"{self.ip},{self.mac}"


class TxKind(Enum):
    RecordCommandHash = "RecordCommandHash"
    PutIpMac = "PutIpMac"
    PutSla = "PutSla"
    UpdateSla = "UpdateSla"
    ReserveBandwidth = "ReserveBandwidth"
    ReleaseBandwidth = "ReleaseBandwidth"
    SetTraversalEdge = "SetTraversalEdge"


@dataclass(frozen=True)
class RecordCommandHash:
    digest: str

    def canonical(self) -> str:
        return self.digest


@dataclass(frozen=True)
class BandwidthChange:
    """Payload shared by reserve and release transactions."""

    links: Tuple[str, ...]
    bw_bps: int

    def canonical(self) -> str:
        return f"{';'.join(self.links)},{self.bw_bps}"


@dataclass(frozen=True)
class SetTraversalEdge:
    from_controller: int
    to_controller: int
    edge_switch: str

    def canonical(self) -> str:
        return f"{self.from_controller},{self.to_controller},{self.edge_switch}"


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    payload: object
    seq: int

    def canonical(self) -> str:
        return f"{self.seq}|{self.kind.value}|{self.payload.canonical()}"


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: str
    timestamp_ms: int
    transactions: Tuple[Transaction, ...]
    block_hash: str

    def encode_unsealed(self) -> str:
        """Canonical encoding hashed into block_hash (everything but the hash)."""
        txs = "|".join(tx.canonical() for tx in self.transactions)
        return f"{self.index}|{self.prev_hash}|{self.timestamp_ms}|{txs}"

    def export_line(self) -> str:
        return f"{self.encode_unsealed()}|{self.block_hash}"


def seal_block(index: int, prev_hash: str, timestamp_ms: int, tx: Transaction) -> Block:
    unsealed = Block(index, prev_hash, timestamp_ms, (tx,), "")
    return Block(index, prev_hash, timestamp_ms, (tx,),
                 md5_hex(unsealed.encode_unsealed().encode("utf-8")))


def validate_blocks(blocks: Sequence[Block]) -> bool:
    """True iff every hash, back-link and transaction sequence number checks out."""
    expected_seq = 0
    prev = ZERO_DIGEST
    for i, block in enumerate(blocks):
        if block.index != i or block.prev_hash != prev:
            return False
        if md5_hex(block.encode_unsealed().encode("utf-8")) != block.block_hash:
            return False
        for tx in block.transactions:
            if tx.seq != expected_seq:
                return False
            expected_seq += 1
        prev = block.block_hash
    return True


@dataclass(frozen=True)
class LinkSpec:
    """Genesis entry for one reservable link.

    ``domain`` is None for inter-domain backbone links and carries the owning
    domain for intra-domain and host-access links.
    """

    key: str
    guaranteed_queue_max_bps: int
    domain: Optional[int] = None


def inter_link_key(controller_a: int, controller_b: int) -> str:
    lo, hi = sorted((controller_a, controller_b))
    return f"inter:{lo}-{hi}"


def intra_link_key(endpoint_a: str, endpoint_b: str) -> str:
    lo, hi = sorted((endpoint_a, endpoint_b))
    return f"intra:{lo}-{hi}"


class BandwidthMatrices:
    """Available guaranteed bandwidth per link, split into the inter-controller
    matrix (backbone links keyed by controller pair) and the per-domain
    intra-controller matrices.  Entries are symmetric by construction: a link
    key normalizes both endpoint orders to the same string.
    """

    def __init__(self, specs: Sequence[LinkSpec]):
        self.caps: Dict[str, int] = {}
        self.available: Dict[str, int] = {}
        self._domains: Dict[str, Optional[int]] = {}
        for spec in specs:
            if spec.key in self.caps:
                raise LedgerError(f"duplicate link key {spec.key}")
            if spec.guaranteed_queue_max_bps < 0:
                raise NegativeBandwidth(spec.key)
            self.caps[spec.key] = spec.guaranteed_queue_max_bps
            self.available[spec.key] = spec.guaranteed_queue_max_bps
            self._domains[spec.key] = spec.domain

    def inter(self) -> Dict[str, int]:
        return {k: v for k, v in self.available.items() if k.startswith("inter:")}

    def intra(self, domain: Optional[int] = None) -> Dict[str, int]:
        return {
            k: v
            for k, v in self.available.items()
            if k.startswith("intra:") and (domain is None or self._domains[k] == domain)
        }

    def snapshot(self) -> Dict[str, int]:
        return dict(self.available)


class ChainState:
    """Contract state derived purely from the genesis link table plus the
    ordered transaction history."""

    def __init__(self, link_specs: Sequence[LinkSpec] = ()):
        self.command_hashes: Set[str] = set()
        self.ip_to_mac: Dict[str, str] = {}
        self.mac_to_ip: Dict[str, str] = {}
        self.sla_by_index: Dict[int, SlaEntry] = {}
        self.sla_by_route: Dict[Tuple[str, str], int] = {}
        self.matrices = BandwidthMatrices(link_specs)
        self.traversal: Dict[Tuple[int, int], str] = {}

    def apply(self, tx: Transaction) -> None:
        """Validate and apply one transaction; raises before mutating anything."""
        kind, payload = tx.kind, tx.payload
        if kind is TxKind.RecordCommandHash:
            if not is_digest(payload.digest):
                raise MalformedDigest(payload.digest)
            self.command_hashes.add(payload.digest)
        elif kind is TxKind.PutIpMac:
            if payload.mac in self.mac_to_ip:
                raise DuplicateMac(payload.mac)
            if payload.ip in self.ip_to_mac:
                raise DuplicateIp(payload.ip)
            self.ip_to_mac[payload.ip] = payload.mac
            self.mac_to_ip[payload.mac] = payload.ip
        elif kind is TxKind.PutSla:
            self._check_sla(payload)
            if payload.index in self.sla_by_index:
                raise DuplicateSlaIndex(str(payload.index))
            if (payload.src_ip, payload.dst_ip) in self.sla_by_route:
                raise DuplicateSlaRoute(f"{payload.src_ip}->{payload.dst_ip}")
            self.sla_by_index[payload.index] = payload
            self.sla_by_route[(payload.src_ip, payload.dst_ip)] = payload.index
        elif kind is TxKind.UpdateSla:
            self._check_sla(payload)
            old = self.sla_by_index.get(payload.index)
            if old is None:
                raise UnknownSlaIndex(str(payload.index))
            holder = self.sla_by_route.get((payload.src_ip, payload.dst_ip))
            if holder is not None and holder != payload.index:
                raise DuplicateSlaRoute(f"{payload.src_ip}->{payload.dst_ip}")
            del self.sla_by_route[(old.src_ip, old.dst_ip)]
            self.sla_by_index[payload.index] = payload
            self.sla_by_route[(payload.src_ip, payload.dst_ip)] = payload.index
        elif kind is TxKind.ReserveBandwidth:
            self._check_change(payload)
            for key in payload.links:
                avail = self.matrices.available[key]
                if avail < payload.bw_bps:
                    raise InsufficientBandwidth(key, avail, payload.bw_bps)
            for key in payload.links:
                self.matrices.available[key] -= payload.bw_bps
        elif kind is TxKind.ReleaseBandwidth:
            self._check_change(payload)
            for key in payload.links:
                if self.matrices.available[key] + payload.bw_bps > self.matrices.caps[key]:
                    raise OverRelease(key)
            for key in payload.links:
                self.matrices.available[key] += payload.bw_bps
        elif kind is TxKind.SetTraversalEdge:
            self.traversal[(payload.from_controller, payload.to_controller)] = (
                payload.edge_switch
            )
        else:  # pragma: no cover - enum is closed
            raise LedgerError(f"unknown transaction kind {kind}")

    def _check_sla(self, entry: SlaEntry) -> None:
        if entry.sla_bandwidth_bps < 0:
            raise NegativeBandwidth(str(entry.sla_bandwidth_bps))
        if entry.flag is SlaFlag.Guaranteed and entry.sla_bandwidth_bps <= 0:
            raise InvalidSlaEntry("guaranteed entries need a positive bandwidth")

    def _check_change(self, payload: BandwidthChange) -> None:
        if payload.bw_bps < 0:
            raise NegativeBandwidth(str(payload.bw_bps))
        for key in payload.links:
            if key not in self.matrices.available:
                raise UnknownLink(key)


class Ledger:
    """Single-writer chain plus the contract state it produces.

    ``clock_ms`` is stamped into sealed blocks; the simulation driver keeps it
    in sync with scenario time so chains are reproducible run to run.
    """

    def __init__(self, link_specs: Sequence[LinkSpec] = ()):
        self._link_specs = tuple(link_specs)
        self.blocks: List[Block] = []
        self.state = ChainState(link_specs)
        self.clock_ms = 0

    # -- chain core ---------------------------------------------------------

    def _next_seq(self) -> int:
        return sum(len(b.transactions) for b in self.blocks)

    def append_transaction(self, tx: Transaction) -> Block:
        """Validate, apply and seal ``tx`` into a new block (one tx per block)."""
        if tx.seq != self._next_seq():
            raise BrokenSequence(f"expected seq {self._next_seq()}, got {tx.seq}")
        self.state.apply(tx)  # raises on rejection; chain untouched
        prev = self.blocks[-1].block_hash if self.blocks else ZERO_DIGEST
        block = seal_block(len(self.blocks), prev, self.clock_ms, tx)
        self.blocks.append(block)
        return block

    def _append(self, kind: TxKind, payload: object) -> Block:
        return self.append_transaction(Transaction(kind, payload, self._next_seq()))

    def validate_chain(self) -> bool:
        return validate_blocks(self.blocks)

    def export_chain(self) -> List[str]:
        return [b.export_line() for b in self.blocks]

    def replayed_state(self) -> ChainState:
        """Rebuild contract state from the genesis config plus the chain."""
        state = ChainState(self._link_specs)
        for block in self.blocks:
            for tx in block.transactions:
                state.apply(tx)
        return state

    # -- command hashes -----------------------------------------------------

    def record_command_hash(self, digest: str) -> Block:
        if not is_digest(digest):
            raise MalformedDigest(digest)
        return self._append(TxKind.RecordCommandHash, RecordCommandHash(digest))

    def contains_command_hash(self, digest: str) -> bool:
        return digest in self.state.command_hashes

    # -- IP-MAC table -------------------------------------------------------

    def put_ip_mac(self, ip: str, mac: str) -> Block:
        entry = IpMacEntry(_check_token(ip, "IP"), normalize_mac(mac))
        return self._append(TxKind.PutIpMac, entry)

    def mac_authorized(self, mac: str) -> Optional[str]:
        try:
            mac = normalize_mac(mac)
        except LedgerError:
            return None
        return self.state.mac_to_ip.get(mac)

    # -- SLA table ----------------------------------------------------------

    def put_sla(self, entry: SlaEntry) -> Block:
        _check_token(entry.src_ip, "IP")
        _check_token(entry.dst_ip, "IP")
        return self._append(TxKind.PutSla, entry)

    def update_sla(self, entry: SlaEntry) -> Block:
        _check_token(entry.src_ip, "IP")
        _check_token(entry.dst_ip, "IP")
        return self._append(TxKind.UpdateSla, entry)

    def find_sla(self, src_ip: str, dst_ip: str) -> Optional[SlaEntry]:
        index = self.state.sla_by_route.get((src_ip, dst_ip))
        return None if index is None else self.state.sla_by_index[index]

    # -- bandwidth matrices -------------------------------------------------

    def reserve_bandwidth(self, path_links: Iterable[str], bw_bps: int) -> Block:
        payload = BandwidthChange(tuple(path_links), bw_bps)
        return self._append(TxKind.ReserveBandwidth, payload)

    def release_bandwidth(self, path_links: Iterable[str], bw_bps: int) -> Block:
        payload = BandwidthChange(tuple(path_links), bw_bps)
        return self._append(TxKind.ReleaseBandwidth, payload)

    def available_bandwidth(self, link_key: str) -> int:
        if link_key not in self.state.matrices.available:
            raise UnknownLink(link_key)
        return self.state.matrices.available[link_key]

    # -- traversal matrix ---------------------------------------------------

    def set_traversal_edge(self, from_controller: int, to_controller: int,
                           edge_switch: str) -> Block:
        payload = SetTraversalEdge(from_controller, to_controller,
                                   _check_token(edge_switch, "switch id"))
        return self._append(TxKind.SetTraversalEdge, payload)

    def traversal_edge(self, from_controller: int, to_controller: int) -> Optional[str]:
        return self.state.traversal.get((from_controller, to_controller))
