"""Deterministic simulator for a ledger-backed multi-domain SDN control plane.

The package models three cooperating mechanisms: command-integrity
attestation against an append-only hash chain, IP-MAC-based host admission,
and SLA-driven bandwidth provisioning with guaranteed and best-effort
traffic classes served by a fluid traffic engine.
"""

from .control_plane import (
    ArpMessage,
    ArpOp,
    ControlCommand,
    ControlPlane,
    CommandKind,
    SecurityEvent,
    SecurityEventKind,
    VerificationResult,
    VerifyMode,
    compute_command_digest,
)
from .engine import RunResult, Simulation, run_scenario
from .flow_sim import (
    MetricsRow,
    TickAggregate,
    allocate_link,
    compute_rates,
    metrics_series,
)
from .ledger import Block, Ledger, LedgerError, SlaEntry, SlaFlag, Transaction, md5_hex
from .provisioning import (
    Flow,
    FlowClass,
    FlowState,
    OutcomeKind,
    ProvisionOutcome,
    ProvisionRequest,
    Provisioner,
)
from .scenario import Scenario, load_builtin, parse_scenario, serialize
from .topology import Controller, Host, LinkState, Switch, Topology, build_topology

__all__ = [
    "ArpMessage",
    "ArpOp",
    "Block",
    "CommandKind",
    "ControlCommand",
    "ControlPlane",
    "Controller",
    "Flow",
    "FlowClass",
    "FlowState",
    "Host",
    "Ledger",
    "LedgerError",
    "LinkState",
    "MetricsRow",
    "OutcomeKind",
    "ProvisionOutcome",
    "ProvisionRequest",
    "Provisioner",
    "RunResult",
    "Scenario",
    "SecurityEvent",
    "SecurityEventKind",
    "Simulation",
    "SlaEntry",
    "SlaFlag",
    "Switch",
    "TickAggregate",
    "Topology",
    "Transaction",
    "VerificationResult",
    "VerifyMode",
    "allocate_link",
    "build_topology",
    "compute_command_digest",
    "compute_rates",
    "load_builtin",
    "md5_hex",
    "metrics_series",
    "parse_scenario",
    "run_scenario",
    "serialize",
]

__version__ = "0.1.0"
