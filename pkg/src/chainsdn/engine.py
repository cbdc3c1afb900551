"""Scenario driver: wires topology, ledger, control plane and provisioning
together and advances them tick by tick, collecting the output artifacts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import flow_sim
from .flow_sim import MetricsRow, TickAggregate
from .control_plane import (
    BROADCAST,
    CommandKind,
    ControlCommand,
    ControlPlane,
    SecurityEvent,
    TamperFault,
    VerifyMode,
)
from .ledger import Ledger, SlaEntry, SlaFlag
from .provisioning import ProvisionRequest, Provisioner
from .scenario import EventRecord, Scenario, ScenarioError
from .topology import Controller, Host, LinkInput, Switch, Topology


@dataclass
class RunResult:
    ticks_run: int
    security_events: int
    verifications_pass: int
    verifications_fail: int
    chain_valid: bool


def _build_topology(scn: Scenario) -> Topology:
    controllers = [Controller(c.id, c.domain, c.peers) for c in scn.controllers]
    switches = [Switch(s.id, s.domain, s.edge) for s in scn.switches]
    hosts = [Host(h.name, h.mac.replace(":", "-").upper(), h.switch, 0)
             for h in scn.hosts]
    links = [LinkInput(l.a, l.b, l.capacity_bps, l.gq_bps) for l in scn.links]
    return Topology(controllers, switches, hosts, links)


class Simulation:
    """One deterministic run of a parsed scenario."""

    def __init__(self, scn: Scenario):
        self.scenario = scn
        self.topology = _build_topology(scn)
        self.ledger = Ledger(self.topology.link_specs())
        self.security_events: List[SecurityEvent] = []
        self.event_lines: List[str] = []
        self.audit_log: List[Tuple[str, str, int]] = []
        self.metrics: List[MetricsRow] = []
        self.flow_records: Dict[str, Tuple[str, str]] = {}
        self.control = ControlPlane(
            self.topology, self.ledger,
            verify_mode=scn.verify_mode,
            verify_delay_ticks=scn.verify_delay_ticks,
            event_sink=self._on_security_event,
            audit_sink=lambda what, digest, t: self.audit_log.append((what, digest, t)),
        )
        self.provisioner = Provisioner(
            self.topology, self.ledger,
            can_communicate=self.control.can_communicate,
            event_sink=self.event_lines.append,
        )
        self._load_tables(scn)
        self._cursor = 0

    def _on_security_event(self, event: SecurityEvent) -> None:
        self.security_events.append(event)
        self.event_lines.append(f"{event.time_ms},{event.kind.value},{event.detail}")

    def _load_tables(self, scn: Scenario) -> None:
        for entry in scn.ipmac:
            self.ledger.put_ip_mac(entry.ip, entry.mac)
        for row in scn.sla:
            self.ledger.put_sla(SlaEntry(row.index, row.src, row.dst,
                                         row.bw_bps, SlaFlag(row.flag)))
        for t in scn.traversal:
            switch = self.topology.switches[t.edge_switch]
            from_domain = self.topology.controllers[t.from_controller].domain_id
            if switch.domain_id != from_domain or not switch.is_domain_edge:
                raise ScenarioError(
                    f"traversal {t.from_controller}->{t.to_controller}: "
                    f"{t.edge_switch} is not a domain-edge switch of domain "
                    f"{from_domain}")
            self.ledger.set_traversal_edge(t.from_controller, t.to_controller,
                                           t.edge_switch)

    # -- event dispatch -----------------------------------------------------------

    def _host(self, name: Optional[str]) -> Host:
        if name is None or name not in self.topology.hosts:
            raise ScenarioError(f"unknown host {name!r}")
        return self.topology.hosts[name]

    def _apply_event(self, ev: EventRecord) -> None:
        try:
            self._dispatch_event(ev)
        except ValueError as exc:
            raise ScenarioError(
                f"event {ev.kind} at t={ev.time}: {exc}") from exc

    def _dispatch_event(self, ev: EventRecord) -> None:
        if ev.kind == "dhcp":
            host = self._host(ev.get("host"))
            ctrl = self.topology.controller_of_domain(host.domain_id)
            self.control.handle_dhcp(ctrl.id, host.mac)
        elif ev.kind == "arp_exchange":
            src = self._host(ev.get("src"))
            dst = self._host(ev.get("dst"))
            if dst.ip is None:
                raise ScenarioError(f"host {dst.name} has no IP (run DHCP first)")
            self.control.originate_arp_request(src, dst.ip)
            self.control.drain()
        elif ev.kind == "send_command":
            src = int(ev.get("src"))
            dst_text = ev.get("dst")
            dst = BROADCAST if dst_text == "broadcast" else int(dst_text)
            kind = CommandKind(ev.get("command_kind", "Custom"))
            payload = ev.get("payload", "noop").encode("utf-8")
            cmd = ControlCommand(kind, src, dst, payload, self.control.now_ms)
            self.control.send_command(src, cmd)
            self.control.drain()
        elif ev.kind == "tamper":
            flip = ev.get("flip_byte")
            delta = int(ev.get("timestamp_delta_ms", "0"))
            fault = TamperFault(
                flip_byte=int(flip) if flip is not None else (None if delta else 0),
                timestamp_delta_ms=delta,
                target_digest=ev.get("target_digest"),
                nth=int(ev.get("nth", "1")),
            )
            self.control.arm_tamper(fault)
        elif ev.kind in ("start_flow", "provision"):
            src = self._host(ev.get("src"))
            dst = self._host(ev.get("dst"))
            req = ProvisionRequest(src.name, dst.name, src.ip, dst.ip,
                                   self.control.now_ms)
            demand = round(float(ev.get("demand_mbps", "0")) * 1_000_000)
            meter_text = ev.get("meter_mbps")
            meter = round(float(meter_text) * 1_000_000) if meter_text else None
            outcome = self.provisioner.provision(req, demand, meter, ev.get("id"))
            self.flow_records[outcome.flow.id] = (src.name, dst.name)
        elif ev.kind == "stop_flow":
            self.provisioner.teardown(ev.get("id"))
        else:  # pragma: no cover - parser rejects unknown kinds
            raise ScenarioError(f"unhandled event kind {ev.kind}")

    def _set_clocks(self, now_ms: int, tick: int) -> None:
        self.ledger.clock_ms = now_ms
        self.control.now_ms = now_ms
        self.control.current_tick = tick
        self.provisioner.now_ms = now_ms

    # -- main loop ----------------------------------------------------------------

    def run(self, ticks: Optional[int] = None) -> RunResult:
        ticks = self.scenario.ticks if ticks is None else ticks
        events = self.scenario.events
        for tick in range(1, ticks + 1):
            self._set_clocks((tick - 1) * 1000, tick)
            while self._cursor < len(events) and events[self._cursor].time <= tick - 1:
                self._apply_event(events[self._cursor])
                self._cursor += 1
            self._set_clocks(tick * 1000, tick)
            flows = list(self.provisioner.flows.values())
            allocation = flow_sim.step(tick, self.topology, flows,
                                       control=self.control,
                                       provisioner=self.provisioner)
            for flow in flows:
                self.metrics.append(MetricsRow(
                    tick, flow.id, flow.flow_class.value, flow.demand_bps,
                    allocation.allocated_bps[flow.id],
                    allocation.loss_rate[flow.id]))
        passes = sum(1 for r in self.control.results if r.verified)
        fails = len(self.control.results) - passes
        return RunResult(ticks, len(self.security_events), passes, fails,
                         self.ledger.validate_chain())

    def metrics_series(self) -> Tuple[List[MetricsRow], List[TickAggregate]]:
        return flow_sim.metrics_series(self.metrics)

    # -- artifacts ----------------------------------------------------------------

    def write_outputs(self, out_dir) -> List[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics_path = out / "metrics.csv"
        with metrics_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("tick,flow_id,class,demand_bps,allocated_bps,loss_rate\n")
            for row in self.metrics:
                fh.write(row.csv_line() + "\n")
        events_path = out / "events.csv"
        with events_path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in self.event_lines:
                fh.write(line + "\n")
        chain_path = out / "chain.log"
        with chain_path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in self.ledger.export_chain():
                fh.write(line + "\n")
        summary_path = out / "summary.txt"
        with summary_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(self._summary_text())
        return [metrics_path, events_path, chain_path, summary_path]

    def _summary_text(self) -> str:
        passes = sum(1 for r in self.control.results if r.verified)
        fails = len(self.control.results) - passes
        lines = [
            f"chain valid: {str(self.ledger.validate_chain()).lower()}",
            f"chain blocks: {len(self.ledger.blocks)}",
            f"verifications: {passes} pass, {fails} fail",
            f"security events: {len(self.security_events)}",
        ]
        per_flow: Dict[str, List[MetricsRow]] = {}
        for row in self.metrics:
            per_flow.setdefault(row.flow_id, []).append(row)
        for flow_id, rows in per_flow.items():
            mean_bps = sum(r.allocated_bps for r in rows) / len(rows)
            mean_loss = sum(r.loss_rate for r in rows) / len(rows)
            lines.append(
                f"flow {flow_id}: class={rows[0].flow_class} ticks={len(rows)} "
                f"mean_throughput_bps={mean_bps:.1f} mean_loss={mean_loss:.6f}")
        return "\n".join(lines) + "\n"


def run_scenario(scn: Scenario, out_dir, ticks: Optional[int] = None,
                 verify_mode: Optional[VerifyMode] = None,
                 verify_delay: Optional[int] = None) -> Tuple[Simulation, RunResult]:
    """Parse-level entry point used by the CLI: run and write artifacts."""
    if verify_mode is not None:
        scn.verify_mode = verify_mode
    if verify_delay is not None:
        scn.verify_delay_ticks = verify_delay
    sim = Simulation(scn)
    result = sim.run(ticks)
    sim.write_outputs(out_dir)
    return sim, result
