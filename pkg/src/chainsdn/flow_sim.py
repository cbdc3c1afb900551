"""Fluid-model traffic engine, one tick = one simulated second.

Per link, guaranteed flows are served first from the guaranteed queue (each
metered, the queue capped at its maximum), and everything left over,
including unused guaranteed headroom, is shared max-min fair among
best-effort and demoted flows.  End-to-end rates are the fixed point of
re-running the per-link allocation with each flow's bottleneck rate as its
residual demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .provisioning import Flow, FlowState
from .topology import LinkState, Topology


def _water_fill(budget: float, demands: Dict[str, float]) -> Dict[str, float]:
    """Max-min fair split of ``budget`` across demands, keyed by flow id."""
    alloc = {fid: 0.0 for fid in demands}
    remaining = max(0.0, budget)
    # ascending demand makes the equal-share argument exact
    pending = sorted(demands, key=lambda fid: (demands[fid], fid))
    while pending and remaining > 0.0:
        share = remaining / len(pending)
        fid = pending[0]
        give = min(demands[fid], share)
        alloc[fid] = give
        remaining -= give
        pending.pop(0)
    return alloc


def allocate_link(link: LinkState, flows: Sequence[Flow],
                  demands: Optional[Mapping[str, float]] = None
                  ) -> Dict[str, float]:
    """Single-link allocation in bps for every flow crossing ``link``.

    ``demands`` overrides each flow's nominal demand (used for the fixed
    point); guaranteed flows are additionally metered.
    """
    want = {f.id: float(demands[f.id]) if demands else float(f.demand_bps)
            for f in flows}
    alloc: Dict[str, float] = {}

    guaranteed = [f for f in flows if f.state is FlowState.ActiveGuaranteed]
    for f in guaranteed:
        alloc[f.id] = min(want[f.id], float(f.meter_cap_bps))
    g_total = sum(alloc[f.id] for f in guaranteed)
    if g_total > link.guaranteed_queue_max_bps and g_total > 0:
        # queue cap binds: scale each metered demand proportionally
        scale = link.guaranteed_queue_max_bps / g_total
        for f in guaranteed:
            alloc[f.id] *= scale
        g_total = float(link.guaranteed_queue_max_bps)

    best_effort = [f for f in flows if f.state is not FlowState.ActiveGuaranteed]
    residual = link.capacity_bps - g_total
    alloc.update(_water_fill(residual, {f.id: want[f.id] for f in best_effort}))
    return alloc


@dataclass(frozen=True)
class TickAllocation:
    tick: int
    allocated_bps: Dict[str, float]
    loss_rate: Dict[str, float]


def compute_rates(topology: Topology, flows: Sequence[Flow]) -> Dict[str, float]:
    """End-to-end per-flow rates: fixed point of the per-link allocation.

    Each round re-runs every link's allocation with residual demands: a
    flow's demand at a link is its nominal demand capped by its allocation
    on its *other* links from the previous round (capping by the same link
    would freeze first-round shares and strand capacity).
    """
    flows = list(flows)
    link_keys: List[str] = []
    for f in flows:
        for key in f.path:
            if key not in link_keys:
                link_keys.append(key)
    crossing = {key: [f for f in flows if key in f.path] for key in link_keys}
    per_link: Dict[str, Dict[str, float]] = {
        key: {f.id: float(f.demand_bps) for f in crossing[key]}
        for key in link_keys
    }
    for _ in range(len(link_keys) + 2):
        updated: Dict[str, Dict[str, float]] = {}
        for key in link_keys:
            residual = {}
            for f in crossing[key]:
                other = [per_link[k][f.id] for k in f.path
                         if k != key and k in per_link]
                residual[f.id] = min([float(f.demand_bps)] + other)
            updated[key] = allocate_link(topology.links[key], crossing[key],
                                         residual)
        if updated == per_link:
            break
        per_link = updated
    rates = {}
    for f in flows:
        rates[f.id] = min([float(f.demand_bps)]
                          + [per_link[k][f.id] for k in f.path if k in per_link])
    return rates


def loss_rate(demand_bps: float, allocated_bps: float) -> float:
    if demand_bps <= 0:
        return 0.0
    return max(0.0, (demand_bps - allocated_bps) / demand_bps)


def step(tick: int, topology: Topology, flows: Sequence[Flow],
         control=None, provisioner=None) -> TickAllocation:
    """Advance one tick: allocate, then run the end-of-tick housekeeping
    (deferred verification flush and promotion re-check)."""
    rates = compute_rates(topology, flows)
    losses = {f.id: loss_rate(float(f.demand_bps), rates[f.id]) for f in flows}
    if control is not None:
        control.flush_all_deferred()
    if provisioner is not None:
        provisioner.try_promote()
    return TickAllocation(tick, rates, losses)


@dataclass
class MetricsRow:
    tick: int
    flow_id: str
    flow_class: str
    demand_bps: int
    allocated_bps: float
    loss_rate: float

    def csv_line(self) -> str:
        return (f"{self.tick},{self.flow_id},{self.flow_class},"
                f"{self.demand_bps},{round(self.allocated_bps)},"
                f"{self.loss_rate:.6f}")


@dataclass(frozen=True)
class TickAggregate:
    tick: int
    demand_bps: float
    allocated_bps: float
    loss_rate: float
    guaranteed_bps: float
    best_effort_bps: float


def metrics_series(rows: Sequence[MetricsRow]
                   ) -> Tuple[List[MetricsRow], List[TickAggregate]]:
    """The per-(tick, flow) table plus per-tick aggregate totals."""
    if not rows:
        raise ValueError("no metrics: the simulation has not run")
    by_tick: Dict[int, List[MetricsRow]] = {}
    for row in rows:
        by_tick.setdefault(row.tick, []).append(row)
    aggregates = []
    for tick in sorted(by_tick):
        group = by_tick[tick]
        demand = float(sum(r.demand_bps for r in group))
        allocated = sum(r.allocated_bps for r in group)
        guaranteed = sum(r.allocated_bps for r in group
                         if r.flow_class == "Guaranteed")
        aggregates.append(TickAggregate(
            tick, demand, allocated,
            loss_rate(demand, allocated),
            guaranteed, allocated - guaranteed))
    return list(rows), aggregates
