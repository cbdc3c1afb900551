"""Figure rendering for run artifacts.

Reads the delimited metrics produced by a run and renders the two standard
views next to them: stacked per-flow bandwidth occupancy and per-flow loss
rate over time.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def read_metrics(metrics_csv) -> List[dict]:
    with Path(metrics_csv).open(newline="") as fh:
        return [
            {
                "tick": int(row["tick"]),
                "flow_id": row["flow_id"],
                "class": row["class"],
                "demand_bps": int(row["demand_bps"]),
                "allocated_bps": float(row["allocated_bps"]),
                "loss_rate": float(row["loss_rate"]),
            }
            for row in csv.DictReader(fh)
        ]


def _series(rows: List[dict], value_key: str) -> Tuple[List[int], Dict[str, List[float]]]:
    """Per-flow series aligned on the full tick range (0 where absent)."""
    if not rows:
        return [], {}
    ticks = list(range(min(r["tick"] for r in rows), max(r["tick"] for r in rows) + 1))
    index = {t: i for i, t in enumerate(ticks)}
    flows: Dict[str, List[float]] = {}
    for row in rows:
        series = flows.setdefault(row["flow_id"], [0.0] * len(ticks))
        series[index[row["tick"]]] = row[value_key]
    return ticks, flows


def render_report(out_dir) -> List[Path]:
    """Render bandwidth.png and loss.png beside an existing metrics.csv."""
    out = Path(out_dir)
    rows = read_metrics(out / "metrics.csv")
    written = []

    ticks, alloc = _series(rows, "allocated_bps")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if alloc:
        labels = sorted(alloc)
        ax.stackplot(ticks, [[v / 1e6 for v in alloc[f]] for f in labels],
                     labels=labels, alpha=0.85)
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("throughput (Mbps)")
    ax.set_title("Per-flow bandwidth occupancy")
    fig.tight_layout()
    path = out / "bandwidth.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    ticks, loss = _series(rows, "loss_rate")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for flow_id in sorted(loss):
        ax.plot(ticks, loss[flow_id], label=flow_id, linewidth=1.2)
    if loss:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("loss rate")
    ax.set_ylim(-0.02, 1.0)
    ax.set_title("Per-flow packet-loss rate")
    fig.tight_layout()
    path = out / "loss.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
