from pathlib import Path

import pytest

from chainsdn.cli import main
from chainsdn.control_plane import SecurityEventKind, VerifyMode
from chainsdn.engine import Simulation, run_scenario
from chainsdn.scenario import builtin_text, load_builtin, parse_scenario

SECURITY_KINDS = {k.value for k in SecurityEventKind}


def security_rows(events_csv: Path):
    rows = [line.split(",") for line in events_csv.read_text().splitlines()]
    return [r for r in rows if r[1] in SECURITY_KINDS]


def tampered_case_a(mode="immediate"):
    """case_a with the ARP reply corrupted in flight; the flow event is
    dropped because the pair can never qualify."""
    lines = [l for l in builtin_text("case_a").splitlines()
             if "start_flow" not in l]
    lines = [l.replace("verify_mode=immediate", f"verify_mode={mode}")
             for l in lines]
    at = next(i for i, l in enumerate(lines) if "arp_exchange" in l)
    lines.insert(at, "event t=0 kind=tamper nth=2 flip_byte=0")
    return "\n".join(lines) + "\n"


def test_case_a_clean_run(tmp_path):
    sim, result = run_scenario(load_builtin("case_a"), tmp_path)
    assert result.security_events == 0
    assert result.verifications_fail == 0
    assert result.verifications_pass == 3  # request at C0 and C2, reply at C1
    assert result.chain_valid
    assert security_rows(tmp_path / "events.csv") == []
    # record-before-send over the audit log
    recorded = {}
    for i, (what, digest, _) in enumerate(sim.audit_log):
        if what == "recorded" and digest not in recorded:
            recorded[digest] = i
        if what == "delivered":
            assert recorded[digest] < i
    for name in ("metrics.csv", "events.csv", "chain.log", "summary.txt"):
        assert (tmp_path / name).exists()


def test_case_a_flow_waits_for_qualified_pair():
    # moving the flow before the ARP exchange must be refused at run time
    lines = []
    for line in builtin_text("case_a").splitlines():
        if "arp_exchange" in line:
            continue
        lines.append(line)
    sim = Simulation(parse_scenario("\n".join(lines) + "\n"))
    with pytest.raises(Exception, match="qualified"):
        sim.run()


def test_tampered_reply_immediate(tmp_path):
    sim, result = run_scenario(parse_scenario(tampered_case_a()), tmp_path)
    rows = security_rows(tmp_path / "events.csv")
    assert len(rows) == 1
    assert rows[0][1] == "ImmediateIntegrityFailure"
    assert result.security_events == 1


def test_tampered_reply_deferred(tmp_path):
    sim, result = run_scenario(parse_scenario(tampered_case_a("deferred")),
                               tmp_path)
    rows = security_rows(tmp_path / "events.csv")
    assert [r[1] for r in rows] == ["PostHocIntegrityFailure"]


def test_metrics_rows_only_after_start_tick(tmp_path):
    sim, _ = run_scenario(load_builtin("case_b"), tmp_path)
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "tick,flow_id,class,demand_bps,allocated_bps,loss_rate"
    body = [l.split(",") for l in lines[1:]]
    assert len(body) == 2 * 400 + 2 * 197
    g_ticks = sorted({int(r[0]) for r in body if r[1] == "G1"})
    assert g_ticks[0] == 204 and g_ticks[-1] == 400
    be_ticks = sorted({int(r[0]) for r in body if r[1] == "BE1"})
    assert be_ticks[0] == 1 and be_ticks[-1] == 400


def test_stop_flow_event_removes_rows(tmp_path):
    text = builtin_text("case_a") + "event t=3 kind=stop_flow id=F1\n"
    sim, _ = run_scenario(parse_scenario(text), tmp_path)
    ticks = [row.tick for row in sim.metrics if row.flow_id == "F1"]
    assert ticks == [2, 3]  # started at t=1, stopped before tick 4


def test_metrics_series_rows_and_aggregates(tmp_path):
    sim, _ = run_scenario(load_builtin("case_b"), tmp_path)
    rows, aggregates = sim.metrics_series()

    def cell(tick, flow_id):
        return next(r for r in rows if r.tick == tick and r.flow_id == flow_id)

    assert round(cell(100, "BE1").allocated_bps) == 5_700_000
    assert cell(100, "BE1").loss_rate == 0.0
    assert round(cell(250, "G2").allocated_bps) == 2_800_000
    assert cell(250, "G2").loss_rate == 0.0
    assert round(cell(250, "BE1").allocated_bps) == 2_400_000
    assert abs(cell(250, "BE1").loss_rate - 0.579) < 0.001
    agg = {a.tick: a for a in aggregates}
    assert abs(agg[100].allocated_bps - 9.4e6) < 1
    assert abs(agg[250].guaranteed_bps - 4.6e6) < 1
    assert abs(agg[250].best_effort_bps - 4.8e6) < 1


def test_metrics_series_requires_a_run():
    sim = Simulation(load_builtin("case_a"))
    with pytest.raises(ValueError):
        sim.metrics_series()


def test_engine_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(load_builtin("case_a"), a)
    run_scenario(load_builtin("case_a"), b)
    for name in ("metrics.csv", "events.csv", "chain.log"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cli_run_builtin(tmp_path, capsys):
    code = main(["run", "--scenario", "case_a", "--out", str(tmp_path / "o")])
    out = capsys.readouterr().out
    assert code == 0
    assert "chain valid: true" in out
    assert (tmp_path / "o" / "summary.txt").exists()


def test_cli_exit_2_flags_detection(tmp_path):
    scenario_file = tmp_path / "tampered.scn"
    scenario_file.write_text(tampered_case_a())
    code = main(["run", "--scenario", str(scenario_file),
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_rejects_unknown_scenario(tmp_path, capsys):
    code = main(["run", "--scenario", "case_z", "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_cli_tick_and_mode_overrides(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--scenario", "case_b", "--out", str(out),
                 "--ticks", "10", "--verify-mode", "deferred"])
    assert code == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert max(int(l.split(",")[0]) for l in lines[1:]) == 10


def test_cli_report_renders_figures(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", "case_b", "--out", str(out),
                 "--ticks", "20"]) == 0
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "bandwidth.png").stat().st_size > 0
    assert (out / "loss.png").stat().st_size > 0


def test_run_plot_flag_renders_alongside_csv(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", "case_a", "--out", str(out),
                 "--plot"]) == 0
    assert (out / "bandwidth.png").exists()
    assert (out / "metrics.csv").exists()


def test_deferred_delay_postpones_flush(tmp_path):
    scn = load_builtin("case_a")
    sim, result = run_scenario(scn, tmp_path, verify_mode=VerifyMode.Deferred,
                               verify_delay=2)
    # all verifications still complete by end of run, just later
    assert result.verifications_pass == 3
    decided = [r.decided_at_ms for r in sim.control.results]
    assert min(decided) >= 2000
