"""Command-line front end.

Subcommands
-----------
* ``run``         -- one realization: full event log plus per-run CSVs
  (victim trace, hop traces, accuracy table, link table, node table).
* ``sweep``       -- seeded Monte Carlo over many realizations (and over a
  slot-count sweep when the scenario defines one): per-realization victim
  CSVs and stats, aggregated collision curve, ``summary.json``.
* ``report``      -- human-readable summary of a run or sweep directory,
  including comparisons against the documented expectation bands.
* ``preset-dump`` -- write a named preset scenario as an editable JSON file.

The default output directory is ``./out``, overridable with ``--out`` or the
``SLOTMESH_OUT`` environment variable.  Sweep realization seeds derive
deterministically from the scenario seed, so interrupted sweeps resume from
the realization indices already on disk and reproduce identical results.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import metrics
from .engine import RunResult, Simulator, mix64
from .scenarios import (
    PRESETS,
    Scenario,
    ScenarioError,
    dump_scenario,
    load_scenario,
    preset,
)

OUT_ENV_VAR = "SLOTMESH_OUT"

# Expectation bands printed by `report` for the presets they apply to:
# (group n_slot, label, predicate over the group summary + curve rows).
_TAIL_FRACTION = 0.6  # stats window for residual victims: [0.6*horizon, horizon)


def _default_out() -> str:
    return os.environ.get(OUT_ENV_VAR, "out")


def _write_atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_atomic_csv(path: Path, writer_fn, *args) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer_fn(tmp, *args)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Scenario loading


def _load_from_args(args: argparse.Namespace) -> Scenario:
    if args.preset and args.scenario:
        raise ScenarioError(["give either --preset or --scenario, not both"])
    if args.preset:
        sc = preset(args.preset)
    elif args.scenario:
        sc = load_scenario(args.scenario)
    else:
        raise ScenarioError(["one of --preset or --scenario is required"])
    if getattr(args, "seed", None) is not None:
        sc = replace(sc, seed=args.seed)
    if getattr(args, "realizations", None) is not None:
        if args.realizations < 1:
            raise ScenarioError(["--realizations must be >= 1"])
        sc = replace(sc, realizations=args.realizations)
    return sc


# ---------------------------------------------------------------------------
# run


def _write_nodes_csv(path: Path, result: RunResult) -> None:
    """Columns: node,x_m,y_m,is_reference,slot,hop (slot/hop empty if off)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "x_m", "y_m", "is_reference", "slot", "hop"])
        for node in result.node_ids:
            x, y = result.coords[node - 1]
            state = result.finals.get(node, {})
            online = state.get("online", False)
            writer.writerow([
                node, f"{x:.3f}", f"{y:.3f}", int(node in result.ref_ids),
                state["slot"] if online else "",
                state["hop"] if online else "",
            ])


def _run_accuracy(result: RunResult, sc: Scenario):
    online = sorted(n for n, s in result.finals.items() if s.get("online"))
    adjacency = metrics.god_view_adjacency(result.link, online)
    refs = [r for r in result.ref_ids if r in adjacency]
    hop_rows = metrics.hop_accuracy(
        result.final_hops(), adjacency, refs, sc.timing.h_na
    )
    neighbor_rows = metrics.neighbor_accuracy(result.finals, result.link)
    return hop_rows, neighbor_rows


def cmd_run(sc: Scenario, out_dir: Path, detail: str = "full") -> int:
    if sc.n_slot_sweep:
        sc = sc.with_n_slot(sc.timing.n_slot)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = Simulator(sc, sc.seed, detail=detail).run()
    tag = f"seed{sc.seed}"

    _write_atomic_text(out_dir / "scenario.json",
                       json.dumps(dump_scenario(sc), indent=2) + "\n")
    if detail == "full":
        _write_atomic_text(out_dir / f"run-{tag}.log", result.serialize_log())
    trace = metrics.victim_trace(result)
    _write_atomic_csv(out_dir / f"victims-{tag}.csv",
                      metrics.write_victim_trace_csv, trace)
    _write_atomic_csv(out_dir / f"hops-{tag}.csv",
                      metrics.write_hop_traces_csv, result.hop_events)
    hop_rows, neighbor_rows = _run_accuracy(result, sc)
    _write_atomic_csv(out_dir / f"accuracy-{tag}.csv",
                      metrics.write_accuracy_csv, hop_rows, neighbor_rows)
    _write_atomic_csv(out_dir / f"links-{tag}.csv", metrics.write_link_csv,
                      result.link)
    _write_atomic_csv(out_dir / f"nodes-{tag}.csv", _write_nodes_csv, result)

    consensus = trace.consensus_time_us()
    print(f"run {sc.name}: seed={sc.seed} nodes={sc.n_nodes} "
          f"horizon={sc.horizon_us / 1e6:g}s")
    print(f"  consensus: "
          + (f"{consensus / 1e6:.3f}s" if consensus is not None else "not reached"))
    print(f"  final victims: {trace.counts[-1]}  "
          f"hop matches: {sum(r.matches for r in hop_rows)}/{len(hop_rows)}  "
          f"delivered: {len(result.delivered)}/{len(result.injected)} injected")
    print(f"  outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _realization_stats(sc: Scenario, trace: metrics.VictimTrace,
                       result: RunResult, index: int, seed: int) -> dict:
    tail_lo = int(sc.horizon_us * _TAIL_FRACTION)
    consensus = trace.consensus_time_us()
    clean10 = trace.first_clean_us(10_000_000)
    hop_rows, _ = _run_accuracy(result, sc)
    return {
        "index": index,
        "seed": seed,
        "n_slot": sc.timing.n_slot,
        "consensus_time_s": None if consensus is None else consensus / 1e6,
        "clean_10s_from_s": None if clean10 is None else clean10 / 1e6,
        "tail_max_victims": trace.max_over(tail_lo, sc.horizon_us),
        "hop_match_fraction": (
            sum(r.matches for r in hop_rows) / len(hop_rows) if hop_rows else 1.0
        ),
        "delivered": len(result.delivered),
        "injected": len(result.injected),
    }


def _sweep_worker(task: tuple) -> int:
    sc, index, seed, group_dir = task
    group = Path(group_dir)
    result = Simulator(sc, seed, detail="light").run()
    trace = metrics.victim_trace(result)
    stats = _realization_stats(sc, trace, result, index, seed)
    _write_atomic_csv(group / f"victims-r{index:04d}.csv",
                      metrics.write_victim_trace_csv, trace)
    # stats file written last: its presence marks the realization complete
    _write_atomic_text(group / f"stats-r{index:04d}.json",
                       json.dumps(stats) + "\n")
    return index


def _quantile(values: list[float], q: float) -> float | None:
    if not values:
        return None
    ordered = sorted(values)
    idx = max(0, math.ceil(q * len(ordered)) - 1)
    return ordered[idx]


def _aggregate_group(sc: Scenario, group: Path) -> dict:
    """Recompute group aggregates from the files on disk (the union of all
    completed realizations, including ones from earlier partial sweeps)."""
    trace_paths = sorted(group.glob("victims-r*.csv"))
    traces = [metrics.read_victim_trace_csv(p, sc.horizon_us) for p in trace_paths]
    if len(traces) >= 2:
        curve = metrics.collision_curve(traces)
        _write_atomic_csv(group / "curve.csv",
                          metrics.write_collision_curve_csv, curve)
    stats = [json.loads(p.read_text()) for p in sorted(group.glob("stats-r*.json"))]
    consensus = [s["consensus_time_s"] for s in stats
                 if s["consensus_time_s"] is not None]
    summary = {
        "n_slot": sc.timing.n_slot,
        "realizations": len(stats),
        "consensus_rate": len(consensus) / len(stats) if stats else 0.0,
        "consensus_median_s": _quantile(consensus, 0.5),
        "consensus_p90_s": _quantile(consensus, 0.9),
        "tail_max_victims_median": _quantile(
            [s["tail_max_victims"] for s in stats], 0.5),
        "hop_match_fraction_mean": (
            statistics.fmean(s["hop_match_fraction"] for s in stats)
            if stats else None),
    }
    return summary


def cmd_sweep(sc: Scenario, out_dir: Path, jobs: int) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic_text(out_dir / "scenario.json",
                       json.dumps(dump_scenario(sc), indent=2) + "\n")
    groups: dict[str, dict] = {}
    for n_slot in sc.sweep_values():
        sub = sc.with_n_slot(n_slot)
        group = out_dir / f"nslot-{n_slot}"
        group.mkdir(parents=True, exist_ok=True)
        tasks = []
        for index in range(sc.realizations):
            if (group / f"stats-r{index:04d}.json").exists():
                continue  # resume: already complete
            seed = mix64(sc.seed, n_slot, index)
            tasks.append((sub, index, seed, str(group)))
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                done = sum(1 for _ in pool.map(_sweep_worker, tasks))
        else:
            done = sum(1 for task in tasks if _sweep_worker(task) >= 0)
        summary = _aggregate_group(sub, group)
        groups[str(n_slot)] = summary
        print(f"n_slot={n_slot}: {done} new + "
              f"{summary['realizations'] - done} resumed realizations; "
              f"consensus rate {summary['consensus_rate']:.2f}")
    payload = {
        "scenario": sc.name,
        "seed": sc.seed,
        "realizations": sc.realizations,
        "horizon_s": sc.horizon_us / 1e6,
        "groups": groups,
    }
    _write_atomic_text(out_dir / "summary.json",
                       json.dumps(payload, indent=2) + "\n")
    print(f"sweep complete; summary in {out_dir / 'summary.json'}")
    return 0


# ---------------------------------------------------------------------------
# report


def _curve_value(rows: list[tuple[int, float, int]], t_us: int) -> float | None:
    for t, p, _ in rows:
        if t == t_us:
            return p
    return None


def _band_checks(name: str, groups: dict, curves: dict) -> list[tuple[str, bool]]:
    """Expectation bands for the shipped presets (empty for custom scenarios)."""
    checks: list[tuple[str, bool]] = []

    def probe(n_slot: int, t_s: float) -> float | None:
        rows = curves.get(str(n_slot))
        return None if rows is None else _curve_value(rows, int(t_s * 1e6))

    if name == "fig3a-grid" and "12" in groups:
        g = groups["12"]
        checks.append((f"consensus rate {g['consensus_rate']:.2f} >= 0.90",
                       g["consensus_rate"] >= 0.90))
        med = g["consensus_median_s"]
        checks.append((f"median consensus {med if med is None else f'{med:.1f}'}s <= 60s",
                       med is not None and med <= 60.0))
    elif name == "fig3b-random" and "16" in groups:
        med = groups["16"]["tail_max_victims_median"]
        checks.append((f"median residual victims {med} <= 1",
                       med is not None and med <= 1))
    elif name == "fig5a-sweep":
        p1, p30 = probe(20, 1.0), probe(20, 30.0)
        if p1 is not None:
            checks.append((f"P(collision) at 1s = {p1:.3f} >= 0.80", p1 >= 0.80))
        if p30 is not None:
            checks.append((f"P(collision) at 30s = {p30:.3f} <= 0.25", p30 <= 0.25))
    elif name == "fig5b-sweep":
        p0, p20, p40 = probe(20, 0.0), probe(20, 20.0), probe(19, 40.0)
        if p0 is not None:
            checks.append((f"initial P(collision) = {p0:.3f} in [0.60, 0.85]",
                           0.60 <= p0 <= 0.85))
        if p20 is not None:
            checks.append((f"P(collision) at 20s (20 slots) = {p20:.3f} <= 0.25",
                           p20 <= 0.25))
        if p40 is not None:
            checks.append((f"P(collision) at 40s (19 slots) = {p40:.3f} <= 0.25",
                           p40 <= 0.25))
    return checks


def _report_sweep(out_dir: Path) -> int:
    summary = json.loads((out_dir / "summary.json").read_text())
    print(f"sweep of {summary['scenario']} (seed {summary['seed']}, "
          f"{summary['realizations']} realizations, "
          f"horizon {summary['horizon_s']:g}s)")
    curves: dict[str, list] = {}
    for n_slot, g in sorted(summary["groups"].items(), key=lambda kv: int(kv[0])):
        med = g["consensus_median_s"]
        med_str = "n/a" if med is None else f"{med:.1f}s"
        print(f"  n_slot={n_slot}: consensus rate {g['consensus_rate']:.2f}, "
              f"median {med_str}, residual victims (median of window max) "
              f"{g['tail_max_victims_median']}, "
              f"hop accuracy {g['hop_match_fraction_mean']:.3f}")
        curve_path = out_dir / f"nslot-{n_slot}" / "curve.csv"
        if curve_path.exists():
            curves[n_slot] = metrics.read_collision_curve_csv(curve_path)
    checks = _band_checks(summary["scenario"], summary["groups"], curves)
    for label, ok in checks:
        print(f"  [{'PASS' if ok else 'FAIL'}] {label}")
    return 0


def _report_run(out_dir: Path, victim_paths: list[Path]) -> int:
    sc_path = out_dir / "scenario.json"
    horizon_us = None
    if sc_path.exists():
        doc = json.loads(sc_path.read_text())
        print(f"single run of {doc.get('name', '?')}")
        horizon_us = round(float(doc["horizon_s"]) * 1e6)
    for path in victim_paths:
        if horizon_us is None:
            rows = path.read_text().splitlines()[1:]
            last_t = round(float(rows[-1].split(",")[0]) * 1e6) if rows else 0
            horizon_us = last_t + 1
        trace = metrics.read_victim_trace_csv(path, horizon_us)
        consensus = trace.consensus_time_us()
        print(f"  {path.name}: consensus "
              + (f"{consensus / 1e6:.3f}s" if consensus is not None else "not reached")
              + f", final victims {trace.counts[-1]}")
    return 0


def cmd_report(out_dir: Path) -> int:
    if (out_dir / "summary.json").exists():
        return _report_sweep(out_dir)
    victim_paths = sorted(out_dir.glob("victims-seed*.csv"))
    if victim_paths:
        return _report_run(out_dir, victim_paths)
    print(f"no runs found in {out_dir}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# preset-dump


def cmd_preset_dump(name: str, out_file: str | None) -> int:
    doc = json.dumps(dump_scenario(preset(name)), indent=2) + "\n"
    if out_file in (None, "-"):
        sys.stdout.write(doc)
    else:
        path = Path(out_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_atomic_text(path, doc)
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotmesh",
        description="Simulate a slot-synchronized self-healing mesh and "
                    "evaluate its collision, consensus, and routing behaviour.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="named built-in scenario")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", default=_default_out(),
                       help=f"output directory (default ./out or ${OUT_ENV_VAR})")

    p_run = sub.add_parser("run", help="run one realization")
    add_scenario_args(p_run)
    p_run.add_argument("--detail", choices=("light", "full"), default="full",
                       help="event-log verbosity (default full)")

    p_sweep = sub.add_parser("sweep", help="run a seeded Monte Carlo sweep")
    add_scenario_args(p_sweep)
    p_sweep.add_argument("--realizations", type=int,
                         help="override the scenario's realization count")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes (default 1)")

    p_report = sub.add_parser("report", help="summarize a run/sweep directory")
    p_report.add_argument("--out", default=_default_out(),
                          help="directory to read")

    p_dump = sub.add_parser("preset-dump", help="write a preset scenario JSON")
    p_dump.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p_dump.add_argument("--out", help="output file (default stdout)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_load_from_args(args), Path(args.out), args.detail)
        if args.command == "sweep":
            return cmd_sweep(_load_from_args(args), Path(args.out), args.jobs)
        if args.command == "report":
            return cmd_report(Path(args.out))
        if args.command == "preset-dump":
            return cmd_preset_dump(args.preset, args.out)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"scenario error: {problem}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
