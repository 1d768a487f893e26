"""Evaluation metrics computed from run results and the ground-truth link table.

Everything here is a pure function over immutable inputs: transmission
records, on/off events, and the god-view :class:`~slotmesh.channel.LinkTable`.
Nothing in this module feeds back into protocol behaviour.

Core quantities
---------------
* ``conflict_count`` -- how many senders accessible to a node are on the air
  at one instant.  A node is a *victim* at that instant when the count
  exceeds one: every overlapping reception at it is destroyed.
* ``victim_trace`` -- exact piecewise-constant count of victim nodes over
  time, with breakpoints only at transmission starts/ends and node on/off
  instants (no sampling error).
* ``collision_curve`` -- across realizations, the probability of at least
  one victim instant inside a sliding window ``[t - T/2, t + T/2)``.
* ``consensus_time_us`` / ``first_clean_us`` -- when the victim trace
  becomes and stays zero (to the horizon, or for a fixed-length window).
* ``bfs_hops`` / ``hop_accuracy`` -- breadth-first shortest-path oracle over
  the ground-truth bidirectional graph, kept fully independent of the
  protocol's own hop bookkeeping, plus per-node claimed-vs-oracle pairs.
* ``neighbor_accuracy`` -- Jaccard similarity of discovered neighbour sets
  against the ground-truth heard/bidirectional sets.

CSV schemas (column names and units are fixed)
----------------------------------------------
* victim trace:     ``t_s,victims`` -- breakpoint time in seconds, victim
  count holding from that time until the next row (or the horizon).
* collision curve:  ``t_s,probability,n_realizations`` -- window-center time
  in seconds, estimated probability, number of realizations averaged.
* hop traces:       ``t_s,node,hop`` -- one row per hop change, including
  the value at boot.
* accuracy table:   ``node,claimed_hop,bfs_hop,hop_match,heard_jaccard,``
  ``bidirectional_jaccard`` -- ``bfs_hop`` is ``inf`` for unreachable nodes,
  ``hop_match`` is ``1``/``0``.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .channel import LinkTable

__all__ = [
    "VictimTrace",
    "CollisionCurve",
    "HopComparison",
    "NeighborAccuracy",
    "conflict_count",
    "victim_trace",
    "compute_victim_trace",
    "collision_curve",
    "bfs_hops",
    "god_view_adjacency",
    "hop_accuracy",
    "neighbor_accuracy",
    "jaccard",
    "write_victim_trace_csv",
    "read_victim_trace_csv",
    "write_collision_curve_csv",
    "read_collision_curve_csv",
    "write_hop_traces_csv",
    "read_hop_traces_csv",
    "write_accuracy_csv",
]

Interval = tuple[int, int]


# ---------------------------------------------------------------------------
# Victim trace


@dataclass(frozen=True)
class VictimTrace:
    """Piecewise-constant victim count on ``[0, horizon_us)``.

    ``counts[i]`` holds on ``[times_us[i], times_us[i + 1])``; the last value
    holds to the horizon.  Breakpoints are strictly increasing, start at 0,
    and adjacent values always differ.
    """

    times_us: tuple[int, ...]
    counts: tuple[int, ...]
    horizon_us: int

    def __post_init__(self) -> None:
        if len(self.times_us) != len(self.counts):
            raise ValueError("times_us and counts must have equal length")
        if not self.times_us or self.times_us[0] != 0:
            raise ValueError("trace must start with a breakpoint at t=0")
        if self.horizon_us <= 0:
            raise ValueError("horizon_us must be positive")
        for i in range(1, len(self.times_us)):
            if self.times_us[i] <= self.times_us[i - 1]:
                raise ValueError("breakpoints must be strictly increasing")
            if self.counts[i] == self.counts[i - 1]:
                raise ValueError("adjacent values must differ")
        if self.times_us[-1] >= self.horizon_us:
            raise ValueError("breakpoints must lie before the horizon")
        if any(c < 0 for c in self.counts):
            raise ValueError("victim counts must be nonnegative")

    def value_at(self, t_us: int) -> int:
        """Victim count at instant ``t_us`` (clamped into the domain)."""
        idx = bisect_right(self.times_us, t_us) - 1
        return self.counts[max(idx, 0)]

    def sample(self, step_us: int) -> list[tuple[int, int]]:
        """Values on the regular grid ``0, step, 2*step, ... < horizon``."""
        return [(t, self.value_at(t)) for t in range(0, self.horizon_us, step_us)]

    def victim_intervals_us(self) -> list[Interval]:
        """Maximal intervals with at least one victim, sorted and disjoint."""
        out: list[Interval] = []
        for i, count in enumerate(self.counts):
            if count == 0:
                continue
            start = self.times_us[i]
            end = self.times_us[i + 1] if i + 1 < len(self.times_us) else self.horizon_us
            if out and out[-1][1] == start:
                out[-1] = (out[-1][0], end)
            else:
                out.append((start, end))
        return out

    def max_over(self, lo_us: int, hi_us: int) -> int:
        """Maximum victim count over ``[lo_us, hi_us)``."""
        if hi_us <= lo_us:
            raise ValueError("window must be nonempty")
        first = max(bisect_right(self.times_us, lo_us) - 1, 0)
        last = max(bisect_left(self.times_us, hi_us) - 1, first)
        return max(self.counts[first:last + 1])

    def consensus_time_us(self) -> int | None:
        """Earliest instant from which the trace stays 0 to the horizon.

        Returns 0 for an identically-zero trace and ``None`` when victims
        persist through the end of the run.
        """
        if self.counts[-1] != 0:
            return None
        # Adjacent values differ, so the final zero run starts at the last
        # breakpoint (or at 0 when the trace never leaves zero).
        return self.times_us[-1]

    def first_clean_us(self, window_us: int) -> int | None:
        """Earliest start of a zero run at least ``window_us`` long.

        The run must be fully observed: a trailing zero run is measured only
        up to the horizon.
        """
        if window_us <= 0:
            raise ValueError("window_us must be positive")
        for i, count in enumerate(self.counts):
            if count != 0:
                continue
            start = self.times_us[i]
            end = self.times_us[i + 1] if i + 1 < len(self.times_us) else self.horizon_us
            if end - start >= window_us:
                return start
        return None


def _transmitting_at(t_us: int, tx_records: Iterable[Sequence[int]]) -> set[int]:
    return {rec[0] for rec in tx_records if rec[1] <= t_us < rec[2]}


def conflict_count(
    receiver: int,
    t_us: int,
    link: LinkTable,
    tx_records: Iterable[Sequence[int]],
) -> int:
    """Number of senders accessible to ``receiver`` transmitting at ``t_us``.

    ``tx_records`` rows start with ``(node, start_us, end_us, ...)``; a
    node transmits at ``t`` when ``start <= t < end``.  The receiver's own
    transmissions never count.  The receiver is a victim at ``t`` exactly
    when the returned count exceeds 1.
    """
    return sum(
        1
        for sender in _transmitting_at(t_us, tx_records)
        if sender != receiver and link.accessible[sender - 1, receiver - 1]
    )


def _on_intervals(
    on_off: Iterable[tuple[int, int, bool]], node: int, horizon_us: int
) -> list[Interval]:
    out: list[Interval] = []
    start: int | None = None
    for t, flag in sorted((t, flag) for t, n, flag in on_off if n == node):
        if flag and start is None:
            start = t
        elif not flag and start is not None:
            if min(t, horizon_us) > start:
                out.append((start, min(t, horizon_us)))
            start = None
    if start is not None and start < horizon_us:
        out.append((start, horizon_us))
    return out


def _intersect(a: list[Interval], b: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _overlap_intervals(events: list[tuple[int, int]]) -> list[Interval]:
    """Intervals where at least two of the given (start,+1)/(end,-1) spans overlap."""
    events.sort()
    out: list[Interval] = []
    active = 0
    start = 0
    for t, delta in events:
        before = active
        active += delta
        if before < 2 <= active:
            start = t
        elif before >= 2 > active and t > start:
            out.append((start, t))
    return out


def compute_victim_trace(
    tx_records: Iterable[Sequence],
    on_off: Iterable[tuple[int, int, bool]],
    link: LinkTable,
    node_ids: Iterable[int],
    horizon_us: int,
) -> VictimTrace:
    """Exact victim-count trace from transmission and on/off records.

    A node is a victim while more than one sender accessible to it (per
    the ground-truth link table) is on the air and the node itself is
    powered on.  The result changes value only at transmission start/end
    and node on/off instants.
    """
    spans = [(rec[0], max(rec[1], 0), min(rec[2], horizon_us)) for rec in tx_records]
    spans = [s for s in spans if s[1] < s[2]]
    on_off = list(on_off)
    deltas: dict[int, int] = {}
    for rx in node_ids:
        events = [
            (t, d)
            for sender, s, e in spans
            if sender != rx and link.accessible[sender - 1, rx - 1]
            for t, d in ((s, 1), (e, -1))
        ]
        victim = _intersect(_overlap_intervals(events), _on_intervals(on_off, rx, horizon_us))
        for s, e in victim:
            deltas[s] = deltas.get(s, 0) + 1
            deltas[e] = deltas.get(e, 0) - 1

    times = [0]
    counts = [0]
    running = 0
    for t in sorted(deltas):
        if t >= horizon_us:
            break
        running += deltas[t]
        if running == counts[-1]:
            continue
        if t == times[-1]:
            counts[-1] = running
        else:
            times.append(t)
            counts.append(running)
    return VictimTrace(tuple(times), tuple(counts), horizon_us)


def victim_trace(result) -> VictimTrace:
    """Victim trace of one realization (see :func:`compute_victim_trace`)."""
    return compute_victim_trace(
        result.tx_records,
        result.on_off,
        result.link,
        result.node_ids,
        result.scenario.horizon_us,
    )


# ---------------------------------------------------------------------------
# Collision-probability curve


@dataclass(frozen=True)
class CollisionCurve:
    """Windowed collision probability across realizations.

    ``probability[i]`` is the fraction of realizations with at least one
    victim instant inside ``[times_us[i] - window_us/2,
    times_us[i] + window_us/2)``.
    """

    times_us: tuple[int, ...]
    probability: tuple[float, ...]
    n_realizations: int
    window_us: int
    step_us: int

    def value_at(self, t_us: int) -> float:
        idx = bisect_left(self.times_us, t_us)
        if idx == len(self.times_us) or self.times_us[idx] != t_us:
            raise KeyError(f"no window centred at {t_us} us")
        return self.probability[idx]


def collision_curve(
    traces: Sequence[VictimTrace],
    window_us: int = 500_000,
    step_us: int = 250_000,
) -> CollisionCurve:
    """Estimate the collision probability on a regular grid of window centers.

    Requires at least two realizations.  The estimate is an average of
    per-realization indicators, so it does not depend on the order of
    ``traces``.
    """
    if len(traces) < 2:
        raise ValueError("collision_curve needs at least two realizations")
    horizon = traces[0].horizon_us
    if any(t.horizon_us != horizon for t in traces):
        raise ValueError("all traces must share one horizon")
    if window_us <= 0 or step_us <= 0:
        raise ValueError("window_us and step_us must be positive")

    per_trace = []
    for trace in traces:
        iv = trace.victim_intervals_us()
        per_trace.append(([a for a, _ in iv], [b for _, b in iv]))

    centers = range(0, horizon + 1, step_us)
    probability = []
    for t in centers:
        lo = t - window_us // 2
        hi = t + window_us // 2
        hits = 0
        for starts, ends in per_trace:
            idx = bisect_left(starts, hi)
            if idx and ends[idx - 1] > lo:
                hits += 1
        probability.append(hits / len(traces))
    return CollisionCurve(
        tuple(centers), tuple(probability), len(traces), window_us, step_us
    )


# ---------------------------------------------------------------------------
# Hop oracle and accuracy


def bfs_hops(
    adjacency: Mapping[int, Iterable[int]], sources: Iterable[int]
) -> dict[int, float]:
    """Breadth-first hop distance from the nearest source over ``adjacency``.

    Returns ``math.inf`` for unreachable nodes.  This is the measurement
    oracle: it never consults protocol state.
    """
    dist: dict[int, float] = {node: math.inf for node in adjacency}
    queue: deque[int] = deque()
    for s in sources:
        if s not in dist:
            raise ValueError(f"source {s} missing from adjacency")
        if dist[s] != 0:
            dist[s] = 0
            queue.append(s)
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] == math.inf:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def god_view_adjacency(link: LinkTable, nodes: Iterable[int]) -> dict[int, set[int]]:
    """Bidirectional ground-truth adjacency restricted to ``nodes``."""
    members = sorted(set(nodes))
    both = link.bidirectional_matrix()
    return {
        a: {b for b in members if b != a and both[a - 1, b - 1]}
        for a in members
    }


@dataclass(frozen=True)
class HopComparison:
    node: int
    claimed: int
    bfs: float
    matches: bool


def hop_accuracy(
    claimed_hops: Mapping[int, int],
    adjacency: Mapping[int, Iterable[int]],
    reference_ids: Iterable[int],
    h_na: int,
) -> list[HopComparison]:
    """Per-node (claimed hop, oracle hop) pairs.

    A claim matches when it equals the breadth-first distance, or when the
    node is unreachable from every reference and claims the not-available
    marker ``h_na``.
    """
    dist = bfs_hops(adjacency, reference_ids)
    rows = []
    for node in sorted(claimed_hops):
        claimed = claimed_hops[node]
        oracle = dist.get(node, math.inf)
        matches = claimed == oracle or (claimed == h_na and math.isinf(oracle))
        rows.append(HopComparison(node, claimed, oracle, matches))
    return rows


# ---------------------------------------------------------------------------
# Neighbor-discovery accuracy


def jaccard(a: set, b: set) -> float:
    """Jaccard similarity; two empty sets count as a perfect match (1.0)."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class NeighborAccuracy:
    node: int
    heard_jaccard: float
    bidirectional_jaccard: float


def neighbor_accuracy(
    finals: Mapping[int, Mapping],
    link: LinkTable,
    nodes: Iterable[int] | None = None,
) -> list[NeighborAccuracy]:
    """Discovered-vs-true neighbour-set similarity for each online node.

    ``finals`` is the per-node end-of-run state (``RunResult.finals``).
    True sets come from the ground-truth link table, restricted to nodes
    that are online, since a powered-off node can be neither heard nor a
    partner.
    """
    universe = sorted(finals) if nodes is None else sorted(set(nodes))
    online = {n for n in universe if finals[n].get("online")}
    rows = []
    for node in sorted(online):
        heard = finals[node]["heard"]
        discovered_heard = set(heard)
        discovered_bidir = {n for n, entry in heard.items() if entry["bidirectional"]}
        true_heard = link.heard_set(node) & online
        true_bidir = link.bidirectional_set(node) & online
        rows.append(
            NeighborAccuracy(
                node,
                jaccard(discovered_heard, true_heard),
                jaccard(discovered_bidir, true_bidir),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV interfaces


def _seconds(t_us: int) -> str:
    return f"{t_us / 1e6:.6f}"


def _parse_us(t_s: str) -> int:
    return round(float(t_s) * 1e6)


def write_victim_trace_csv(path, trace: VictimTrace) -> None:
    """Columns: ``t_s`` (breakpoint, seconds), ``victims`` (count)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "victims"])
        for t, count in zip(trace.times_us, trace.counts):
            writer.writerow([_seconds(t), count])


def read_victim_trace_csv(path, horizon_us: int) -> VictimTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "victims"]:
            raise ValueError(f"{path}: expected header t_s,victims, got {header}")
        rows = [(_parse_us(t), int(v)) for t, v in reader]
    return VictimTrace(
        tuple(t for t, _ in rows), tuple(v for _, v in rows), horizon_us
    )


def write_collision_curve_csv(path, curve: CollisionCurve) -> None:
    """Columns: ``t_s`` (window center, seconds), ``probability``,
    ``n_realizations``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "probability", "n_realizations"])
        for t, p in zip(curve.times_us, curve.probability):
            writer.writerow([_seconds(t), repr(p), curve.n_realizations])


def read_collision_curve_csv(path) -> list[tuple[int, float, int]]:
    """Rows of (center_us, probability, n_realizations)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "probability", "n_realizations"]:
            raise ValueError(
                f"{path}: expected header t_s,probability,n_realizations, got {header}"
            )
        return [(_parse_us(t), float(p), int(n)) for t, p, n in reader]


def write_hop_traces_csv(path, hop_events: Iterable[tuple[int, int, int]]) -> None:
    """Columns: ``t_s`` (seconds), ``node``, ``hop`` -- one row per change."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "node", "hop"])
        for t, node, hop in hop_events:
            writer.writerow([_seconds(t), node, hop])


def read_hop_traces_csv(path) -> list[tuple[int, int, int]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "node", "hop"]:
            raise ValueError(f"{path}: expected header t_s,node,hop, got {header}")
        return [(_parse_us(t), int(node), int(hop)) for t, node, hop in reader]


def write_accuracy_csv(
    path,
    hop_rows: Sequence[HopComparison],
    neighbor_rows: Sequence[NeighborAccuracy],
) -> None:
    """Columns: ``node,claimed_hop,bfs_hop,hop_match,heard_jaccard,``
    ``bidirectional_jaccard``; ``bfs_hop`` is ``inf`` when unreachable."""
    neighbors = {row.node: row for row in neighbor_rows}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["node", "claimed_hop", "bfs_hop", "hop_match",
             "heard_jaccard", "bidirectional_jaccard"]
        )
        for row in hop_rows:
            acc = neighbors.get(row.node)
            bfs = "inf" if math.isinf(row.bfs) else int(row.bfs)
            writer.writerow([
                row.node, row.claimed, bfs, int(row.matches),
                "" if acc is None else repr(acc.heard_jaccard),
                "" if acc is None else repr(acc.bidirectional_jaccard),
            ])


def write_link_csv(path, link: LinkTable) -> None:
    """Ground-truth link table dump (delegates to the channel model)."""
    link.write_csv(path)
