"""Measurement layer: victim counting, collision curves, oracles, CSV formats."""

from __future__ import annotations

import csv
import heapq
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slotmesh.channel import ChannelParams, ExplicitPlacement, LinkTable, \
    UniformRandomPlacement, place_nodes
from slotmesh.engine import Simulator
from slotmesh.metrics import (
    CollisionCurve,
    VictimTrace,
    bfs_hops,
    collision_curve,
    compute_victim_trace,
    conflict_count,
    god_view_adjacency,
    hop_accuracy,
    jaccard,
    neighbor_accuracy,
    read_collision_curve_csv,
    read_hop_traces_csv,
    read_victim_trace_csv,
    victim_trace,
    write_accuracy_csv,
    write_collision_curve_csv,
    write_hop_traces_csv,
    write_victim_trace_csv,
)
from slotmesh.protocol import TimingConfig
from slotmesh.scenarios import Scenario, ScenarioEvent

CLEAN = ChannelParams(shadow_sigma_db=0.0, imbalance_sigma_db=0.0)


def clean_table(coords, seed=1, params=CLEAN):
    return LinkTable(list(coords), params, np.random.default_rng(seed))


# ------------------------------------------------------------------ VictimTrace


TRACE = VictimTrace((0, 10, 30), (0, 2, 1), horizon_us=50)


def test_trace_validation():
    with pytest.raises(ValueError):
        VictimTrace((5, 10), (0, 1), 50)          # must start at 0
    with pytest.raises(ValueError):
        VictimTrace((0, 10, 10), (0, 1, 2), 50)   # strictly increasing
    with pytest.raises(ValueError):
        VictimTrace((0, 10), (1, 1), 50)          # adjacent values differ
    with pytest.raises(ValueError):
        VictimTrace((0, 50), (0, 1), 50)          # breakpoints before horizon
    with pytest.raises(ValueError):
        VictimTrace((0, 10), (0,), 50)            # length mismatch
    with pytest.raises(ValueError):
        VictimTrace((0, 10), (0, -1), 50)         # nonnegative
    VictimTrace((0,), (0,), 1)                    # minimal trace is fine


def test_trace_value_lookup():
    assert [TRACE.value_at(t) for t in (0, 9, 10, 29, 30, 49)] == [0, 0, 2, 2, 1, 1]
    assert TRACE.sample(10) == [(0, 0), (10, 2), (20, 2), (30, 1), (40, 1)]


def test_trace_victim_intervals_merge_adjacent_runs():
    assert TRACE.victim_intervals_us() == [(10, 50)]
    gappy = VictimTrace((0, 10, 20, 30, 40), (0, 1, 0, 3, 0), 60)
    assert gappy.victim_intervals_us() == [(10, 20), (30, 40)]
    assert VictimTrace((0,), (0,), 60).victim_intervals_us() == []


def test_trace_window_maximum():
    assert TRACE.max_over(0, 10) == 0
    assert TRACE.max_over(9, 10) == 0
    assert TRACE.max_over(5, 15) == 2
    assert TRACE.max_over(30, 50) == 1
    assert TRACE.max_over(0, 50) == 2
    with pytest.raises(ValueError):
        TRACE.max_over(10, 10)


def test_consensus_time():
    assert VictimTrace((0,), (0,), 50).consensus_time_us() == 0
    assert TRACE.consensus_time_us() is None
    assert VictimTrace((0, 10, 30), (0, 2, 0), 50).consensus_time_us() == 30


def test_first_clean_window():
    trace = VictimTrace((0, 10, 30), (0, 2, 0), 50)
    assert trace.first_clean_us(10) == 0
    assert trace.first_clean_us(11) == 30
    assert trace.first_clean_us(20) == 30
    assert trace.first_clean_us(21) is None
    with pytest.raises(ValueError):
        trace.first_clean_us(0)


# -------------------------------------------------------------- conflict count


def test_conflict_count_rules():
    link = clean_table([(0, 0), (5, 0), (0, 5), (10_000, 0)])
    acc = link.accessible
    assert acc[:3, :3].sum() == 6 and not acc[3].any() and not acc[:, 3].any()
    txs = [(1, 10, 20, False, 0, 0), (2, 15, 25, False, 0, 0)]
    assert conflict_count(3, 14, link, txs) == 1
    assert conflict_count(3, 15, link, txs) == 2
    assert conflict_count(3, 19, link, txs) == 2
    assert conflict_count(3, 20, link, txs) == 1   # end instant exclusive
    assert conflict_count(3, 25, link, txs) == 0
    assert conflict_count(1, 17, link, txs) == 1   # own transmission ignored
    assert conflict_count(4, 17, link, txs) == 0   # out of range hears nothing


def test_touching_frames_are_never_a_conflict():
    link = clean_table([(0, 0), (5, 0), (0, 5)])
    txs = [(1, 10, 20), (2, 20, 30)]
    trace = compute_victim_trace(txs, [(0, n, True) for n in (1, 2, 3)],
                                 link, [1, 2, 3], 100)
    assert trace == VictimTrace((0,), (0,), 100)


def test_victim_interval_open_at_horizon():
    link = clean_table([(0, 0), (5, 0), (0, 5)])
    txs = [(1, 10, 500), (2, 10, 500)]
    trace = compute_victim_trace(txs, [(0, n, True) for n in (1, 2, 3)],
                                 link, [1, 2, 3], 100)
    assert trace == VictimTrace((0, 10), (0, 1), 100)
    assert trace.consensus_time_us() is None


def test_empty_records_give_zero_trace():
    link = clean_table([(0, 0), (5, 0)])
    trace = compute_victim_trace([], [], link, [1, 2], 1_000)
    assert trace == VictimTrace((0,), (0,), 1_000)


# ------------------------------------------------ trace vs brute force sampling


def collision_scenario():
    timing = TimingConfig(t_proc_us=10_000, t_slot_us=10_000, t_beacon_us=5_000,
                          n_slot=4, p_grant=1.0)
    return Scenario(
        name="metrics-oracle",
        timing=timing,
        channel=CLEAN,
        reference_placement=ExplicitPlacement(((0.0, 0.0),)),
        sensing_placement=ExplicitPlacement(((5.0, 0.0), (0.0, 5.0))),
        horizon_us=160_000,
        wake_overrides={1: 0, 2: 0, 3: 0},
        initial_slot_overrides={1: 4, 2: 2, 3: 2},
        events=(ScenarioEvent(122_000, "node_off", 1),),
    )


def test_victim_trace_oracle_run():
    # Two sensing nodes share a slot and only the reference hears both, so it
    # is the lone victim for the 5 ms of every window where they both
    # transmit -- until it powers off mid-frame in window three.
    res = Simulator(collision_scenario(), seed=1).run()
    trace = victim_trace(res)
    assert trace == VictimTrace(
        (0, 20_000, 25_000, 70_000, 75_000, 120_000, 122_000),
        (0, 1, 0, 1, 0, 1, 0),
        160_000,
    )
    assert trace.consensus_time_us() == 122_000
    assert trace.first_clean_us(45_000) == 25_000


def test_victim_trace_matches_pointwise_recomputation():
    res = Simulator(collision_scenario(), seed=1).run()
    trace = victim_trace(res)

    def online_at(node, t):
        state = False
        for et, en, flag in res.on_off:
            if en == node and et <= t:
                state = flag
        return state

    for t, value in trace.sample(250):
        brute = sum(
            1
            for node in res.node_ids
            if online_at(node, t)
            and conflict_count(node, t, res.link, res.tx_records) >= 2
        )
        assert value == brute, f"divergence at t={t}"


# -------------------------------------------------------------- collision curve


def make_curve():
    a = VictimTrace((0, 100_000, 200_000), (0, 1, 0), 1_000_000)
    b = VictimTrace((0,), (0,), 1_000_000)
    return a, b


def test_collision_curve_windowing():
    a, b = make_curve()
    curve = collision_curve([a, b], window_us=200_000, step_us=100_000)
    assert curve.times_us == tuple(range(0, 1_000_001, 100_000))
    assert curve.probability == (0.0, 0.5, 0.5) + (0.0,) * 8
    assert curve.n_realizations == 2
    assert curve.value_at(100_000) == 0.5
    assert curve.value_at(300_000) == 0.0
    with pytest.raises(KeyError):
        curve.value_at(150_000)


def test_collision_curve_order_invariant():
    a, b = make_curve()
    fwd = collision_curve([a, b], 200_000, 100_000)
    rev = collision_curve([b, a], 200_000, 100_000)
    assert fwd == rev


def test_collision_curve_degenerate_inputs():
    a, b = make_curve()
    always = VictimTrace((0, 1), (0, 1), 1_000_000)
    curve = collision_curve([always, always], 200_000, 500_000)
    assert curve.probability == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        collision_curve([a], 200_000, 100_000)
    with pytest.raises(ValueError):
        collision_curve([a, VictimTrace((0,), (0,), 5)], 200_000, 100_000)
    with pytest.raises(ValueError):
        collision_curve([a, b], 0, 100_000)
    with pytest.raises(ValueError):
        collision_curve([a, b], 200_000, -1)


# ------------------------------------------------------------------ hop oracle


def test_bfs_hops_path_and_isolated():
    adjacency = {1: {2}, 2: {1, 3}, 3: {2}, 4: set()}
    assert bfs_hops(adjacency, [1]) == {1: 0, 2: 1, 3: 2, 4: math.inf}
    assert bfs_hops(adjacency, [1, 3]) == {1: 0, 2: 1, 3: 0, 4: math.inf}
    with pytest.raises(ValueError):
        bfs_hops(adjacency, [99])


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(2, 9),
    edges=st.sets(st.tuples(st.integers(1, 9), st.integers(1, 9)), max_size=20),
    data=st.data(),
)
def test_bfs_hops_agrees_with_unit_dijkstra(n, edges, data):
    adjacency = {v: set() for v in range(1, n + 1)}
    for a, b in edges:
        if a != b and a <= n and b <= n:
            adjacency[a].add(b)
            adjacency[b].add(a)
    sources = data.draw(st.sets(st.integers(1, n), min_size=1))

    dist = {v: math.inf for v in adjacency}
    heap = [(0, s) for s in sources]
    for _, s in heap:
        dist[s] = 0
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in adjacency[u]:
            if d + 1 < dist[v]:
                dist[v] = d + 1
                heapq.heappush(heap, (d + 1, v))

    assert bfs_hops(adjacency, sources) == dist


def test_god_view_adjacency_is_symmetric_and_restricted():
    placement = UniformRandomPlacement(125.0, 100.0, 12)
    rng = np.random.default_rng(42)
    coords = place_nodes(placement, rng)
    link = LinkTable(coords, ChannelParams(), np.random.default_rng(7))
    nodes = list(range(1, 13))
    adj = god_view_adjacency(link, nodes)
    both = link.accessible & link.accessible.T
    for a in nodes:
        assert a not in adj[a]
        for b in nodes:
            if a != b:
                assert (b in adj[a]) == bool(both[a - 1, b - 1])
                assert (b in adj[a]) == (a in adj[b])
    sub = god_view_adjacency(link, [1, 2, 3])
    assert set(sub) == {1, 2, 3}
    assert all(neigh <= {1, 2, 3} for neigh in sub.values())


def test_hop_accuracy_rows():
    adjacency = {1: {2}, 2: {1, 3}, 3: {2}, 4: set()}
    rows = hop_accuracy({1: 0, 2: 1, 3: 5, 4: 30}, adjacency, [1], h_na=30)
    got = [(r.node, r.claimed, r.bfs, r.matches) for r in rows]
    assert got == [
        (1, 0, 0, True),
        (2, 1, 1, True),
        (3, 5, 2, False),
        (4, 30, math.inf, True),   # no-route marker matches unreachable
    ]


# ------------------------------------------------------------ neighbor accuracy


def test_jaccard_examples():
    assert jaccard({1, 2, 3}, {1, 2, 3, 4}) == 0.75
    assert jaccard({1}, {2}) == 0.0
    assert jaccard(set(), set()) == 1.0
    assert jaccard({1, 2}, {1, 2}) == 1.0


def test_neighbor_accuracy_ignores_offline_truth():
    link = clean_table([(0, 0), (5, 0), (0, 5)])
    assert link.accessible.sum() == 6  # full clique ground truth
    finals = {
        1: {"online": True,
            "heard": {2: {"bidirectional": True}}},
        2: {"online": True,
            "heard": {1: {"bidirectional": False}}},
        3: {"online": False},
    }
    rows = neighbor_accuracy(finals, link)
    assert [(r.node, r.heard_jaccard, r.bidirectional_jaccard) for r in rows] == [
        (1, 1.0, 1.0),   # node 3 is offline, so {2} is the whole truth
        (2, 1.0, 0.0),   # heard the right node but never proved two-way
    ]


def test_neighbor_accuracy_counts_missing_and_online():
    link = clean_table([(0, 0), (5, 0), (0, 5)])
    finals = {
        1: {"online": True, "heard": {}},
        2: {"online": True,
            "heard": {1: {"bidirectional": True}, 3: {"bidirectional": True}}},
        3: {"online": True,
            "heard": {1: {"bidirectional": True}, 2: {"bidirectional": True}}},
    }
    rows = {r.node: r for r in neighbor_accuracy(finals, link)}
    assert rows[1].heard_jaccard == 0.0
    assert rows[2].heard_jaccard == 1.0 and rows[2].bidirectional_jaccard == 1.0


# -------------------------------------------------------------------- CSV layer


def test_victim_trace_csv_round_trip(tmp_path):
    path = tmp_path / "victims.csv"
    write_victim_trace_csv(path, TRACE)
    assert read_victim_trace_csv(path, TRACE.horizon_us) == TRACE
    header = path.read_text().splitlines()[0]
    assert header == "t_s,victims"


def test_victim_trace_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,count\n0.0,0\n")
    with pytest.raises(ValueError):
        read_victim_trace_csv(path, 100)


def test_collision_curve_csv_round_trip(tmp_path):
    a, b = make_curve()
    curve = collision_curve([a, b, a], window_us=300_000, step_us=250_000)
    path = tmp_path / "curve.csv"
    write_collision_curve_csv(path, curve)
    rows = read_collision_curve_csv(path)
    assert rows == [
        (t, p, curve.n_realizations)
        for t, p in zip(curve.times_us, curve.probability)
    ]
    with pytest.raises(ValueError):
        path2 = tmp_path / "bad.csv"
        path2.write_text("t_s,prob\n")
        read_collision_curve_csv(path2)


def test_hop_traces_csv_round_trip(tmp_path):
    events = [(0, 1, 0), (0, 2, 30), (65_000, 2, 1), (1_234_567, 3, 4)]
    path = tmp_path / "hops.csv"
    write_hop_traces_csv(path, events)
    assert read_hop_traces_csv(path) == events
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.csv"
        bad.write_text("t_s,node\n")
        read_hop_traces_csv(bad)


def test_accuracy_csv_contents(tmp_path):
    adjacency = {1: {2}, 2: {1}, 3: set()}
    hop_rows = hop_accuracy({1: 0, 2: 1, 3: 30}, adjacency, [1], h_na=30)
    link = clean_table([(0, 0), (5, 0), (0, 5)])
    finals = {
        1: {"online": True, "heard": {2: {"bidirectional": True},
                                      3: {"bidirectional": False}}},
        2: {"online": True, "heard": {1: {"bidirectional": True},
                                      3: {"bidirectional": True}}},
        3: {"online": False},
    }
    neighbor_rows = neighbor_accuracy(finals, link)
    path = tmp_path / "accuracy.csv"
    write_accuracy_csv(path, hop_rows, neighbor_rows)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["node"] for r in rows] == ["1", "2", "3"]
    assert rows[0]["bfs_hop"] == "0" and rows[0]["hop_match"] == "1"
    assert rows[2]["bfs_hop"] == "inf" and rows[2]["hop_match"] == "1"
    assert rows[2]["heard_jaccard"] == ""   # offline: no accuracy row
    # Node 1 still lists the powered-off node 3: half its claimed set is stale.
    assert float(rows[0]["heard_jaccard"]) == pytest.approx(0.5)


def test_curve_probability_survives_text_round_trip(tmp_path):
    traces = [VictimTrace((0, 1, 2), (0, 1, 0), 10_000)] * 2 + \
        [VictimTrace((0,), (0,), 10_000)]
    curve = collision_curve(traces, window_us=6, step_us=5_000)
    path = tmp_path / "c.csv"
    write_collision_curve_csv(path, curve)
    rows = read_collision_curve_csv(path)
    assert rows[0][1] == curve.probability[0] == 2 / 3
