"""Discrete-event simulation host.

Drives a population of :class:`~slotmesh.protocol.NodeMachine` instances over
one channel realization. The engine owns everything the protocol logic must
not: the clock (integer microseconds), the event queue, the air interface
(including destructive collisions), node lifecycle, and the event log.

Event ordering at equal timestamps is fixed so runs are reproducible:
transmission ends before transmission starts, then timer expirations, then
scenario events; ties after that break on node id, then insertion order. The
end-before-start rule makes back-to-back frames touch without colliding, and
lets a frame that ends exactly when its receiver's listening window closes
still count as received.

A frame is delivered to a receiver iff the link is accessible, the receiver
listened over the frame's whole airtime, and no other transmission accessible
to that receiver overlapped any part of it. Overlapping frames destroy each
other at common receivers; there is no capture.
"""

from __future__ import annotations

import random
from heapq import heappush, heappop

import numpy as np

from .channel import LinkTable, place_nodes
from .frames import Beacon, DataFrame, FrameError, decode, encode
from .protocol import (Deliver, EnterRole, LISTENING_ROLES, NodeMachine, Role,
                       SetTimer, StartTransmit, TimingConfig)
from .scenarios import Scenario

# Queue ranks; lower pops first at equal timestamps.
_RANK_TX_END = 0
_RANK_TX_START = 1
_RANK_TIMER = 2
_RANK_SCENARIO = 3

_MASK64 = (1 << 64) - 1


def mix64(*parts: int) -> int:
    """Deterministic seed derivation (splitmix64 over the given integers)."""
    acc = 0
    for part in parts:
        acc = (acc ^ (part & _MASK64)) & _MASK64
        acc = (acc + 0x9E3779B97F4A7C15) & _MASK64
        z = acc
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        acc = z ^ (z >> 31)
    return acc


class ScriptedGrantRng:
    """Randomness stream whose grant draws follow a fixed script.

    The protocol draws its transmit grant via ``rng.random() <= p_grant``;
    while the script lasts, this returns a value below any probability (grant)
    or above one (no grant). Every other method proxies to the real stream.
    """

    def __init__(self, base: random.Random, script: tuple[bool, ...]):
        self._base = base
        self._script = list(script)
        self._cursor = 0

    def random(self) -> float:
        if self._cursor < len(self._script):
            granted = self._script[self._cursor]
            self._cursor += 1
            return -1.0 if granted else 2.0
        return self._base.random()

    def choice(self, seq):
        return self._base.choice(seq)

    def randint(self, a, b):
        return self._base.randint(a, b)


class Transmission:
    """One frame on the air."""

    __slots__ = ("node", "frame", "data", "start_us", "end_us", "receivers",
                 "receiver_set", "corrupted", "aborted", "decoded")

    def __init__(self, node, frame, data, start_us, end_us, receivers):
        self.node = node
        self.frame = frame
        self.data = data
        self.start_us = start_us
        self.end_us = end_us
        self.receivers = receivers            # accessible ids, ascending
        self.receiver_set = frozenset(receivers)
        self.corrupted: set[int] = set()      # receivers that saw an overlap
        self.aborted = False
        self.decoded: Beacon | DataFrame | None = None


class _NodeHost:
    """Engine-side runtime state for one node."""

    __slots__ = ("node", "machine", "online", "epoch", "listen_since_us", "rng")

    def __init__(self, node, rng):
        self.node = node
        self.machine: NodeMachine | None = None
        self.online = False
        self.epoch = 0
        self.listen_since_us: int | None = None
        self.rng = rng


class RunResult:
    """Everything observable about one realization.

    Structured series (always present):
      tx_records   -- (node, start_us, end_us, is_data, origin, sequence)
      hop_events   -- (t_us, node, hop) including the value at each boot
      slot_events  -- (t_us, node, old_slot, new_slot, exhausted)
      on_off       -- (t_us, node, online_bool)
      delivered    -- (t_us, reference, origin, sequence, payload)
      injected     -- (t_us, node, sequence)
    ``log`` is the full line-oriented event log (detail="full" runs only).
    """

    def __init__(self, scenario, seed, link, coords, ref_ids, node_ids):
        self.scenario = scenario
        self.seed = seed
        self.link: LinkTable = link
        self.coords = coords
        self.ref_ids = ref_ids
        self.node_ids = node_ids
        self.tx_records: list[tuple[int, int, int, bool, int, int]] = []
        self.hop_events: list[tuple[int, int, int]] = []
        self.slot_events: list[tuple[int, int, int, int, bool]] = []
        self.on_off: list[tuple[int, int, bool]] = []
        self.delivered: list[tuple[int, int, int, int, bytes]] = []
        self.injected: list[tuple[int, int, int]] = []
        self.log: list[tuple[int, str, int, str]] | None = None
        self.finals: dict[int, dict] = {}

    def serialize_log(self) -> str:
        if self.log is None:
            raise ValueError("run was executed with detail='light'; no textual log kept")
        return "\n".join(f"{t} {kind} {node} {detail}".rstrip()
                         for t, kind, node, detail in self.log) + "\n"

    def final_slots(self) -> dict[int, int]:
        return {n: s["slot"] for n, s in self.finals.items() if s["online"]}

    def final_hops(self) -> dict[int, int]:
        return {n: s["hop"] for n, s in self.finals.items() if s["online"]}


class Simulator:
    """One realization of one scenario under one seed."""

    def __init__(self, scenario: Scenario, seed: int, detail: str = "light"):
        if detail not in ("light", "full"):
            raise ValueError("detail must be 'light' or 'full'")
        if scenario.n_slot_sweep:
            raise ValueError("scenario sweeps n_slot; pick one value with with_n_slot()")
        self.scenario = scenario
        self.seed = seed
        self.full_log = detail == "full"
        self.cfg: TimingConfig = scenario.timing

        deploy_rng = np.random.default_rng(mix64(seed, 3))
        ref_coords = place_nodes(scenario.reference_placement, deploy_rng)
        sen_coords = place_nodes(scenario.sensing_placement, deploy_rng)
        coords = ref_coords + sen_coords
        self.n_reference = len(ref_coords)
        self.node_ids = list(range(1, len(coords) + 1))
        self.ref_ids = list(range(1, self.n_reference + 1))

        channel_rng = np.random.default_rng(mix64(seed, 1))
        self.link = LinkTable(coords, scenario.channel, channel_rng)
        self._per_packet = scenario.channel.fading_mode == "per_packet"
        self._fading_rng = np.random.default_rng(mix64(seed, 4))
        if self._per_packet:
            # Static part of the budget; per-packet draws only replace fading.
            with np.errstate(divide="ignore", invalid="ignore"):
                base = self.link.snr - 10.0 * np.log10(self.link.h2)
            self._h2_threshold = np.power(10.0, (scenario.channel.gamma_min_db - base) / 10.0)

        acc = self.link.accessible
        self._acc_out = [()] + [tuple(int(j) + 1 for j in np.flatnonzero(acc[i]))
                                for i in range(len(coords))]

        self._wake_rng = random.Random(mix64(seed, 2))
        self._hosts: list[_NodeHost | None] = [None]
        for node in self.node_ids:
            rng: random.Random | ScriptedGrantRng = random.Random(mix64(seed, 1000 + node))
            script = scenario.grant_overrides.get(node)
            if script:
                rng = ScriptedGrantRng(rng, script)
            self._hosts.append(_NodeHost(node, rng))

        self._heap: list = []
        self._counter = 0
        self._ongoing: dict[int, Transmission] = {}
        self.now_us = 0
        self.result = RunResult(scenario, seed, self.link, coords, self.ref_ids, self.node_ids)
        if self.full_log:
            self.result.log = []

    # -- event queue ---------------------------------------------------------------

    def _push(self, t_us: int, rank: int, node: int, payload) -> None:
        self._counter += 1
        heappush(self._heap, (t_us, rank, node, self._counter, payload))

    def _log(self, kind: str, node: int, detail: str = "") -> None:
        self.result.log.append((self.now_us, kind, node, detail))

    # -- lifecycle -----------------------------------------------------------------

    def _boot(self, node: int) -> None:
        host = self._hosts[node]
        if host.online:
            if self.full_log:
                self._log("warn", node, "msg=boot-while-online")
            return
        sc = self.scenario
        slot = sc.initial_slot_overrides.get(node)
        if slot is None:
            slot = host.rng.randint(1, self.cfg.n_slot)
        host.machine = NodeMachine(self.cfg, node, node <= self.n_reference, slot,
                                   host.rng, sc.forwarding)
        host.online = True
        host.listen_since_us = None
        host.epoch += 1
        self._push(self.now_us + self.cfg.t_proc_us, _RANK_TIMER, node, host.epoch)
        self.result.on_off.append((self.now_us, node, True))
        self.result.hop_events.append((self.now_us, node, host.machine.hop))
        if self.full_log:
            self._log("wake", node,
                      f"slot={slot} hop={host.machine.hop} ref={int(host.machine.is_reference)}")

    def _shutdown(self, node: int) -> None:
        host = self._hosts[node]
        if not host.online:
            if self.full_log:
                self._log("warn", node, "msg=off-while-offline")
            return
        host.online = False
        host.machine = None
        host.listen_since_us = None
        host.epoch += 1
        tx = self._ongoing.pop(node, None)
        if tx is not None:
            tx.aborted = True
            self._record_tx(tx, self.now_us)
        self.result.on_off.append((self.now_us, node, False))
        if self.full_log:
            self._log("off", node)

    # -- machine action processing ---------------------------------------------------

    def _run_machine(self, host: _NodeHost, fn, *args) -> None:
        machine = host.machine
        slot0 = machine.slot
        hop0 = machine.hop
        exhausted0 = machine.exhausted_redraws
        if self.full_log:
            heard0 = {nid: e.bidirectional for nid, e in machine.neighbors.items()}
        actions = fn(*args)
        now = self.now_us
        node = host.node
        if machine.slot != slot0:
            self.result.slot_events.append((now, node, slot0, machine.slot, False))
            if self.full_log:
                self._log("slot_change", node, f"old={slot0} new={machine.slot}")
        if machine.exhausted_redraws != exhausted0:
            self.result.slot_events.append((now, node, slot0, machine.slot, True))
            if self.full_log:
                self._log("slot_exhausted", node, f"slot={machine.slot}")
        if machine.hop != hop0:
            self.result.hop_events.append((now, node, machine.hop))
            if self.full_log:
                self._log("hop_change", node, f"old={hop0} new={machine.hop}")
        if self.full_log:
            for nid, entry in machine.neighbors.items():
                was = heard0.pop(nid, None)
                if was is None:
                    self._log("neighbor_heard", node, f"peer={nid}")
                if entry.bidirectional and not was:
                    self._log("neighbor_bidir", node, f"peer={nid}")
            for nid in heard0:
                self._log("neighbor_drop", node, f"peer={nid}")
        for action in actions:
            if type(action) is SetTimer:
                host.epoch += 1
                self._push(now + action.duration_us, _RANK_TIMER, node, host.epoch)
            elif type(action) is EnterRole:
                role = action.role
                if role in LISTENING_ROLES:
                    if host.listen_since_us is None:
                        host.listen_since_us = now
                else:
                    host.listen_since_us = None
                if self.full_log:
                    self._log("role", node, f"role={role.value}")
            elif type(action) is StartTransmit:
                self._start_transmission(host, action.frame, action.airtime_us)
            else:  # Deliver
                self.result.delivered.append((now, node, action.origin,
                                              action.sequence, action.payload))
                if self.full_log:
                    self._log("deliver", node,
                              f"origin={action.origin} seq={action.sequence} "
                              f"len={len(action.payload)}")

    def _start_transmission(self, host: _NodeHost, frame, airtime_us: int) -> None:
        now = self.now_us
        data = encode(frame)
        if self._per_packet:
            idx = host.node - 1
            draws = self._fading_rng.exponential(1.0, len(self._h2_threshold))
            ok = draws > self._h2_threshold[idx]
            receivers = tuple(j + 1 for j in np.flatnonzero(ok) if j + 1 != host.node)
        else:
            receivers = self._acc_out[host.node]
        tx = Transmission(host.node, frame, data, now, now + airtime_us, receivers)
        self._push(now, _RANK_TX_START, host.node, tx)
        self._push(now + airtime_us, _RANK_TX_END, host.node, tx)

    def _record_tx(self, tx: Transmission, end_us: int) -> None:
        frame = tx.frame
        if isinstance(frame, DataFrame):
            self.result.tx_records.append((tx.node, tx.start_us, end_us, True,
                                           frame.origin, frame.sequence))
        else:
            self.result.tx_records.append((tx.node, tx.start_us, end_us, False, 0, 0))

    # -- air interface ----------------------------------------------------------------

    def _tx_start(self, tx: Transmission) -> None:
        if tx.aborted or not self._hosts[tx.node].online:
            tx.aborted = True
            return
        for other in self._ongoing.values():
            common = tx.receiver_set & other.receiver_set
            if common:
                tx.corrupted |= common
                other.corrupted |= common
        self._ongoing[tx.node] = tx
        if self.full_log:
            frame = tx.frame
            kind = "data" if isinstance(frame, DataFrame) else "beacon"
            extra = (f" origin={frame.origin} seq={frame.sequence} next={frame.next_hop}"
                     if isinstance(frame, DataFrame) else "")
            self._log("tx_start", tx.node,
                      f"type={kind} slot={frame.slot} hop={frame.hop}{extra}")

    def _tx_end(self, tx: Transmission) -> None:
        if tx.aborted:
            return
        self._ongoing.pop(tx.node, None)
        self._record_tx(tx, tx.end_us)
        if self.full_log:
            self._log("tx_end", tx.node)
        for rx in tx.receivers:
            frame = self.deliver_or_collide(rx, tx)
            if frame is None:
                continue
            host = self._hosts[rx]
            if self.full_log:
                kind = "data" if isinstance(frame, DataFrame) else "beacon"
                self._log("rx", rx, f"from={tx.node} type={kind}")
            rssi = float(self.link.snr[tx.node - 1, rx - 1])
            self._run_machine(host, host.machine.on_frame_received, frame, self.now_us, rssi)
            if self.full_log:
                self._log("resync", rx, f"from={tx.node} dt_us={host.machine.timer_us}")

    def deliver_or_collide(self, rx: int, tx: Transmission) -> Beacon | DataFrame | None:
        """Reception check for one accessible receiver at the frame's end.

        Returns the decoded frame if the receiver listened over the whole
        airtime and no accessible overlap corrupted it, else None.
        """
        host = self._hosts[rx]
        if (not host.online or host.listen_since_us is None
                or host.listen_since_us > tx.start_us or rx in tx.corrupted):
            return None
        if tx.decoded is None:
            try:
                tx.decoded = decode(tx.data)
            except FrameError:
                if self.full_log:
                    self._log("rx_malformed", rx, f"from={tx.node}")
                return None
        return tx.decoded

    # -- main loop ----------------------------------------------------------------------

    def run(self) -> RunResult:
        sc = self.scenario
        for node in self.node_ids:
            wake = sc.wake_overrides.get(node)
            if wake is None:
                wake = self._wake_rng.randint(0, sc.wake_window_us)
            self._push(wake, _RANK_SCENARIO, node, ("boot", None))
        for ev in sc.events:
            self._push(ev.t_us, _RANK_SCENARIO, ev.node, (ev.kind, ev.payload))

        heap = self._heap
        horizon = sc.horizon_us
        while heap:
            t, rank, node, _, payload = heappop(heap)
            if t > horizon:
                break
            self.now_us = t
            if rank == _RANK_TIMER:
                host = self._hosts[node]
                if host.online and payload == host.epoch:
                    self._run_machine(host, host.machine.on_timer_expired, t)
            elif rank == _RANK_TX_END:
                self._tx_end(payload)
            elif rank == _RANK_TX_START:
                self._tx_start(payload)
            else:
                self._scenario_event(node, payload)

        for tx in self._ongoing.values():
            self._record_tx(tx, tx.end_us)
        self._snapshot_finals()
        return self.result

    def _scenario_event(self, node: int, payload) -> None:
        kind, data = payload
        if kind == "boot":
            self._boot(node)
        elif kind == "node_on":
            # Cold boot after a random settling delay, like the initial wake.
            delay = self._wake_rng.randint(0, self.scenario.wake_window_us)
            self._push(self.now_us + delay, _RANK_SCENARIO, node, ("boot", None))
        elif kind == "node_off":
            self._shutdown(node)
        elif kind == "inject":
            host = self._hosts[node]
            if not host.online:
                if self.full_log:
                    self._log("warn", node, "msg=inject-while-offline")
                return
            msg = host.machine.originate_message(data)
            self.result.injected.append((self.now_us, node, msg.sequence))
            if self.full_log:
                self._log("inject", node, f"seq={msg.sequence} len={len(data)}")
        else:
            raise ValueError(f"unknown scenario event kind {kind!r}")

    def _snapshot_finals(self) -> None:
        for node in self.node_ids:
            host = self._hosts[node]
            if not host.online:
                self.result.finals[node] = {"online": False}
                continue
            m = host.machine
            self.result.finals[node] = {
                "online": True,
                "is_reference": m.is_reference,
                "role": m.role.value,
                "slot": m.slot,
                "hop": m.hop,
                "heard": {nid: {"slot": e.slot, "hop": e.hop,
                                "last_heard_us": e.last_heard_us,
                                "bidirectional": e.bidirectional}
                          for nid, e in m.neighbors.items()},
                "reverse_routes": dict(m.reverse_routes),
                "queue": [(q.origin, q.sequence) for q in m.msg_queue],
                "dropped_unroutable": m.dropped_unroutable,
                "duplicates_dropped": m.duplicates_dropped,
                "exhausted_redraws": m.exhausted_redraws,
                "last_adjust_exhausted": m.last_adjust_exhausted,
            }


def run_once(scenario: Scenario, seed: int | None = None, detail: str = "light") -> RunResult:
    """Convenience wrapper: one realization with the scenario's own seed."""
    return Simulator(scenario, scenario.seed if seed is None else seed, detail).run()
