"""Per-node protocol state machine.

Pure event-driven logic: a :class:`NodeMachine` never touches a clock or a
radio. The host feeds it timer expirations and decoded frames, and it answers
with a list of actions (set a timer, start a transmission, deliver a payload).
All durations are integer microseconds; timestamps are microseconds since the
start of the realization.

Each node cycles through a fixed processing window followed by a communication
window of ``n_slot`` equal slots. At the start of every cycle the node draws
whether it will transmit this period ("granted"). A granted node waits out the
slots before its own, transmits one frame at the start of its slot, then
listens for the rest of the window; a non-granted node listens the whole
window. Every received frame re-aligns the local timer to the sender's
timeline, so synchronization spreads hop by hop without any global clock.
"""

from __future__ import annotations

import random
from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum

from .frames import Beacon, DataFrame, NEXT_HOP_BROADCAST

MAX_SEND_ATTEMPTS = 100  # unroutable messages are dropped after this many tries
ROUTE_CACHE_SIZE = 32    # (origin, sequence) pairs remembered for duplicate suppression

FORWARDING_POLICIES = ("random_tie", "best_rssi", "broadcast_min")


class Role(Enum):
    """What the radio is doing right now."""

    PROCESSING = "processing"          # head-down compute window, radio off
    RESPONDER_PRE = "responder_pre"    # listening; own transmit turn (if any) still ahead
    INITIATOR = "initiator"            # on the air
    RESPONDER_POST = "responder_post"  # listening out the remainder of the window


LISTENING_ROLES = (Role.RESPONDER_PRE, Role.RESPONDER_POST)


@dataclass(frozen=True)
class TimingConfig:
    """Shared timing/protocol constants for one network."""

    t_proc_us: int = 10_000
    t_slot_us: int = 10_000
    t_beacon_us: int = 5_000
    n_slot: int = 12
    p_grant: float = 0.5
    n_max: int = 10   # neighbor entries older than n_max cycles are pruned
    h_na: int = 30    # hop value meaning "no route to a reference"

    def __post_init__(self):
        if self.t_beacon_us > self.t_slot_us:
            raise ValueError("beacon airtime exceeds slot duration")
        if min(self.t_proc_us, self.t_slot_us, self.t_beacon_us) <= 0:
            raise ValueError("durations must be positive")
        if self.n_slot < 2:
            raise ValueError("need at least two slots")
        if not 0.0 <= self.p_grant <= 1.0:
            raise ValueError("p_grant outside [0, 1]")
        if self.n_max < 1 or self.h_na < 2:
            raise ValueError("n_max must be >= 1 and h_na >= 2")

    @property
    def t_comm_us(self) -> int:
        return self.n_slot * self.t_slot_us

    @property
    def t_tail_us(self) -> int:
        """Slot time left after a frame sent at the slot boundary finishes."""
        return self.t_slot_us - self.t_beacon_us

    @property
    def cycle_us(self) -> int:
        return self.t_proc_us + self.t_comm_us

    @property
    def prune_age_us(self) -> int:
        return self.n_max * self.cycle_us


class NeighborEntry:
    """Last-known facts about a directly heard node."""

    __slots__ = ("node", "slot", "hop", "last_heard_us", "bidirectional", "rssi_db")

    def __init__(self, node: int, slot: int, hop: int, last_heard_us: int,
                 bidirectional: bool = False, rssi_db: float | None = None):
        self.node = node
        self.slot = slot
        self.hop = hop
        self.last_heard_us = last_heard_us
        self.bidirectional = bidirectional
        self.rssi_db = rssi_db

    def __repr__(self):
        flag = "<->" if self.bidirectional else "->"
        return f"NeighborEntry({self.node}{flag} slot={self.slot} hop={self.hop} heard={self.last_heard_us})"


@dataclass
class QueuedMessage:
    origin: int
    sequence: int
    payload: bytes
    attempts: int = 0


# Actions handed back to the host for execution.

@dataclass
class SetTimer:
    duration_us: int


@dataclass
class EnterRole:
    role: Role


@dataclass
class StartTransmit:
    frame: Beacon | DataFrame
    airtime_us: int


@dataclass
class Deliver:
    origin: int
    sequence: int
    payload: bytes


Action = SetTimer | EnterRole | StartTransmit | Deliver


class NodeMachine:
    """One node's protocol state.

    The injected ``rng`` is the node's private randomness stream; it is the
    only source of nondeterminism (grant draws, slot re-draws, forwarding
    tie-breaks).
    """

    def __init__(self, config: TimingConfig, node_id: int, is_reference: bool,
                 initial_slot: int, rng: random.Random,
                 forwarding: str = "random_tie"):
        if not 1 <= initial_slot <= config.n_slot:
            raise ValueError(f"initial slot {initial_slot} outside 1..{config.n_slot}")
        if forwarding not in FORWARDING_POLICIES:
            raise ValueError(f"unknown forwarding policy {forwarding!r}")
        self.config = config
        self.node_id = node_id
        self.is_reference = is_reference
        self.slot = initial_slot
        self.hop = 0 if is_reference else config.h_na
        self.role = Role.PROCESSING
        self.timer_us = config.t_proc_us
        self.neighbors: dict[int, NeighborEntry] = {}
        self.msg_queue: deque[QueuedMessage] = deque()
        self.reverse_routes: dict[int, int] = {}
        self.forwarding = forwarding
        self.dropped_unroutable = 0
        self.duplicates_dropped = 0
        self.exhausted_redraws = 0
        self.last_adjust_exhausted = False
        self._rng = rng
        self._route_cache: OrderedDict[tuple[int, int], None] = OrderedDict()
        self._next_sequence = 0
        self._prune_clean_until_us = 0
        # The transmit grant is drawn once per cycle, on entering processing.
        self.granted = rng.random() <= config.p_grant

    # -- timer-driven transitions -------------------------------------------------

    def on_timer_expired(self, now_us: int) -> list[Action]:
        """Advance the role cycle. Returns the actions the host must execute."""
        cfg = self.config
        actions: list[Action] = []
        if self.role is Role.PROCESSING:
            self.role = Role.RESPONDER_PRE
            actions.append(EnterRole(Role.RESPONDER_PRE))
            if self.granted:
                # Wait out the slots before ours; zero duration means we are
                # first and the next expiry puts us on the air immediately.
                self._set_timer(actions, (self.slot - 1) * cfg.t_slot_us)
            else:
                self._set_timer(actions, cfg.t_comm_us)
        elif self.role is Role.RESPONDER_PRE:
            if self.granted:
                self.role = Role.INITIATOR
                actions.append(EnterRole(Role.INITIATOR))
                actions.append(StartTransmit(self.build_frame(), cfg.t_beacon_us))
                self._set_timer(actions, cfg.t_beacon_us)
            else:
                self._enter_processing(actions, now_us)
        elif self.role is Role.INITIATOR:
            self.role = Role.RESPONDER_POST
            actions.append(EnterRole(Role.RESPONDER_POST))
            self._set_timer(actions, (cfg.n_slot - self.slot) * cfg.t_slot_us + cfg.t_tail_us)
        else:
            self._enter_processing(actions, now_us)
        return actions

    def _enter_processing(self, actions: list[Action], now_us: int) -> None:
        self.role = Role.PROCESSING
        actions.append(EnterRole(Role.PROCESSING))
        self.prune_neighbors(now_us)
        self.recompute_hop()
        self.granted = self._rng.random() <= self.config.p_grant
        self._set_timer(actions, self.config.t_proc_us)

    def _set_timer(self, actions: list[Action], duration_us: int) -> None:
        self.timer_us = duration_us
        actions.append(SetTimer(duration_us))

    # -- frame reception ----------------------------------------------------------

    def on_frame_received(self, frame: Beacon | DataFrame, now_us: int,
                          rssi_db: float | None = None) -> list[Action]:
        """Process a fully received frame.

        The host only calls this while the node is listening (either responder
        role), at the instant reception completes.
        """
        if self.role not in LISTENING_ROLES:
            raise RuntimeError(f"frame received while {self.role.value}; host must gate on listening roles")
        actions: list[Action] = []
        entry = self.neighbors.get(frame.sender)
        if entry is None:
            entry = NeighborEntry(frame.sender, frame.slot, frame.hop, now_us, False, rssi_db)
            self.neighbors[frame.sender] = entry
        else:
            entry.slot = frame.slot
            entry.hop = frame.hop
            entry.last_heard_us = now_us
            entry.rssi_db = rssi_db
        for nid, _ in frame.neighbors:
            if nid == self.node_id:
                entry.bidirectional = True
                break
        self.adjust_slot(frame)
        self._set_timer(actions, self.resync_timer(frame.slot))
        self.prune_neighbors(now_us)
        self.recompute_hop()
        if isinstance(frame, DataFrame) and self._is_next_hop(frame):
            self._accept_data(frame, actions)
        return actions

    def _is_next_hop(self, frame: DataFrame) -> bool:
        if frame.next_hop == self.node_id:
            return True
        if frame.next_hop == NEXT_HOP_BROADCAST:
            # Wildcard used by the broadcast-min policy: references and any
            # node strictly closer to a reference than the sender take it.
            return self.is_reference or self.hop < frame.hop
        return False

    def _accept_data(self, frame: DataFrame, actions: list[Action]) -> None:
        key = (frame.origin, frame.sequence)
        if key in self._route_cache:
            self.duplicates_dropped += 1
            return
        self._remember_route_key(key)
        self.record_reverse_route(frame)
        if self.is_reference:
            actions.append(Deliver(frame.origin, frame.sequence, frame.payload))
        else:
            self.msg_queue.append(QueuedMessage(frame.origin, frame.sequence, frame.payload))

    def _remember_route_key(self, key: tuple[int, int]) -> None:
        self._route_cache[key] = None
        if len(self._route_cache) > ROUTE_CACHE_SIZE:
            self._route_cache.popitem(last=False)

    # -- slot collision resolution ------------------------------------------------

    def adjust_slot(self, frame: Beacon | DataFrame) -> int:
        """Re-draw the own slot if the frame reports it in use elsewhere.

        The reported set is the sender's slot plus every slot in the frame's
        neighbor list, skipping the entry that names this node itself (that
        one merely echoes our own claim back at us). The replacement is drawn
        uniformly from the slots not known to be taken — neither by our own
        heard set nor by the frame — and the slot is kept unchanged when no
        such slot exists.
        """
        own = self.node_id
        conflict = frame.slot == self.slot or any(
            s == self.slot and nid != own for nid, s in frame.neighbors)
        if not conflict:
            self.last_adjust_exhausted = False
            return self.slot
        taken = {s for nid, s in frame.neighbors if nid != own}
        taken.add(frame.slot)
        taken.update(e.slot for e in self.neighbors.values())
        candidates = [s for s in range(1, self.config.n_slot + 1) if s not in taken]
        if not candidates:
            self.exhausted_redraws += 1
            self.last_adjust_exhausted = True
            return self.slot
        self.slot = self._rng.choice(candidates)
        self.last_adjust_exhausted = False
        return self.slot

    # -- timer resynchronization --------------------------------------------------

    def resync_timer(self, sender_slot: int) -> int:
        """Re-arm the cycle timer off a just-received frame.

        Reception completes exactly one beacon airtime into the sender's slot,
        so the sender's communication window ends ``(n_slot - sender_slot) *
        t_slot + t_tail`` from now. A responder with no pending transmit turn
        counts down to that instant and re-enters processing in lockstep with
        the sender. A granted responder instead counts down to the start of
        its own slot on the sender's grid — in this window if its slot is
        still ahead, otherwise in the next window (staying in the responder
        role across the boundary, skipping one processing window). If both
        share a slot the node forfeits this turn and falls back to the
        window-end countdown; the next cycle's draw decides whether it
        transmits again.
        """
        cfg = self.config
        to_window_end = (cfg.n_slot - sender_slot) * cfg.t_slot_us + cfg.t_tail_us
        if self.role is Role.RESPONDER_PRE and self.granted:
            if self.slot > sender_slot:
                duration = (self.slot - sender_slot - 1) * cfg.t_slot_us + cfg.t_tail_us
            elif self.slot < sender_slot:
                duration = (cfg.n_slot + self.slot - sender_slot - 1) * cfg.t_slot_us \
                    + cfg.t_proc_us + cfg.t_tail_us
            else:
                self.granted = False
                duration = to_window_end
        elif self.role in LISTENING_ROLES:
            duration = to_window_end
        else:
            raise RuntimeError(f"resync while {self.role.value}")
        self.timer_us = duration
        return duration

    # -- neighbor table maintenance -----------------------------------------------

    def prune_neighbors(self, now_us: int) -> list[int]:
        """Drop neighbors not heard within the staleness horizon."""
        if now_us <= self._prune_clean_until_us:
            return []
        age_limit = self.config.prune_age_us
        stale = [nid for nid, e in self.neighbors.items()
                 if now_us - e.last_heard_us > age_limit]
        for nid in stale:
            del self.neighbors[nid]
        # Entries only ever get fresher, so nothing can go stale again before
        # the oldest survivor crosses the horizon.
        if self.neighbors:
            oldest = min(e.last_heard_us for e in self.neighbors.values())
            self._prune_clean_until_us = oldest + age_limit
        else:
            self._prune_clean_until_us = now_us + age_limit
        return stale

    def recompute_hop(self) -> int:
        """Shortest-claimed-path rule: one more than the best bidirectional
        neighbor still claiming a usable route; unreachable otherwise."""
        if self.is_reference:
            self.hop = 0
            return 0
        cap = self.config.h_na
        best = -1
        for e in self.neighbors.values():
            if e.bidirectional and e.hop < cap - 1 and (best < 0 or e.hop < best):
                best = e.hop
        self.hop = cap if best < 0 else best + 1
        return self.hop

    # -- routing -------------------------------------------------------------------

    def select_next_hop(self) -> int | None:
        """Pick the forwarding target among bidirectional neighbors.

        Returns None when there is no bidirectional neighbor or none of them
        claims a route (all at h_na). Under the default policy ties on the
        minimum claimed hop break uniformly at random; ``best_rssi`` breaks
        them on the strongest last-heard signal; ``broadcast_min`` returns the
        wildcard address so every closer-to-reference neighbor picks it up.
        """
        cap = self.config.h_na
        best_hop = cap
        best: list[int] = []
        for nid, e in self.neighbors.items():
            if not e.bidirectional or e.hop >= cap:
                continue
            if e.hop < best_hop:
                best_hop = e.hop
                best = [nid]
            elif e.hop == best_hop:
                best.append(nid)
        if not best:
            return None
        if self.forwarding == "broadcast_min":
            return NEXT_HOP_BROADCAST
        if len(best) == 1:
            return best[0]
        if self.forwarding == "best_rssi":
            known = [n for n in best if self.neighbors[n].rssi_db is not None]
            if known:
                return max(known, key=lambda n: (self.neighbors[n].rssi_db, -n))
        return self._rng.choice(sorted(best))

    def build_frame(self) -> Beacon | DataFrame:
        """Assemble the frame for this transmit turn.

        Head-of-queue message goes out as a data frame when a route exists and
        leaves the queue; otherwise the attempt is counted, the message is
        retained (dropped after the retry cap), and a plain beacon goes out.
        """
        reports = [(nid, e.slot) for nid, e in self.neighbors.items()]
        if self.msg_queue:
            msg = self.msg_queue[0]
            target = self.select_next_hop()
            if target is not None:
                self.msg_queue.popleft()
                return DataFrame(self.node_id, self.slot, self.hop, reports,
                                 msg.origin, msg.sequence, target, msg.payload)
            msg.attempts += 1
            if msg.attempts >= MAX_SEND_ATTEMPTS:
                self.msg_queue.popleft()
                self.dropped_unroutable += 1
        return Beacon(self.node_id, self.slot, self.hop, reports)

    def record_reverse_route(self, frame: DataFrame) -> None:
        """Remember who handed us traffic from this origin; newest wins."""
        self.reverse_routes[frame.origin] = frame.sender

    def reverse_next_hop(self, origin: int) -> int | None:
        return self.reverse_routes.get(origin)

    def originate_message(self, payload: bytes) -> QueuedMessage:
        """Queue an own application message for the next granted turn."""
        msg = QueuedMessage(self.node_id, self._next_sequence, payload)
        self._next_sequence = (self._next_sequence + 1) & 0xFFFF
        self._remember_route_key((msg.origin, msg.sequence))
        self.msg_queue.append(msg)
        return msg

    # -- introspection helpers -----------------------------------------------------

    @property
    def heard_ids(self) -> set[int]:
        return set(self.neighbors)

    @property
    def bidirectional_ids(self) -> set[int]:
        return {nid for nid, e in self.neighbors.items() if e.bidirectional}

    def __repr__(self):
        kind = "ref" if self.is_reference else "node"
        return (f"NodeMachine({kind} {self.node_id} {self.role.value} slot={self.slot} "
                f"hop={self.hop} heard={sorted(self.neighbors)})")
