"""Scenario definitions: what to simulate, loaded from JSON or built-in presets.

A scenario bundles the timing constants, channel parameters, node deployment,
run horizon, scripted events (node on/off, message injection) and the
reproducibility knobs (seed, per-node overrides). JSON files use a versioned
``schema`` field; unknown keys anywhere in the document are rejected so typos
fail loudly rather than silently changing an experiment.

Durations in JSON are human-friendly (seconds or milliseconds, as named);
internally everything becomes integer microseconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .channel import (ChannelParams, ExplicitPlacement, GridPlacement, Placement,
                      UniformRandomPlacement)
from .protocol import FORWARDING_POLICIES, TimingConfig

SCHEMA_VERSION = 1

EVENT_KINDS = ("node_on", "node_off", "inject")


class ScenarioError(ValueError):
    """Scenario document rejected; the message lists every violated field."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ScenarioEvent:
    t_us: int
    kind: str
    node: int
    payload: bytes = b""


@dataclass(frozen=True)
class Scenario:
    name: str
    timing: TimingConfig = TimingConfig()
    channel: ChannelParams = ChannelParams()
    reference_placement: Placement = ExplicitPlacement(((0.0, 0.0),))
    sensing_placement: Placement = ExplicitPlacement(((10.0, 0.0),))
    horizon_us: int = 100_000_000
    wake_window_us: int = 100_000
    seed: int = 1
    realizations: int = 200
    forwarding: str = "random_tie"
    events: tuple[ScenarioEvent, ...] = ()
    wake_overrides: dict[int, int] = field(default_factory=dict)          # node -> wake time (us)
    initial_slot_overrides: dict[int, int] = field(default_factory=dict)  # node -> slot
    grant_overrides: dict[int, tuple[bool, ...]] = field(default_factory=dict)
    n_slot_sweep: tuple[int, ...] = ()  # sweep n_slot over these values; empty = just timing.n_slot

    @property
    def n_reference(self) -> int:
        return _placement_count(self.reference_placement)

    @property
    def n_sensing(self) -> int:
        return _placement_count(self.sensing_placement)

    @property
    def n_nodes(self) -> int:
        return self.n_reference + self.n_sensing

    def sweep_values(self) -> tuple[int, ...]:
        return self.n_slot_sweep or (self.timing.n_slot,)

    def with_n_slot(self, n_slot: int) -> "Scenario":
        return replace(self, timing=replace(self.timing, n_slot=n_slot), n_slot_sweep=())


def _placement_count(spec: Placement) -> int:
    if isinstance(spec, GridPlacement):
        return spec.rows * spec.cols
    if isinstance(spec, UniformRandomPlacement):
        return spec.count
    return len(spec.coords)


# ---------------------------------------------------------------------------
# JSON parsing. Every check appends to `problems` so a bad file reports all of
# its mistakes at once.


def _us_from(value, problems, path, scale) -> int:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        problems.append(f"{path}: expected a number, got {value!r}")
        return 0
    return int(round(value * scale))


def _expect_keys(obj: dict, path: str, required: dict, optional: dict, problems: list) -> bool:
    if not isinstance(obj, dict):
        problems.append(f"{path}: expected an object")
        return False
    for key in obj:
        if key not in required and key not in optional:
            problems.append(f"{path}.{key}: unknown key")
    ok = True
    for key in required:
        if key not in obj:
            problems.append(f"{path}.{key}: missing required key")
            ok = False
    return ok


def _parse_timing(obj, problems) -> TimingConfig:
    fields = {"t_proc_ms", "t_slot_ms", "t_beacon_ms", "n_slot", "p_grant", "n_max", "h_na"}
    if not _expect_keys(obj, "timing", {}, {k: None for k in fields}, problems):
        return TimingConfig()
    default = TimingConfig()
    kwargs = dict(
        t_proc_us=_us_from(obj.get("t_proc_ms", default.t_proc_us / 1000), problems, "timing.t_proc_ms", 1000),
        t_slot_us=_us_from(obj.get("t_slot_ms", default.t_slot_us / 1000), problems, "timing.t_slot_ms", 1000),
        t_beacon_us=_us_from(obj.get("t_beacon_ms", default.t_beacon_us / 1000), problems, "timing.t_beacon_ms", 1000),
        n_slot=obj.get("n_slot", default.n_slot),
        p_grant=obj.get("p_grant", default.p_grant),
        n_max=obj.get("n_max", default.n_max),
        h_na=obj.get("h_na", default.h_na),
    )
    try:
        return TimingConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"timing: {exc}")
        return default


def _parse_channel(obj, problems) -> ChannelParams:
    optional = {"eta", "shadow_sigma_db", "gamma0_db", "d0_m", "gamma_min_db",
                "imbalance_sigma_db", "fading_mode", "psi_overrides"}
    if not _expect_keys(obj, "channel", {}, {k: None for k in optional}, problems):
        return ChannelParams()
    kwargs = {k: obj[k] for k in optional if k in obj and k != "psi_overrides"}
    overrides = {}
    for key, value in obj.get("psi_overrides", {}).items():
        try:
            overrides[int(key)] = float(value)
        except (TypeError, ValueError):
            problems.append(f"channel.psi_overrides.{key}: expected node id -> dB value")
    try:
        return ChannelParams(psi_overrides=overrides, **kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"channel: {exc}")
        return ChannelParams()


def _parse_placement(obj, path, problems) -> Placement:
    fallback = ExplicitPlacement(((0.0, 0.0),))
    if not isinstance(obj, dict) or "kind" not in obj:
        problems.append(f"{path}: expected an object with a 'kind' key")
        return fallback
    kind = obj["kind"]
    if kind == "grid":
        if _expect_keys(obj, path, {"kind": None, "rows": None, "cols": None,
                                    "dx_m": None, "dy_m": None},
                        {"origin_x_m": None, "origin_y_m": None}, problems):
            try:
                return GridPlacement(int(obj["rows"]), int(obj["cols"]),
                                     float(obj["dx_m"]), float(obj["dy_m"]),
                                     float(obj.get("origin_x_m", 0.0)),
                                     float(obj.get("origin_y_m", 0.0)))
            except (TypeError, ValueError) as exc:
                problems.append(f"{path}: {exc}")
    elif kind == "uniform_random":
        if _expect_keys(obj, path, {"kind": None, "width_m": None, "height_m": None,
                                    "count": None}, {}, problems):
            try:
                return UniformRandomPlacement(float(obj["width_m"]), float(obj["height_m"]),
                                              int(obj["count"]))
            except (TypeError, ValueError) as exc:
                problems.append(f"{path}: {exc}")
    elif kind == "explicit":
        if _expect_keys(obj, path, {"kind": None, "coords": None}, {}, problems):
            try:
                coords = tuple((float(x), float(y)) for x, y in obj["coords"])
                if not coords:
                    raise ValueError("coords is empty")
                return ExplicitPlacement(coords)
            except (TypeError, ValueError) as exc:
                problems.append(f"{path}.coords: {exc}")
    else:
        problems.append(f"{path}.kind: unknown placement kind {kind!r}")
    return fallback


def _parse_events(items, n_nodes, n_reference, problems) -> tuple[ScenarioEvent, ...]:
    if not isinstance(items, list):
        problems.append("events: expected a list")
        return ()
    events = []
    for i, obj in enumerate(items):
        path = f"events[{i}]"
        if not _expect_keys(obj, path, {"t_s": None, "kind": None, "node": None},
                            {"payload_text": None, "payload_hex": None}, problems):
            continue
        kind = obj["kind"]
        if kind not in EVENT_KINDS:
            problems.append(f"{path}.kind: unknown event kind {kind!r}")
            continue
        node = obj["node"]
        if not isinstance(node, int) or not 1 <= node <= n_nodes:
            problems.append(f"{path}.node: {node!r} outside 1..{n_nodes}")
            continue
        payload = b""
        if "payload_text" in obj:
            payload = str(obj["payload_text"]).encode()
        elif "payload_hex" in obj:
            try:
                payload = bytes.fromhex(obj["payload_hex"])
            except ValueError:
                problems.append(f"{path}.payload_hex: not valid hex")
                continue
        if kind == "inject":
            if node <= n_reference:
                problems.append(f"{path}: inject target {node} is a reference node")
                continue
            if len(payload) > 64:
                problems.append(f"{path}: payload of {len(payload)} bytes exceeds 64")
                continue
        events.append(ScenarioEvent(_us_from(obj["t_s"], problems, f"{path}.t_s", 1_000_000),
                                    kind, node, payload))
    return tuple(events)


def _parse_int_map(obj, path, n_nodes, problems, value_check) -> dict[int, int]:
    result = {}
    if not isinstance(obj, dict):
        problems.append(f"{path}: expected an object keyed by node id")
        return result
    for key, value in obj.items():
        try:
            node = int(key)
        except (TypeError, ValueError):
            problems.append(f"{path}.{key}: key is not a node id")
            continue
        if not 1 <= node <= n_nodes:
            problems.append(f"{path}.{key}: node outside 1..{n_nodes}")
            continue
        checked = value_check(value, f"{path}.{key}")
        if checked is not None:
            result[node] = checked
    return result


def parse_scenario(doc: dict) -> Scenario:
    """Validate a JSON document and build a Scenario; raises ScenarioError."""
    problems: list[str] = []
    top_required = {"schema": None, "name": None}
    top_optional = {k: None for k in (
        "timing", "channel", "deployment", "horizon_s", "wake_window_ms", "seed",
        "realizations", "forwarding", "events", "wake_overrides",
        "initial_slot_overrides", "grant_overrides", "n_slot_sweep")}
    if not _expect_keys(doc, "scenario", top_required, top_optional, problems):
        raise ScenarioError(problems)
    if doc.get("schema") != SCHEMA_VERSION:
        problems.append(f"scenario.schema: expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        problems.append("scenario.name: expected a non-empty string")
        name = "unnamed"

    timing = _parse_timing(doc.get("timing", {}), problems)
    channel = _parse_channel(doc.get("channel", {}), problems)

    deployment = doc.get("deployment", {})
    if _expect_keys(deployment, "deployment", {"reference": None, "sensing": None}, {}, problems):
        reference = _parse_placement(deployment["reference"], "deployment.reference", problems)
        sensing = _parse_placement(deployment["sensing"], "deployment.sensing", problems)
    else:
        reference = ExplicitPlacement(((0.0, 0.0),))
        sensing = ExplicitPlacement(((10.0, 0.0),))

    n_reference = _placement_count(reference)
    n_nodes = n_reference + _placement_count(sensing)
    if n_nodes > 255:
        problems.append(f"deployment: {n_nodes} nodes exceed the 255 addressable ids")

    horizon_us = _us_from(doc.get("horizon_s", 100.0), problems, "scenario.horizon_s", 1_000_000)
    if horizon_us <= 0:
        problems.append("scenario.horizon_s: must be positive")
    wake_window_us = _us_from(doc.get("wake_window_ms", 100.0), problems,
                              "scenario.wake_window_ms", 1000)
    if wake_window_us < 0:
        problems.append("scenario.wake_window_ms: must be >= 0")

    seed = doc.get("seed", 1)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append(f"scenario.seed: expected an integer, got {seed!r}")
        seed = 1
    realizations = doc.get("realizations", 200)
    if not isinstance(realizations, int) or realizations < 1:
        problems.append(f"scenario.realizations: expected a positive integer, got {realizations!r}")
        realizations = 1
    forwarding = doc.get("forwarding", "random_tie")
    if forwarding not in FORWARDING_POLICIES:
        problems.append(f"scenario.forwarding: {forwarding!r} not in {FORWARDING_POLICIES}")
        forwarding = "random_tie"

    events = _parse_events(doc.get("events", []), n_nodes, n_reference, problems)

    n_slot_sweep = doc.get("n_slot_sweep", [])
    if not isinstance(n_slot_sweep, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 2 for v in n_slot_sweep):
        problems.append("scenario.n_slot_sweep: expected a list of slot counts >= 2")
        n_slot_sweep = []
    max_slot = max([timing.n_slot, *n_slot_sweep])

    def wake_check(value, path):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            problems.append(f"{path}: expected wake time in ms >= 0")
            return None
        return int(round(value * 1000))

    def slot_check(value, path):
        if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= max_slot:
            problems.append(f"{path}: slot outside 1..{max_slot}")
            return None
        return value

    def grants_check(value, path):
        if not isinstance(value, list) or not all(isinstance(v, bool) for v in value):
            problems.append(f"{path}: expected a list of booleans")
            return None
        return tuple(value)

    wake_overrides = _parse_int_map(doc.get("wake_overrides", {}), "wake_overrides",
                                    n_nodes, problems, wake_check)
    slot_overrides = _parse_int_map(doc.get("initial_slot_overrides", {}),
                                    "initial_slot_overrides", n_nodes, problems, slot_check)
    grant_overrides = _parse_int_map(doc.get("grant_overrides", {}), "grant_overrides",
                                     n_nodes, problems, grants_check)

    if problems:
        raise ScenarioError(problems)
    return Scenario(name=name, timing=timing, channel=channel,
                    reference_placement=reference, sensing_placement=sensing,
                    horizon_us=horizon_us, wake_window_us=wake_window_us, seed=seed,
                    realizations=realizations, forwarding=forwarding, events=events,
                    wake_overrides=wake_overrides, initial_slot_overrides=slot_overrides,
                    grant_overrides=grant_overrides, n_slot_sweep=tuple(n_slot_sweep))


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"not valid JSON: {exc}"]) from exc
    return parse_scenario(doc)


# ---------------------------------------------------------------------------
# Serialization back to the JSON shape (exact inverse of parse_scenario).


def _dump_placement(spec: Placement) -> dict:
    if isinstance(spec, GridPlacement):
        out = {"kind": "grid", "rows": spec.rows, "cols": spec.cols,
               "dx_m": spec.dx_m, "dy_m": spec.dy_m}
        if spec.origin_x_m or spec.origin_y_m:
            out["origin_x_m"] = spec.origin_x_m
            out["origin_y_m"] = spec.origin_y_m
        return out
    if isinstance(spec, UniformRandomPlacement):
        return {"kind": "uniform_random", "width_m": spec.width_m,
                "height_m": spec.height_m, "count": spec.count}
    return {"kind": "explicit", "coords": [[x, y] for x, y in spec.coords]}


def dump_scenario(sc: Scenario) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "name": sc.name,
        "timing": {
            "t_proc_ms": sc.timing.t_proc_us / 1000,
            "t_slot_ms": sc.timing.t_slot_us / 1000,
            "t_beacon_ms": sc.timing.t_beacon_us / 1000,
            "n_slot": sc.timing.n_slot,
            "p_grant": sc.timing.p_grant,
            "n_max": sc.timing.n_max,
            "h_na": sc.timing.h_na,
        },
        "channel": {
            "eta": sc.channel.eta,
            "shadow_sigma_db": sc.channel.shadow_sigma_db,
            "gamma0_db": sc.channel.gamma0_db,
            "d0_m": sc.channel.d0_m,
            "gamma_min_db": sc.channel.gamma_min_db,
            "imbalance_sigma_db": sc.channel.imbalance_sigma_db,
            "fading_mode": sc.channel.fading_mode,
        },
        "deployment": {
            "reference": _dump_placement(sc.reference_placement),
            "sensing": _dump_placement(sc.sensing_placement),
        },
        "horizon_s": sc.horizon_us / 1_000_000,
        "wake_window_ms": sc.wake_window_us / 1000,
        "seed": sc.seed,
        "realizations": sc.realizations,
        "forwarding": sc.forwarding,
    }
    if sc.channel.psi_overrides:
        doc["channel"]["psi_overrides"] = {str(k): v for k, v in sc.channel.psi_overrides.items()}
    if sc.events:
        doc["events"] = []
        for ev in sc.events:
            item = {"t_s": ev.t_us / 1_000_000, "kind": ev.kind, "node": ev.node}
            if ev.payload:
                item["payload_hex"] = ev.payload.hex()
            doc["events"].append(item)
    if sc.wake_overrides:
        doc["wake_overrides"] = {str(k): v / 1000 for k, v in sc.wake_overrides.items()}
    if sc.initial_slot_overrides:
        doc["initial_slot_overrides"] = {str(k): v for k, v in sc.initial_slot_overrides.items()}
    if sc.grant_overrides:
        doc["grant_overrides"] = {str(k): list(v) for k, v in sc.grant_overrides.items()}
    if sc.n_slot_sweep:
        doc["n_slot_sweep"] = list(sc.n_slot_sweep)
    return doc


# ---------------------------------------------------------------------------
# Presets reproducing the published experiments (desk-scale realization counts;
# pass --realizations to restore the full 2000).


def _reference_line() -> ExplicitPlacement:
    # Five anchors marching diagonally across the 125 m x 100 m field,
    # successive anchors 30 m apart in x and 25 m in y.
    return ExplicitPlacement(tuple((30.0 * i, 25.0 * i) for i in range(5)))


def _preset_fig2() -> Scenario:
    # Two nodes, four slots, both starting on slot 1 with scripted transmit
    # grants: replays the worked synchronization example step by step.
    return Scenario(
        name="fig2-two-node",
        timing=TimingConfig(n_slot=4),
        channel=ChannelParams(shadow_sigma_db=0.0, imbalance_sigma_db=0.0),
        reference_placement=ExplicitPlacement(((0.0, 0.0),)),
        sensing_placement=ExplicitPlacement(((1.0, 0.0),)),
        horizon_us=500_000,
        seed=11,
        realizations=1,
        wake_overrides={1: 8_000, 2: 0},
        initial_slot_overrides={1: 1, 2: 1},
        grant_overrides={1: (True,) * 12, 2: (True,) * 12},
    )


def _preset_fig3a() -> Scenario:
    return Scenario(
        name="fig3a-grid",
        timing=TimingConfig(n_slot=12),
        reference_placement=_reference_line(),
        sensing_placement=GridPlacement(rows=5, cols=5, dx_m=25.0, dy_m=20.0,
                                        origin_x_m=12.5, origin_y_m=10.0),
        horizon_us=100_000_000,
        seed=101,
        realizations=50,
    )


def _preset_fig3b() -> Scenario:
    return Scenario(
        name="fig3b-random",
        timing=TimingConfig(n_slot=16),
        reference_placement=_reference_line(),
        sensing_placement=UniformRandomPlacement(125.0, 100.0, 25),
        horizon_us=100_000_000,
        seed=202,
        realizations=50,
    )


def _preset_fig4() -> Scenario:
    base = _preset_fig3a()
    events = tuple(ScenarioEvent(20_000_000, "node_off", n) for n in (1, 2, 3, 4)) + (
        ScenarioEvent(40_000_000, "node_off", 5),
        ScenarioEvent(80_000_000, "node_on", 5),
    )
    return replace(base, name="fig4-healing", seed=301, realizations=1, events=events)


def _preset_fig5a() -> Scenario:
    return Scenario(
        name="fig5a-sweep",
        timing=TimingConfig(n_slot=20, p_grant=0.5),
        reference_placement=_reference_line(),
        sensing_placement=UniformRandomPlacement(125.0, 100.0, 25),
        horizon_us=100_000_000,
        seed=404,
        realizations=200,
        n_slot_sweep=(12, 16, 20),
    )


def _preset_fig5b() -> Scenario:
    return replace(_preset_fig5a(), name="fig5b-sweep",
                   timing=TimingConfig(n_slot=20, p_grant=0.25),
                   seed=505, n_slot_sweep=(19, 20))


def _preset_demo() -> Scenario:
    # Five-node tabletop layout: nodes 4 and 5 transmit 30 dB down, so node 4
    # reaches a reference only through node 5 even though it hears everyone.
    return Scenario(
        name="demo-5node",
        timing=TimingConfig(t_proc_us=100_000, t_slot_us=25_000, t_beacon_us=5_000,
                            n_slot=8, p_grant=0.5, n_max=50, h_na=127),
        channel=ChannelParams(shadow_sigma_db=0.0, imbalance_sigma_db=0.0,
                              psi_overrides={4: -30.0, 5: -30.0}),
        reference_placement=ExplicitPlacement(((0.0, 0.0),)),
        sensing_placement=ExplicitPlacement(((20.0, 0.0), (40.0, 0.0), (6.0, 6.0), (3.0, 3.0))),
        horizon_us=30_000_000,
        seed=601,
        realizations=1,
        events=(ScenarioEvent(20_000_000, "inject", 4, b"reading"),),
    )


PRESETS = {
    "fig2-two-node": _preset_fig2,
    "fig3a-grid": _preset_fig3a,
    "fig3b-random": _preset_fig3b,
    "fig4-healing": _preset_fig4,
    "fig5a-sweep": _preset_fig5a,
    "fig5b-sweep": _preset_fig5b,
    "demo-5node": _preset_demo,
}


def preset(name: str) -> Scenario:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ScenarioError([f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}"]) from None
    return factory()
