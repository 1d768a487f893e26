"""Slot-synchronized self-healing mesh: protocol core, simulator, and metrics.

The package splits into five layers:

* :mod:`slotmesh.frames` -- byte-exact wire codec for beacon and data frames.
* :mod:`slotmesh.protocol` -- the per-node state machine: role cycle, timer
  resynchronization, slot-conflict resolution, neighbour tables, hop
  bookkeeping, and next-hop forwarding.  Pure logic, no I/O, no clock.
* :mod:`slotmesh.channel` -- ground-truth radio model: placements, path
  loss with shadowing/fading/per-node imbalance, and the link table.
* :mod:`slotmesh.engine` -- discrete-event simulator gluing machines to the
  channel with integer-microsecond time, half-duplex radios, and collisions.
* :mod:`slotmesh.metrics` -- evaluation: victim traces, collision-probability
  curves, consensus times, breadth-first hop auditing, neighbour accuracy.

:mod:`slotmesh.scenarios` defines the experiment configuration schema and
named presets; :mod:`slotmesh.cli` exposes ``run``/``sweep``/``report``/
``preset-dump`` commands.
"""

from . import metrics
from .channel import (
    ChannelParams,
    ExplicitPlacement,
    GridPlacement,
    LinkTable,
    UniformRandomPlacement,
    place_nodes,
    snr_db,
)
from .engine import RunResult, ScriptedGrantRng, Simulator, mix64, run_once
from .frames import (
    MAX_PAYLOAD,
    NEXT_HOP_BROADCAST,
    Beacon,
    DataFrame,
    FrameError,
    decode,
    encode,
)
from .protocol import (
    Deliver,
    EnterRole,
    NodeMachine,
    Role,
    SetTimer,
    StartTransmit,
    TimingConfig,
)
from .scenarios import (
    PRESETS,
    Scenario,
    ScenarioError,
    ScenarioEvent,
    dump_scenario,
    load_scenario,
    parse_scenario,
    preset,
)

__version__ = "0.1.0"

__all__ = [
    "Beacon",
    "ChannelParams",
    "DataFrame",
    "Deliver",
    "EnterRole",
    "ExplicitPlacement",
    "FrameError",
    "GridPlacement",
    "LinkTable",
    "MAX_PAYLOAD",
    "NEXT_HOP_BROADCAST",
    "NodeMachine",
    "PRESETS",
    "Role",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "ScenarioEvent",
    "ScriptedGrantRng",
    "SetTimer",
    "Simulator",
    "StartTransmit",
    "TimingConfig",
    "UniformRandomPlacement",
    "decode",
    "dump_scenario",
    "encode",
    "load_scenario",
    "metrics",
    "mix64",
    "parse_scenario",
    "place_nodes",
    "preset",
    "run_once",
    "snr_db",
    "__version__",
]
