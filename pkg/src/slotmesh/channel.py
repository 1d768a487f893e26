"""Radio channel model: node placement and per-realization link quality.

Link budget in dB for a transmission from node m to node n:

    snr = gamma0 + psi_m + phi_mn + 10*log10(|h_mn|^2) - 10*eta*log10(d_mn / d0)

where gamma0 is the mean SNR measured at reference distance d0, psi_m is a
per-node transmit-power imbalance, phi is log-normal shadowing (symmetric per
unordered pair), and |h|^2 is unit-mean exponential (Rayleigh) fading, also
symmetric. Node n can decode m iff snr strictly exceeds the receiver
threshold. Directionality enters only through psi, so asymmetric (one-way)
links are exactly the pairs whose imbalance difference straddles the margin.

Shadowing and fading are drawn once per realization ("static" mode). In
"per-packet" mode the static fading draw is replaced by a fresh one per
directed transmission while shadowing stays fixed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

FADING_MODES = ("static", "per_packet")


@dataclass(frozen=True)
class ChannelParams:
    eta: float = 3.7                    # path-loss exponent
    shadow_sigma_db: float = 6.0        # shadowing std dev
    gamma0_db: float = 20.0             # mean SNR at the reference distance
    d0_m: float = 10.0                  # reference distance
    gamma_min_db: float = -5.0          # decode threshold
    imbalance_sigma_db: float = 3.0     # per-node transmit power imbalance std dev
    fading_mode: str = "static"
    psi_overrides: dict[int, float] = field(default_factory=dict)  # node id -> fixed psi (dB)

    def __post_init__(self):
        if self.fading_mode not in FADING_MODES:
            raise ValueError(f"fading_mode must be one of {FADING_MODES}")
        if self.d0_m <= 0 or self.eta <= 0:
            raise ValueError("d0_m and eta must be positive")
        if self.shadow_sigma_db < 0 or self.imbalance_sigma_db < 0:
            raise ValueError("standard deviations cannot be negative")


# ---------------------------------------------------------------------------
# Placement


@dataclass(frozen=True)
class GridPlacement:
    rows: int
    cols: int
    dx_m: float
    dy_m: float
    origin_x_m: float = 0.0
    origin_y_m: float = 0.0


@dataclass(frozen=True)
class UniformRandomPlacement:
    width_m: float
    height_m: float
    count: int


@dataclass(frozen=True)
class ExplicitPlacement:
    coords: tuple[tuple[float, float], ...]


Placement = GridPlacement | UniformRandomPlacement | ExplicitPlacement


def place_nodes(spec: Placement, rng: np.random.Generator) -> list[tuple[float, float]]:
    """Expand a placement spec into coordinates, row-major for grids."""
    if isinstance(spec, GridPlacement):
        return [(spec.origin_x_m + c * spec.dx_m, spec.origin_y_m + r * spec.dy_m)
                for r in range(spec.rows) for c in range(spec.cols)]
    if isinstance(spec, UniformRandomPlacement):
        xs = rng.uniform(0.0, spec.width_m, spec.count)
        ys = rng.uniform(0.0, spec.height_m, spec.count)
        return [(float(x), float(y)) for x, y in zip(xs, ys)]
    if isinstance(spec, ExplicitPlacement):
        return [(float(x), float(y)) for x, y in spec.coords]
    raise TypeError(f"unknown placement spec {spec!r}")


# ---------------------------------------------------------------------------
# Link realization


def snr_db(gamma0_db: float, psi_tx_db: float, phi_db: float, h2: float,
           distance_m: float, d0_m: float, eta: float) -> float:
    """Closed-form link budget for a single directed transmission."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    if h2 <= 0:
        return -math.inf
    return (gamma0_db + psi_tx_db + phi_db + 10.0 * math.log10(h2)
            - 10.0 * eta * math.log10(distance_m / d0_m))


class LinkTable:
    """One realization of every directed link between N nodes.

    Arrays are indexed by node id minus one. ``snr[i, j]`` is the SNR of i's
    transmission as seen by j; the diagonal is -inf and never accessible.
    """

    def __init__(self, coords: list[tuple[float, float]], params: ChannelParams,
                 rng: np.random.Generator):
        n = len(coords)
        if n < 2:
            raise ValueError("need at least two nodes")
        xy = np.asarray(coords, dtype=float)
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        off_diag = ~np.eye(n, dtype=bool)
        if np.any(dist[off_diag] <= 0.0):
            raise ValueError("two nodes share a position; distances must be positive")

        # Symmetric per-pair draws: fill the upper triangle, mirror it down.
        iu = np.triu_indices(n, k=1)
        phi = np.zeros((n, n))
        phi[iu] = rng.normal(0.0, params.shadow_sigma_db, len(iu[0]))
        phi += phi.T
        h2 = np.zeros((n, n))
        h2[iu] = rng.exponential(1.0, len(iu[0]))
        h2 += h2.T

        psi = rng.normal(0.0, params.imbalance_sigma_db, n)
        for node_id, value in params.psi_overrides.items():
            if not 1 <= node_id <= n:
                raise ValueError(f"psi override for unknown node {node_id}")
            psi[node_id - 1] = value

        self.coords = [(float(x), float(y)) for x, y in coords]
        self.params = params
        self.dist = dist
        self.phi = phi
        self.h2 = h2
        self.psi = psi
        self.snr = self._snr_matrix(h2)
        self.accessible = self.snr > params.gamma_min_db

    def _snr_matrix(self, h2: np.ndarray) -> np.ndarray:
        n = self.dist.shape[0]
        p = self.params
        with np.errstate(divide="ignore"):
            snr = (p.gamma0_db + self.psi[:, None] + self.phi
                   + 10.0 * np.log10(h2)
                   - 10.0 * p.eta * np.log10(np.where(self.dist > 0, self.dist / p.d0_m, 1.0)))
        np.fill_diagonal(snr, -np.inf)
        return snr

    def packet_accessible(self, tx: int, rx: int, rng: np.random.Generator) -> bool:
        """Fresh-fading accessibility for one directed packet (per-packet mode)."""
        i, j = tx - 1, rx - 1
        h2 = rng.exponential(1.0)
        value = snr_db(self.params.gamma0_db, float(self.psi[i]), float(self.phi[i, j]),
                       float(h2), float(self.dist[i, j]), self.params.d0_m, self.params.eta)
        return value > self.params.gamma_min_db

    # -- god-view neighbor sets ---------------------------------------------------

    def heard_set(self, node: int) -> set[int]:
        """Nodes whose transmissions this node can decode."""
        col = self.accessible[:, node - 1]
        return {i + 1 for i in np.flatnonzero(col)}

    def bidirectional_set(self, node: int) -> set[int]:
        both = self.accessible[:, node - 1] & self.accessible[node - 1, :]
        return {i + 1 for i in np.flatnonzero(both)}

    def bidirectional_matrix(self) -> np.ndarray:
        return self.accessible & self.accessible.T

    def write_csv(self, path) -> None:
        n = self.dist.shape[0]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_from", "node_to", "distance_m", "shadow_db",
                             "fading_h2", "psi_from_db", "snr_db", "accessible"])
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    writer.writerow([i + 1, j + 1,
                                     f"{self.dist[i, j]:.3f}", f"{self.phi[i, j]:.4f}",
                                     f"{self.h2[i, j]:.6f}", f"{self.psi[i]:.4f}",
                                     f"{self.snr[i, j]:.4f}", int(self.accessible[i, j])])
