"""Topologies, initial batteries, traffic and random-walk mobility."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

# neighbouring rings/columns sit this fraction of the radio range apart
SPACING = 0.9
RANGE_EPS = 1e-9


class DisconnectedTopology(RuntimeError):
    pass


def adjacency(positions: np.ndarray, radio_range: float) -> list:
    """Sorted neighbour lists for every node under a unit-disk radio model."""
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    linked = d2 <= (radio_range + RANGE_EPS) ** 2
    np.fill_diagonal(linked, False)
    return [np.flatnonzero(row).tolist() for row in linked]


def hop_distances(adj: list, src: int) -> list:
    """BFS hop counts from ``src``; unreachable nodes get ``math.inf``."""
    dist = [math.inf] * len(adj)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] == math.inf:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass
class Topology:
    kind: str
    positions: np.ndarray
    sink: int
    radio_range: float
    diameter_hops: int = 0
    articulation: tuple = ()
    adj: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if not self.adj:
            self.adj = adjacency(self.positions, self.radio_range)
        n = len(self.positions)
        all_d = [hop_distances(self.adj, s) for s in range(n)]
        finite = [d for row in all_d for d in row if d != math.inf]
        self.connected = all(d != math.inf for row in all_d for d in row)
        self.diameter_hops = int(max(finite, default=0))
        self.sink_hops = all_d[self.sink] if n else []
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from((u, v) for u, nbrs in enumerate(self.adj) for v in nbrs if u < v)
        self.articulation = tuple(sorted(nx.articulation_points(g)))

    @classmethod
    def from_adjacency(cls, adj, sink: int = 0, kind: str = "graph") -> "Topology":
        """Abstract graph with nodes laid out on a circle; the positions are cosmetic.

        Only meaningful for static runs, since mobility recomputes links from positions.
        """
        n = len(adj)
        angles = 2 * math.pi * np.arange(n) / max(n, 1)
        pos = np.column_stack((np.cos(angles), np.sin(angles))) if n else np.zeros((0, 2))
        links = [sorted(set(nbrs)) for nbrs in adj]
        for u, nbrs in enumerate(links):
            for v in nbrs:
                if u == v or u not in links[v]:
                    raise ValueError(f"adjacency must be symmetric without self loops ({u}, {v})")
        return cls(kind, pos, sink=sink, radio_range=1.0, adj=links)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def sink_eccentricity(self) -> int:
        return int(max(self.sink_hops, default=0))


def build_symmetrical(rings: int = 5, per_ring: int = 6, radio_range: float = 100.0) -> Topology:
    """Sink at the origin, ``per_ring`` nodes on each ring at ``r * 0.9 * range``, spokes aligned."""
    pts = [(0.0, 0.0)]
    for r in range(1, rings + 1):
        radius = r * SPACING * radio_range
        for k in range(per_ring):
            a = 2 * math.pi * k / per_ring
            pts.append((radius * math.cos(a), radius * math.sin(a)))
    return Topology("symmetrical", np.array(pts), sink=0, radio_range=radio_range)


def build_asymmetrical(depth: int = 9, width: int = 3, radio_range: float = 100.0) -> Topology:
    """Sink on the far left, ``depth`` columns of ``width`` nodes to its right.

    Columns are ``0.9 * range`` apart and each column is compact enough that it
    hears the whole of its neighbouring columns but nothing two columns away.
    """
    row_gap = 0.4 * radio_range / max(width - 1, 1)
    pts = [(0.0, 0.0)]
    for c in range(1, depth + 1):
        for j in range(width):
            pts.append((c * SPACING * radio_range, (j - (width - 1) / 2) * row_gap))
    return Topology("asymmetrical", np.array(pts), sink=0, radio_range=radio_range)


def build_random(
    n: int = 30,
    area: float = 450.0,
    radio_range: float = 100.0,
    seed: int = 0,
    max_hops: int = 11,
    retries: int = 2000,
) -> Topology:
    """Uniform placement in an ``area`` x ``area`` square, sink nearest the centroid.

    Redraws until the graph is connected and no node is more than ``max_hops`` from the sink.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x70B0]))
    for _ in range(retries):
        pts = rng.uniform(0.0, area, size=(n, 2))
        centre = pts.mean(axis=0)
        sink = int(np.argmin(((pts - centre) ** 2).sum(axis=1)))
        pts[[0, sink]] = pts[[sink, 0]]
        topo = Topology("random", pts, sink=0, radio_range=radio_range)
        if topo.connected and topo.sink_eccentricity <= max_hops:
            return topo
    raise DisconnectedTopology(f"no connected layout of {n} nodes in {retries} tries")


def build_topology(cfg: dict, seed: int) -> Topology:
    kind = cfg["topology.kind"]
    r = cfg["topology.range"]
    if kind == "symmetrical":
        topo = build_symmetrical(cfg["topology.rings"], cfg["topology.per_ring"], r)
    elif kind == "asymmetrical":
        topo = build_asymmetrical(cfg["topology.depth"], cfg["topology.width"], r)
    else:
        tseed = cfg["topology.seed"] if cfg["topology.seed"] is not None else seed
        topo = build_random(cfg["topology.n"], cfg["topology.area"], r, tseed, cfg["topology.max_hops"])
    if not topo.connected:
        raise DisconnectedTopology(f"{kind} topology is not connected")
    return topo


@dataclass(frozen=True)
class RandomWalkSpec:
    speed: float = 1.0
    update_interval: float = 1.0
    bounds: tuple = (0.0, 0.0, 100.0, 100.0)
    start_after: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    initial_battery_j: tuple
    duration: float
    mobility: Optional[RandomWalkSpec] = None
    traffic_min: float = 15.0
    traffic_max: float = 50.0

    def __post_init__(self):
        if any(b <= 0 for b in self.initial_battery_j):
            raise ValueError("battery values must be positive")
        if (self.mobility is not None) != (self.kind == "mobility"):
            raise ValueError("mobility spec must be present exactly for mobility scenarios")


BATTERY_DEFAULTS = {
    "steady_state": (60.0, 100.0),
    "mobility": (60.0, 100.0),
    "end_of_life": (1.0, 5.0),
}


def assign_batteries(kind, n, capacity_j, rng, *, min_pct=None, max_pct=None, values=None, sink=None, sink_pct=None):
    """Initial charge per node in Joules, heterogeneous by design."""
    if values is not None:
        if len(values) != n:
            raise ValueError(f"need {n} battery values, got {len(values)}")
        return [float(v) for v in values]
    lo, hi = BATTERY_DEFAULTS[kind]
    lo = lo if min_pct is None else min_pct
    hi = hi if max_pct is None else max_pct
    if not (0 < lo <= hi <= 100):
        raise ValueError("battery percentages must satisfy 0 < min <= max <= 100")
    pct = rng.uniform(lo, hi, size=n)
    out = [float(capacity_j * p / 100.0) for p in pct]
    if sink is not None and sink_pct is not None:
        out[sink] = capacity_j * sink_pct / 100.0
    return out


def traffic_next(now: float, rng, lo: float = 15.0, hi: float = 50.0) -> float:
    return now + float(rng.uniform(lo, hi))


def walk_bounds(positions: np.ndarray, margin: float) -> tuple:
    lo = positions.min(axis=0) - margin
    hi = positions.max(axis=0) + margin
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def mobility_step(positions: np.ndarray, spec: RandomWalkSpec, rng, sink: int = 0, now: float = None) -> np.ndarray:
    """One random-walk update: every non-sink node takes a step in a fresh heading."""
    pos = np.array(positions, dtype=float)
    if now is not None and now < spec.start_after:
        return pos
    heading = rng.uniform(0.0, 2 * math.pi, size=len(pos))
    step = spec.speed * spec.update_interval
    moved = pos + step * np.column_stack((np.cos(heading), np.sin(heading)))
    x0, y0, x1, y1 = spec.bounds
    for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        col = moved[:, axis]
        col = np.where(col < lo, 2 * lo - col, col)
        col = np.where(col > hi, 2 * hi - col, col)
        moved[:, axis] = np.clip(col, lo, hi)
    moved[sink] = pos[sink]
    return moved


def build_scenario(cfg: dict, topo: Topology, rng_stream) -> ScenarioSpec:
    kind = cfg["scenario.kind"]
    batteries = assign_batteries(
        kind,
        topo.n,
        cfg["battery.capacity_j"],
        rng_stream,
        min_pct=cfg["battery.min_pct"],
        max_pct=cfg["battery.max_pct"],
        values=cfg["battery.values"],
        sink=topo.sink,
        sink_pct=cfg["battery.sink_pct"],
    )
    mobility = None
    if kind == "mobility":
        start = cfg["mobility.start_after"]
        if start is None:
            # start-up phase: the cost flood has crossed the network, plus 5 s
            hop_delay = cfg["energy.hop_delay"] or 5e-3
            start = topo.sink_eccentricity * hop_delay + 5.0
        mobility = RandomWalkSpec(
            speed=cfg["mobility.speed"],
            update_interval=cfg["mobility.update_interval"],
            bounds=walk_bounds(topo.positions, topo.radio_range / 2),
            start_after=start,
        )
    return ScenarioSpec(
        kind=kind,
        initial_battery_j=tuple(batteries),
        duration=cfg["scenario.duration"],
        mobility=mobility,
        traffic_min=cfg["traffic.min"],
        traffic_max=cfg["traffic.max"],
    )
