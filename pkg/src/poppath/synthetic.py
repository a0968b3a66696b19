"""Synthetic trajectory generation.

Pipeline: a random connected base graph thinned by reverse-delete to a target
density, a set of pivotal nodes, a Steiner tree over them acting as the
highway backbone, and walkers that prefer highway hops with a fixed
probability.
"""
from __future__ import annotations

import heapq
import json
import math
import random
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx

from .errors import InfeasibleDensity
from .trajectory import TrajectoryDataset, format_dataset

Edge = Tuple[int, int]


def _norm(u, v) -> Edge:
    return (u, v) if u < v else (v, u)


def default_pivotal_count(n: int) -> int:
    return max(2, round(0.25 * n))


@dataclass(frozen=True)
class SyntheticConfig:
    n_nodes: int
    target_density: float
    n_trajectories: int
    n_pivotal: Optional[int] = None
    adherence: float = 0.9
    rng_seed: int = 0
    # Endpoint sampling weight of a pivotal node relative to a regular one.
    pivotal_weight: float = 8.0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if self.n_pivotal is None:
            object.__setattr__(self, "n_pivotal", default_pivotal_count(self.n_nodes))
        if not 1 <= self.n_pivotal <= self.n_nodes:
            raise ValueError("n_pivotal must lie in [1, n_nodes]")
        if not 0.0 <= self.adherence <= 1.0:
            raise ValueError("adherence must lie in [0, 1]")
        if self.n_trajectories < 0:
            raise ValueError("n_trajectories must be non-negative")
        check_density(self.n_nodes, self.target_density)


def check_density(n: int, density: float) -> int:
    """Return the target edge count, raising if it cannot stay connected."""
    total = n * (n - 1) // 2
    if not 0.0 < density <= 1.0:
        raise InfeasibleDensity(f"density {density} outside (0, 1]")
    target = round(density * total)
    # a target within one edge of a spanning tree is rounded up to it
    if target < n - 2:
        raise InfeasibleDensity(
            f"density {density} gives {target} edges; {n - 1} needed to connect {n} nodes"
        )
    return max(target, n - 1)


@dataclass
class HighwayNetwork:
    base: nx.Graph
    pivotal: FrozenSet[int]
    highway: FrozenSet[Edge]

    def is_highway(self, u, v) -> bool:
        return _norm(u, v) in self.highway


def generate_base_graph(n: int, density: float, seed=0) -> nx.Graph:
    """Reverse-delete from the complete graph down to ``round(density * C(n, 2))`` edges.

    Edges are visited in seeded random order and removed only when the graph
    stays connected without them.
    """
    target = check_density(n, density)
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    g = nx.complete_graph(n)
    edges = sorted(g.edges())
    rng.shuffle(edges)
    count = len(edges)
    for u, v in edges:
        if count <= target:
            break
        g.remove_edge(u, v)
        if nx.has_path(g, u, v):
            count -= 1
        else:
            g.add_edge(u, v)
    return g


def pick_pivotal(graph: nx.Graph, k: int, seed=0) -> FrozenSet[int]:
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    return frozenset(rng.sample(sorted(graph.nodes()), k))


def build_steiner_tree(graph: nx.Graph, pivotal: Iterable[int]) -> FrozenSet[Edge]:
    """Metric-closure 2-approximation of the unit-weight Steiner tree.

    Shortest paths between every terminal pair form the closure; its minimum
    spanning tree is expanded back into graph paths, re-spanned to remove
    cycles, and non-terminal leaves are pruned.
    """
    terminals = sorted(set(pivotal))
    if len(terminals) < 2:
        return frozenset()
    closure = nx.Graph()
    paths = {}
    for i, u in enumerate(terminals):
        lengths, routes = nx.single_source_dijkstra(graph, u)
        for v in terminals[i + 1:]:
            closure.add_edge(u, v, weight=lengths[v])
            paths[(u, v)] = routes[v]
    mst = nx.minimum_spanning_tree(closure, algorithm="kruskal")
    expanded = nx.Graph()
    for u, v in sorted(_norm(a, b) for a, b in mst.edges()):
        path = paths[(u, v)]
        nx.add_path(expanded, path)
    tree = nx.minimum_spanning_tree(expanded, algorithm="kruskal")
    keep = set(terminals)
    leaves = [v for v in tree.nodes() if tree.degree(v) == 1 and v not in keep]
    while leaves:
        v = leaves.pop()
        nbrs = list(tree.neighbors(v))
        tree.remove_node(v)
        for w in nbrs:
            if tree.degree(w) == 1 and w not in keep:
                leaves.append(w)
    return frozenset(_norm(a, b) for a, b in tree.edges())


def build_network(config: SyntheticConfig) -> HighwayNetwork:
    rng = random.Random(config.rng_seed)
    base = generate_base_graph(config.n_nodes, config.target_density, rng)
    pivotal = pick_pivotal(base, config.n_pivotal, rng)
    return HighwayNetwork(base, pivotal, build_steiner_tree(base, pivotal))


@dataclass
class WalkStats:
    steps: int = 0
    highway_steps: int = 0
    # steps offering both a usable highway hop and a non-highway shortcut
    choice_steps: int = 0
    # choice steps resolved by taking the highway hop
    choice_highway: int = 0

    def merge(self, other: "WalkStats"):
        self.steps += other.steps
        self.highway_steps += other.highway_steps
        self.choice_steps += other.choice_steps
        self.choice_highway += other.choice_highway

    @property
    def adherence(self) -> float:
        return self.choice_highway / self.choice_steps if self.choice_steps else float("nan")


def _bfs_to(graph: nx.Graph, target, blocked) -> Dict[int, int]:
    dist = {target: 0}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in dist and v not in blocked:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _highway_cost_to(network: HighwayNetwork, target, blocked) -> Dict[int, int]:
    # non-highway hops cost more than any highway-only path can
    big = network.base.number_of_nodes() + 1
    dist = {target: 0}
    heap = [(0, target)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in network.base.neighbors(u):
            if v in blocked:
                continue
            nd = d + (1 if network.is_highway(u, v) else big)
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def synthesize_trajectory(network: HighwayNetwork, s: int, d: int, adherence: float = 0.9,
                          seed=0, stats: Optional[WalkStats] = None) -> Tuple[int, ...]:
    """Walk from ``s`` to ``d`` without revisiting nodes.

    A highway hop is usable when its edge is in the highway tree and leads to
    an unvisited node that can still reach ``d``. With probability
    ``adherence`` the walker takes the usable highway hop that keeps it on
    highways longest. Otherwise it deviates through a random non-highway
    neighbour that strictly shortens the remaining base-graph distance, or,
    when no such shortcut exists, any distance-shortening neighbour.
    """
    if s == d:
        raise ValueError("source equals destination")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    stats = stats if stats is not None else WalkStats()
    path = [s]
    visited = {s}
    u = s
    while u != d:
        dist = _bfs_to(network.base, d, visited)
        nbrs = sorted(v for v in network.base.neighbors(u) if v in dist)
        highway = [v for v in nbrs if network.is_highway(u, v)]
        nearest = min(dist[v] for v in nbrs)
        shorter = [v for v in nbrs if dist[v] == nearest]
        shortcuts = [v for v in shorter if not network.is_highway(u, v)]
        if highway and rng.random() < adherence:
            cost = _highway_cost_to(network, d, visited)
            best = min(cost[v] for v in highway)
            nxt = rng.choice([v for v in highway if cost[v] == best])
        else:
            nxt = rng.choice(shortcuts or shorter)
        on_highway = network.is_highway(u, nxt)
        if highway and shortcuts:
            stats.choice_steps += 1
            stats.choice_highway += on_highway
        stats.highway_steps += on_highway
        stats.steps += 1
        path.append(nxt)
        visited.add(nxt)
        u = nxt
    return tuple(path)


def sample_pairs(network: HighwayNetwork, count: int, weight: float, rng: random.Random) -> List[Edge]:
    nodes = sorted(network.base.nodes())
    weights = [weight if v in network.pivotal else 1.0 for v in nodes]
    pairs = []
    while len(pairs) < count:
        s, d = rng.choices(nodes, weights=weights, k=2)
        if s != d:
            pairs.append((s, d))
    return pairs


@dataclass
class SyntheticStats:
    config: dict
    n_edges: int
    density: float
    n_highway_edges: int
    pivotal: List[int]
    unique_pairs: int
    walk_steps: int
    highway_steps: int
    choice_steps: int
    choice_highway: int
    highway_adherence: float
    highway_edges: List[List[int]] = field(default_factory=list)
    edge_frequency: Dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def generate_dataset(config: SyntheticConfig, name: str = "synthetic"):
    """Build a network and walk ``n_trajectories`` seeded (s, d) pairs.

    Returns ``(dataset, stats, network)``.
    """
    network = build_network(config)
    rng = random.Random(f"{config.rng_seed}:walks")
    pairs = sample_pairs(network, config.n_trajectories, config.pivotal_weight, rng)
    walk = WalkStats()
    trajectories = [synthesize_trajectory(network, s, d, config.adherence, rng, walk)
                    for s, d in pairs]
    usage = Counter()
    for t in trajectories:
        for a, b in zip(t, t[1:]):
            usage[_norm(a, b)] += 1
    n = config.n_nodes
    n_edges = network.base.number_of_edges()
    stats = SyntheticStats(
        config=asdict(config),
        n_edges=n_edges,
        density=n_edges / (n * (n - 1) / 2),
        n_highway_edges=len(network.highway),
        pivotal=sorted(network.pivotal),
        unique_pairs=len(set(pairs)),
        walk_steps=walk.steps,
        highway_steps=walk.highway_steps,
        choice_steps=walk.choice_steps,
        choice_highway=walk.choice_highway,
        highway_adherence=walk.adherence,
        highway_edges=[list(e) for e in sorted(network.highway)],
        edge_frequency={f"{a}-{b}": usage.get((a, b), 0) for a, b in sorted(_norm(*e) for e in network.base.edges())},
    )
    return TrajectoryDataset(tuple(trajectories), name=name), stats, network


def write_dataset(dataset: TrajectoryDataset, stats: SyntheticStats, path) -> Tuple[Path, Path]:
    """Write the trajectory file and its ``.stats.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_dataset(dataset), encoding="utf-8")
    sidecar = path.with_suffix(".stats.json")
    sidecar.write_text(stats.to_json() + "\n", encoding="utf-8")
    return path, sidecar


# Scale presets named after the theme-park and city datasets whose size they
# imitate. Node counts match those datasets; densities and route counts for
# caliadv, edin, toro and melb are picked so the per-query prompt footprint
# grows with POI count.
PRESETS = {
    "disholly": SyntheticConfig(13, 0.4, 901),
    "epcot": SyntheticConfig(17, 0.2, 1248),
    "caliadv": SyntheticConfig(25, 0.25, 1200),
    "edin": SyntheticConfig(28, 0.3, 1500),
    "toro": SyntheticConfig(29, 0.3, 1800),
    "disland": SyntheticConfig(31, 0.4, 2792),
    "melb": SyntheticConfig(88, 0.1, 3000),
}
