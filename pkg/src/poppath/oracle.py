"""Exact, deterministic implementations of the four pipeline agents.

These serve both as the offline backend and as the reference that LLM
replies are checked against.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import EmptyCandidates, NoPathExists, NoSegments, UnrankedPoi
from .trajectory import (
    CandidateSet,
    Query,
    Route,
    Segment,
    TrajectoryDataset,
    TrajectoryGraph,
    extract_ground_truth,
    popularity_score,
    selection_key,
)

DEFAULT_K = 3


@dataclass(frozen=True)
class PoiRanking:
    """POIs from most to least popular. Frequencies are ``None`` when the
    ranking came from a source that only reports order."""

    entries: Tuple[Tuple[int, Optional[int]], ...]

    @classmethod
    def from_order(cls, order: Iterable[int]) -> "PoiRanking":
        seen: Set[int] = set()
        entries = []
        for p in order:
            if p not in seen:
                seen.add(p)
                entries.append((p, None))
        return cls(tuple(entries))

    def order(self) -> List[int]:
        return [p for p, _ in self.entries]

    def frequencies(self) -> Dict[int, Optional[int]]:
        return dict(self.entries)

    def scores(self) -> Dict[int, Optional[int]]:
        """Per-POI weights for path scoring: the frequencies when every entry
        has one, otherwise rank positions counted down from ``len(self)``."""
        if all(f is not None for _, f in self.entries):
            return dict(self.entries)
        if all(f is None for _, f in self.entries):
            n = len(self.entries)
            return {p: n - i for i, (p, _) in enumerate(self.entries)}
        return dict(self.entries)

    def __contains__(self, poi):
        return any(p == poi for p, _ in self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class EdgeRanking:
    entries: Tuple[Tuple[Segment, Optional[int]], ...]

    @classmethod
    def from_order(cls, order: Iterable[Segment]) -> "EdgeRanking":
        seen: Set[Segment] = set()
        entries = []
        for e in order:
            e = (int(e[0]), int(e[1]))
            if e not in seen:
                seen.add(e)
                entries.append((e, None))
        return cls(tuple(entries))

    def order(self) -> List[Segment]:
        return [e for e, _ in self.entries]

    def weights(self) -> Dict[Segment, int]:
        """1-based rank position of every edge."""
        return {e: i for i, (e, _) in enumerate(self.entries, start=1)}

    def __len__(self):
        return len(self.entries)


def discover_paths(dataset: TrajectoryDataset, q: Query) -> CandidateSet:
    return extract_ground_truth(dataset, q)


def rank_pois(graph: TrajectoryGraph) -> PoiRanking:
    items = sorted(graph.poi_freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return PoiRanking(tuple(items))


def rank_edges(graph: TrajectoryGraph) -> EdgeRanking:
    if not graph.segment_freq:
        raise NoSegments("graph has no road segments")
    items = sorted(graph.segment_freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return EdgeRanking(tuple(items))


# k-shortest loopless paths (Yen). Paths are ordered by the total key
# (weight, hop count, POI sequence) so results are unique and deterministic.

def _best_path(adj, source, target, banned_nodes, banned_edges):
    # Label-setting search on (weight, hops, path); extension preserves the
    # order of labels ending at the same node, so the first pop of target wins.
    start = (0, 0, (source,))
    heap = [start]
    done: Set[int] = set()
    while heap:
        w, h, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == target:
            return w, path
        for v, c in adj.get(u, ()):
            if v in done or v in banned_nodes or (u, v) in banned_edges:
                continue
            heapq.heappush(heap, (w + c, h + 1, path + (v,)))
    return None


def k_shortest_paths(adj: Dict[int, Sequence[Tuple[int, int]]], source: int, target: int,
                     k: int) -> List[Tuple[int, Route]]:
    """Up to ``k`` loopless ``source -> target`` paths as ``(weight, path)``.

    ``adj`` maps a node to ``(successor, positive weight)`` pairs.
    """
    first = _best_path(adj, source, target, frozenset(), frozenset())
    if first is None:
        return []
    cost = {}
    for u, nbrs in adj.items():
        for v, c in nbrs:
            cost[(u, v)] = c
    accepted = [first]
    candidates: list = []
    queued: Set[Route] = {first[1]}
    while len(accepted) < k:
        _, last = accepted[-1]
        for i in range(len(last) - 1):
            root = last[: i + 1]
            spur = last[i]
            banned_edges = {
                (p[i], p[i + 1]) for _, p in accepted if len(p) > i + 1 and p[: i + 1] == root
            }
            banned_nodes = frozenset(root[:-1])
            found = _best_path(adj, spur, target, banned_nodes, banned_edges)
            if found is None:
                continue
            path = root[:-1] + found[1]
            if path in queued:
                continue
            queued.add(path)
            weight = sum(cost[(a, b)] for a, b in zip(path, path[1:]))
            heapq.heappush(candidates, (weight, len(path), path))
        if not candidates:
            break
        w, _, path = heapq.heappop(candidates)
        accepted.append((w, path))
    return accepted


def synthesize_paths(graph: TrajectoryGraph, q: Query, edges: EdgeRanking,
                     k: int = DEFAULT_K) -> CandidateSet:
    """Stitch ranked edges into up to ``k`` new routes.

    Only edges that are both ranked and present in ``graph`` are used. Edge
    weight is its 1-based rank, so routes built from popular edges sort first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    adj: Dict[int, list] = {}
    for (a, b), w in edges.weights().items():
        if (a, b) in graph.segment_freq:
            adj.setdefault(a, []).append((b, w))
    paths = k_shortest_paths(adj, q.source, q.destination, k)
    if not paths:
        raise NoPathExists(f"{q.destination} unreachable from {q.source}")
    return CandidateSet.from_routes(p for _, p in paths)


def select_path(candidates: CandidateSet, ranking: PoiRanking) -> List[Tuple[Route, int]]:
    """Score each route by the summed frequency of its distinct POIs and sort.

    Order-only rankings score POIs by rank position instead of frequency.

    Ties fall to occurrence count, then shorter route, then POI sequence,
    mirroring ``canonical_popular_path``.
    """
    if not candidates:
        raise EmptyCandidates("no candidate routes to select from")
    freq = ranking.scores()
    for r in candidates.routes:
        for p in r:
            if freq.get(p) is None:
                raise UnrankedPoi(p)
    scored = [(r, popularity_score(r, freq)) for r in candidates.routes]
    scored.sort(key=lambda rs: selection_key(rs[0], rs[1], candidates.occurrence.get(rs[0], 0)))
    return scored
