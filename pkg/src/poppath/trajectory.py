"""Trajectory data model: POIs, trajectories, the trajectory-induced graph,
queries, candidate sets and ground-truth extraction.

Routes and trajectories are plain tuples of integer POI ids.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import EmptyCandidates, EmptyDataset, InvalidQuery, MalformedLine

Route = Tuple[int, ...]
Segment = Tuple[int, int]

_INT = re.compile(r"\d+")
_SPLIT_ALT = re.compile(r"[,\s]+")


def collapse_repeats(pois: Iterable[int]) -> Route:
    out = []
    for p in pois:
        if not out or out[-1] != p:
            out.append(p)
    return tuple(out)


@dataclass(frozen=True)
class TrajectoryDataset:
    trajectories: Tuple[Route, ...]
    name: str = "dataset"

    def __post_init__(self):
        trajs = tuple(collapse_repeats(t) for t in self.trajectories)
        if any(len(t) == 0 for t in trajs):
            raise ValueError("trajectories must contain at least one POI")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self):
        return len(self.trajectories)

    @cached_property
    def poi_universe(self) -> FrozenSet[int]:
        return frozenset(p for t in self.trajectories for p in t)

    @cached_property
    def poi_index(self) -> Tuple[int, ...]:
        """Sorted POI ids; position is the dense index used by the kernels."""
        return tuple(sorted(self.poi_universe))

    @cached_property
    def dense_of(self) -> Dict[int, int]:
        return {p: i for i, p in enumerate(self.poi_index)}

    @cached_property
    def flat(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(pois, offsets)`` int64 arrays holding every trajectory back to back."""
        lengths = [len(t) for t in self.trajectories]
        offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        pois = np.fromiter((p for t in self.trajectories for p in t),
                           dtype=np.int64, count=int(offsets[-1]))
        return pois, offsets

    @cached_property
    def dense_flat(self) -> np.ndarray:
        pois, _ = self.flat
        lookup = self.dense_of
        return np.fromiter((lookup[p] for p in pois.tolist()), dtype=np.int64, count=len(pois))


def parse_dataset(text: str, name: str = "dataset") -> TrajectoryDataset:
    """Parse the trajectory text format.

    One trajectory per line, POI ids separated by ``->``. Blank lines and
    ``#`` comments are skipped. Lines without ``->`` may use commas or
    whitespace instead. Consecutive duplicate POIs are collapsed.
    """
    trajectories = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "->" in line:
            tokens = [tok.strip() for tok in line.split("->")]
        else:
            tokens = [tok for tok in _SPLIT_ALT.split(line) if tok]
        if not tokens or any(not tok.isdigit() for tok in tokens):
            raise MalformedLine(line_no, raw)
        trajectories.append(collapse_repeats(int(tok) for tok in tokens))
    if not trajectories:
        raise EmptyDataset("no trajectories in input")
    return TrajectoryDataset(tuple(trajectories), name=name)


def load_dataset(path) -> TrajectoryDataset:
    from pathlib import Path

    path = Path(path)
    return parse_dataset(path.read_text(encoding="utf-8"), name=path.stem)


def format_route(route: Sequence[int]) -> str:
    return " -> ".join(str(p) for p in route)


def format_dataset(dataset: TrajectoryDataset) -> str:
    return "".join(format_route(t) + "\n" for t in dataset.trajectories)


@dataclass(frozen=True)
class TrajectoryGraph:
    """Directed road-segment set derived from the trajectories alone."""

    segment_freq: Dict[Segment, int]
    poi_freq: Dict[int, int]
    directed: bool = True

    @property
    def segments(self) -> FrozenSet[Segment]:
        return frozenset(self.segment_freq)

    @property
    def pois(self) -> FrozenSet[int]:
        return frozenset(self.poi_freq)

    def has_segment(self, a: int, b: int) -> bool:
        return (a, b) in self.segment_freq

    @cached_property
    def successors(self) -> Dict[int, Tuple[int, ...]]:
        adj: Dict[int, list] = {p: [] for p in self.poi_freq}
        for a, b in sorted(self.segment_freq):
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, [])
        return {p: tuple(vs) for p, vs in adj.items()}

    def reachable_from(self, source: int) -> FrozenSet[int]:
        succ = self.successors
        seen = {source}
        stack = [source]
        while stack:
            u = stack.pop()
            for v in succ.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return frozenset(seen)


def build_graph(dataset: TrajectoryDataset, directed: bool = True) -> TrajectoryGraph:
    if len(dataset) == 0:
        raise EmptyDataset("cannot build a graph from an empty dataset")
    index = dataset.poi_index
    _, offsets = dataset.flat
    seg, poi = kernels.pair_counts(dataset.dense_flat, offsets, len(index))
    rows, cols = np.nonzero(seg)
    segment_freq: Dict[Segment, int] = {}
    for i, j in zip(rows.tolist(), cols.tolist()):
        segment_freq[(index[i], index[j])] = int(seg[i, j])
    if not directed:
        merged: Dict[Segment, int] = {}
        for (a, b), c in segment_freq.items():
            key = (a, b) if a < b else (b, a)
            merged[key] = merged.get(key, 0) + c
        segment_freq = {}
        for (a, b), c in merged.items():
            segment_freq[(a, b)] = c
            segment_freq[(b, a)] = c
    poi_freq = {index[i]: int(c) for i, c in enumerate(poi.tolist())}
    return TrajectoryGraph(segment_freq=segment_freq, poi_freq=poi_freq, directed=directed)


@dataclass(frozen=True)
class Query:
    source: int
    destination: int

    def __post_init__(self):
        if self.source == self.destination:
            raise InvalidQuery(f"source equals destination ({self.source})")

    def validate(self, dataset: TrajectoryDataset) -> "Query":
        missing = {self.source, self.destination} - dataset.poi_universe
        if missing:
            raise InvalidQuery(f"POIs not in dataset: {sorted(missing)}")
        return self

    def __iter__(self):
        return iter((self.source, self.destination))


@dataclass(frozen=True)
class CandidateSet:
    """Unique routes for one query, in first-seen order.

    ``occurrence`` counts how many extraction windows produced each route.
    ``flagged`` marks routes using a segment absent from the graph.
    """

    routes: Tuple[Route, ...] = ()
    occurrence: Dict[Route, int] = field(default_factory=dict)
    flagged: FrozenSet[Route] = frozenset()

    def __len__(self):
        return len(self.routes)

    def __bool__(self):
        return bool(self.routes)

    def __iter__(self):
        return iter(self.routes)

    @classmethod
    def from_routes(cls, routes: Iterable[Sequence[int]], flagged: Iterable[Route] = ()) -> "CandidateSet":
        counts: Counter = Counter()
        order = []
        for r in routes:
            r = tuple(r)
            if r not in counts:
                order.append(r)
            counts[r] += 1
        flagged = frozenset(tuple(r) for r in flagged) & frozenset(order)
        return cls(tuple(order), dict(counts), flagged)


def extract_ground_truth(dataset: TrajectoryDataset, q: Query) -> CandidateSet:
    """Every slice that starts at an occurrence of the source and stops at
    the first destination after it, merged with occurrence counts."""
    flat, offsets = dataset.flat
    seq = None
    routes = []
    for start, stop in kernels.find_windows(flat, offsets, q.source, q.destination):
        if seq is None:
            seq = flat.tolist()
        routes.append(tuple(seq[start:stop]))
    return CandidateSet.from_routes(routes)


def popularity_score(route: Sequence[int], freq) -> int:
    """Sum of POI frequencies over the route's distinct POIs."""
    return sum(freq.get(p, 0) for p in set(route))


def selection_key(route: Route, score, occurrence: int):
    """Sort key shared by ground-truth selection and the selection agent."""
    return (-score, -occurrence, len(route), route)


def canonical_popular_path(candidates: CandidateSet, graph: TrajectoryGraph) -> Route:
    if not candidates:
        raise EmptyCandidates("no candidate routes")
    return min(
        candidates.routes,
        key=lambda r: selection_key(r, popularity_score(r, graph.poi_freq),
                                    candidates.occurrence.get(r, 0)),
    )


def ground_truth_route(dataset: TrajectoryDataset, graph: TrajectoryGraph, q: Query) -> Optional[Route]:
    cands = extract_ground_truth(dataset, q)
    return canonical_popular_path(cands, graph) if cands else None
