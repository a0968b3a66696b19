"""SEARCH-first pipeline with the conditional GENERATE block.

Per query: discovery, then (only when discovery finds nothing) edge ranking
and path synthesis, then POI ranking and path selection. The first ranked
path is the answer.
"""
from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from . import oracle
from .errors import AgentFailure, NoPathExists, NoSegments, PopPathError
from .llm.client import ZERO_USAGE, TokenUsage
from .metrics import MetricReport
from .oracle import DEFAULT_K, EdgeRanking, PoiRanking
from .trajectory import (
    CandidateSet,
    Query,
    Route,
    TrajectoryDataset,
    TrajectoryGraph,
    build_graph,
)

SEARCH = "search"
GENERATE = "generate"
RANK_CONTEXTS = ("full", "filtered")


class Trace:
    """Token usage and flags collected while answering one query."""

    def __init__(self):
        self.usage: Dict[str, TokenUsage] = {}
        self.flags = set()

    def record(self, kind: str, usage: TokenUsage):
        self.usage[kind] = self.usage.get(kind, ZERO_USAGE) + usage

    def flag(self, name: str):
        self.flags.add(name)


class AgentBackend:
    """The five agent behaviours. Subclasses override every method."""

    name = "abstract"
    # True when synthesis is exact, so an empty result means no path exists.
    exact = False

    def discover(self, dataset: TrajectoryDataset, graph: TrajectoryGraph, q: Query,
                 trace: Trace) -> CandidateSet:
        raise NotImplementedError

    def rank_pois(self, dataset: TrajectoryDataset, graph: TrajectoryGraph, trace: Trace,
                  trajectories: Optional[Sequence[Route]] = None) -> PoiRanking:
        raise NotImplementedError

    def rank_edges(self, dataset: TrajectoryDataset, graph: TrajectoryGraph,
                   trace: Trace) -> EdgeRanking:
        raise NotImplementedError

    def synthesize(self, graph: TrajectoryGraph, q: Query, edges: EdgeRanking, k: int,
                   trace: Trace) -> CandidateSet:
        raise NotImplementedError

    def select(self, candidates: CandidateSet, ranking: PoiRanking,
               trace: Trace) -> List[Tuple[Route, Optional[int]]]:
        raise NotImplementedError


class OracleBackend(AgentBackend):
    name = "oracle"
    exact = True

    def discover(self, dataset, graph, q, trace):
        return oracle.discover_paths(dataset, q)

    def rank_pois(self, dataset, graph, trace, trajectories=None):
        if trajectories is not None:
            graph = build_graph(TrajectoryDataset(tuple(trajectories)), graph.directed)
        return oracle.rank_pois(graph)

    def rank_edges(self, dataset, graph, trace):
        return oracle.rank_edges(graph)

    def synthesize(self, graph, q, edges, k, trace):
        return oracle.synthesize_paths(graph, q, edges, k)

    def select(self, candidates, ranking, trace):
        return oracle.select_path(candidates, ranking)


@dataclass(frozen=True)
class QueryResult:
    query: Query
    route: Optional[Route]
    stage: Optional[str]
    candidates: Tuple[Route, ...] = ()
    ranked: Tuple[Tuple[Route, Optional[int]], ...] = ()
    usage: Dict[str, TokenUsage] = field(default_factory=dict)
    latency_ms: float = 0.0
    backend: str = ""
    flags: Tuple[str, ...] = ()
    error: Optional[str] = None
    metrics: Optional[MetricReport] = None

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def total_usage(self) -> TokenUsage:
        total = ZERO_USAGE
        for u in self.usage.values():
            total = total + u
        return total

    def signature(self) -> str:
        """Canonical text of the pipeline outcome, independent of backend,
        token usage and timing."""
        return json.dumps({
            "query": [self.query.source, self.query.destination],
            "stage": self.stage,
            "route": list(self.route) if self.route else None,
            "candidates": [list(r) for r in self.candidates],
            "ranked": [list(r) for r, _ in self.ranked],
            "error": self.error,
        }, sort_keys=True)


class Pipeline:
    """Runs queries against one dataset with one backend.

    The POI ranking is query-independent under ``rank_context="full"``, so it
    is computed once and reused; each query's usage still includes it.
    """

    def __init__(self, backend: AgentBackend, dataset: TrajectoryDataset,
                 graph: Optional[TrajectoryGraph] = None, k: int = DEFAULT_K,
                 rank_context: str = "full"):
        if rank_context not in RANK_CONTEXTS:
            raise ValueError(f"rank_context must be one of {RANK_CONTEXTS}")
        self.backend = backend
        self.dataset = dataset
        self.graph = graph if graph is not None else build_graph(dataset)
        self.k = k
        self.rank_context = rank_context
        self._ranking_lock = threading.Lock()
        self._ranking: Optional[Tuple[PoiRanking, Dict[str, TokenUsage], frozenset]] = None

    def _call(self, kind, fn, *args):
        try:
            return fn(*args)
        except (AgentFailure, NoPathExists):
            raise
        except NoSegments as exc:
            raise NoPathExists(str(exc)) from exc
        except Exception as exc:
            raise AgentFailure(kind, exc) from exc

    def _poi_ranking(self, candidates: CandidateSet, trace: Trace) -> PoiRanking:
        if self.rank_context == "filtered":
            pois = {p for r in candidates.routes for p in r}
            subset = [t for t in self.dataset.trajectories if pois.intersection(t)]
            return self._call("rank_poi", self.backend.rank_pois, self.dataset, self.graph,
                              trace, subset or list(self.dataset.trajectories))
        with self._ranking_lock:
            if self._ranking is None:
                local = Trace()
                ranking = self._call("rank_poi", self.backend.rank_pois, self.dataset,
                                     self.graph, local)
                self._ranking = (ranking, dict(local.usage), frozenset(local.flags))
        ranking, usage, flags = self._ranking
        for kind, u in usage.items():
            trace.record(kind, u)
        trace.flags.update(flags)
        return ranking

    def run_query(self, q: Query) -> QueryResult:
        q.validate(self.dataset)
        start = time.perf_counter()
        trace = Trace()
        b = self.backend
        candidates = self._call("discovery", b.discover, self.dataset, self.graph, q, trace)
        stage = SEARCH
        if not candidates:
            stage = GENERATE
            edges = self._call("rank_edge", b.rank_edges, self.dataset, self.graph, trace)
            candidates = self._call("synthesis", b.synthesize, self.graph, q, edges, self.k, trace)
            if not candidates:
                if b.exact:
                    raise NoPathExists(f"{q.destination} unreachable from {q.source}")
                candidates = oracle.synthesize_paths(self.graph, q, oracle.rank_edges(self.graph),
                                                     self.k)
                trace.flag("fallback")
        ranking = self._poi_ranking(candidates, trace)
        ranked = self._call("selection", b.select, candidates, ranking, trace)
        if not ranked:
            raise AgentFailure("selection", "no ranked paths returned")
        if candidates.flagged:
            trace.flag("hallucinated")
        return QueryResult(
            query=q,
            route=tuple(ranked[0][0]),
            stage=stage,
            candidates=candidates.routes,
            ranked=tuple((tuple(r), s) for r, s in ranked),
            usage=dict(sorted(trace.usage.items())),
            latency_ms=(time.perf_counter() - start) * 1000.0,
            backend=b.name,
            flags=tuple(sorted(trace.flags)),
        )

    def _safe(self, q: Query) -> QueryResult:
        start = time.perf_counter()
        try:
            return self.run_query(q)
        except PopPathError as exc:
            return QueryResult(query=q, route=None, stage=None,
                               latency_ms=(time.perf_counter() - start) * 1000.0,
                               backend=self.backend.name,
                               error=f"{type(exc).__name__}: {exc}")

    def run_batch(self, queries: Sequence[Query], parallelism: int = 1) -> List[QueryResult]:
        """Results in input order; a failing query yields an error result."""
        if not queries:
            return []
        if parallelism <= 1:
            return [self._safe(q) for q in queries]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(self._safe, queries))


def run_query(backend: AgentBackend, dataset: TrajectoryDataset, graph: TrajectoryGraph,
              q: Query, **kwargs) -> QueryResult:
    return Pipeline(backend, dataset, graph, **kwargs).run_query(q)


def run_batch(backend: AgentBackend, dataset: TrajectoryDataset, graph: TrajectoryGraph,
              queries: Sequence[Query], parallelism: int = 1, **kwargs) -> List[QueryResult]:
    return Pipeline(backend, dataset, graph, **kwargs).run_batch(queries, parallelism)


def with_metrics(result: QueryResult, metrics: MetricReport) -> QueryResult:
    return replace(result, metrics=metrics)
