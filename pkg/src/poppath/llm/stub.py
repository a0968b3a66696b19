"""An in-process chat endpoint that answers prompts with oracle results.

It reads the slots back out of each prompt, runs the matching oracle agent
and serialises the answer into the reply schema for that prompt kind. Wired
through :class:`~poppath.llm.client.ChatClient` via an ``httpx`` mock
transport it exercises the whole LLM code path without a network.
"""
from __future__ import annotations

import json

import httpx

from .. import oracle
from ..errors import NoPathExists
from ..trajectory import (
    CandidateSet,
    Query,
    TrajectoryDataset,
    TrajectoryGraph,
    build_graph,
    extract_ground_truth,
    format_route,
)
from .client import TokenUsage, count_tokens_heuristic
from .prompts import read_prompt

NOTES = {
    "discovery": ("identification_process", "Scanned each trajectory for the source and cut at the next destination."),
    "rank_poi": ("calculation_method", "Counted every visit to each POI."),
    "rank_edge": ("extracted_edges", "Collected consecutive POI pairs."),
    "synthesis": ("generation_strategy", "Joined ranked edges, preferring higher-ranked ones."),
    "selection": ("evaluation_method", "Summed POI popularity over each path."),
}


class OracleResponder:
    """Answers rendered prompts. ``dataset`` supplies the visit counts the
    selection prompt does not carry."""

    def __init__(self, dataset: TrajectoryDataset, graph: TrajectoryGraph, k: int = oracle.DEFAULT_K):
        self.dataset = dataset
        self.graph = graph
        self.k = k
        self.calls = 0

    def answer(self, prompt: str) -> str:
        self.calls += 1
        slots = read_prompt(prompt)
        kind = slots["kind"]
        note_key, note = NOTES[kind]
        out = {note_key: note}
        if kind == "discovery":
            ds = TrajectoryDataset(tuple(slots["trajectories"]))
            q = Query(slots["source"], slots["destination"])
            out["candidate_paths"] = [format_route(r) for r in extract_ground_truth(ds, q).routes]
        elif kind == "rank_poi":
            g = build_graph(TrajectoryDataset(tuple(slots["trajectories"])), self.graph.directed)
            out["ranking_analysis"] = "Sorted by visit count, ties by id."
            out["poi_rank"] = ", ".join(str(p) for p in oracle.rank_pois(g).order())
        elif kind == "rank_edge":
            g = build_graph(TrajectoryDataset(tuple(slots["trajectories"])), self.graph.directed)
            out["analysis_method"] = "Sorted by traversal count, ties by endpoints."
            out["edge_rank"] = ", ".join(f"({a}, {b})" for a, b in oracle.rank_edges(g).order())
        elif kind == "synthesis":
            q = Query(slots["source"], slots["destination"])
            edges = oracle.EdgeRanking.from_order(slots["edge_ranking"])
            try:
                paths = oracle.synthesize_paths(self.graph, q, edges, self.k).routes
            except NoPathExists:
                paths = ()
            out["generated_paths"] = [format_route(r) for r in paths]
        elif kind == "selection":
            routes = [tuple(r) for r in slots["candidates"]]
            q = Query(routes[0][0], routes[0][-1])
            seen = extract_ground_truth(self.dataset, q).occurrence
            cands = CandidateSet(tuple(dict.fromkeys(routes)),
                                 {r: seen.get(r, 0) for r in routes})
            ranked = oracle.select_path(cands, oracle.rank_pois(self.graph))
            out["ranked_paths"] = [format_route(r) for r, _ in ranked]
        return json.dumps(out, indent=2)

    def invoke(self, prompt: str):
        """Direct endpoint interface (no HTTP); usage is the heuristic count."""
        text = self.answer(prompt)
        return text, TokenUsage(count_tokens_heuristic(prompt), count_tokens_heuristic(text), "heuristic")


def oracle_transport(responder: OracleResponder) -> httpx.MockTransport:
    """Chat-completion wire protocol around ``responder``; omits ``usage``."""

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        prompt = body["messages"][-1]["content"]
        text = responder.answer(prompt)
        return httpx.Response(200, json={
            "id": f"stub-{responder.calls}",
            "object": "chat.completion",
            "model": body.get("model"),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text},
                         "finish_reason": "stop"}],
        })

    return httpx.MockTransport(handler)
