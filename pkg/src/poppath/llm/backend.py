"""Agent backend that asks a chat model for every agent step."""
from __future__ import annotations

from typing import Optional, Sequence

from ..errors import AgentFailure, EndpointError, UnparseableReply
from ..oracle import EdgeRanking, PoiRanking
from ..orchestrator import AgentBackend, Trace
from ..trajectory import CandidateSet, Query
from .parsing import AgentReply, parse_reply, validate_paths
from .prompts import RETRY_SUFFIX, render_prompt


class LLMBackend(AgentBackend):
    """``endpoint`` is anything with ``invoke(prompt) -> (text, TokenUsage)``,
    normally a :class:`~poppath.llm.client.ChatClient`."""

    exact = False

    def __init__(self, endpoint, name: str = "llm", view: str = "compact"):
        self.endpoint = endpoint
        self.name = name
        self.view = view

    def _ask(self, kind: str, prompt: str, trace: Trace) -> AgentReply:
        try:
            raw, usage = self.endpoint.invoke(prompt)
            trace.record(kind, usage)
            try:
                reply = parse_reply(kind, raw)
            except UnparseableReply:
                # one bounded re-prompt before giving up
                raw, usage = self.endpoint.invoke(prompt + RETRY_SUFFIX)
                trace.record(kind, usage)
                reply = parse_reply(kind, raw)
                trace.flag("repaired")
        except (EndpointError, UnparseableReply) as exc:
            raise AgentFailure(kind, exc) from exc
        if reply.repair_applied:
            trace.flag("repaired")
        return reply

    def discover(self, dataset, graph, q: Query, trace):
        prompt = render_prompt("discovery", dataset, q, view=self.view)
        return validate_paths(self._ask("discovery", prompt, trace), graph, q)

    def rank_pois(self, dataset, graph, trace, trajectories: Optional[Sequence] = None):
        prompt = render_prompt("rank_poi", dataset, view=self.view, trajectories=trajectories)
        return PoiRanking.from_order(self._ask("rank_poi", prompt, trace).poi_rank)

    def rank_edges(self, dataset, graph, trace):
        prompt = render_prompt("rank_edge", dataset, view=self.view)
        return EdgeRanking.from_order(self._ask("rank_edge", prompt, trace).edge_rank)

    def synthesize(self, graph, q, edges, k, trace):
        prompt = render_prompt("synthesis", query=q, edge_ranking=edges)
        return validate_paths(self._ask("synthesis", prompt, trace), graph, q)

    def select(self, candidates: CandidateSet, ranking, trace):
        prompt = render_prompt("selection", candidates=candidates, poi_ranking=ranking)
        reply = self._ask("selection", prompt, trace)
        members = set(candidates.routes)
        ranked = []
        seen = set()
        for route in reply.paths:
            if route in members and route not in seen:
                seen.add(route)
                ranked.append((route, None))
        if not ranked:
            raise AgentFailure("selection", "reply ranked none of the candidate paths")
        return ranked
