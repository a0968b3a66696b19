"""Parsing and validating structured agent replies."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

from ..errors import UnparseableReply
from ..trajectory import CandidateSet, Query, Route, TrajectoryGraph, collapse_repeats
from .prompts import RESULT_FIELD

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.S)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")
_INT = re.compile(r"\d+")
_EDGE = re.compile(r"(\d+)\s*(?:,|->|-)\s*(\d+)")
_PATH_KEYS = ("path", "route", "candidate", "pois")


@dataclass(frozen=True)
class AgentReply:
    kind: str
    raw: str
    fields: dict
    paths: Tuple[Route, ...] = ()
    poi_rank: Tuple[int, ...] = ()
    edge_rank: Tuple[Tuple[int, int], ...] = ()
    repair_applied: bool = False


def _strip_fences(text: str) -> str:
    m = _FENCE.search(text)
    return m.group(1) if m else text


def _object_span(text: str) -> Optional[str]:
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        return None
    return text[start:end + 1]


def _load_object(raw: str) -> Tuple[dict, bool]:
    """Pull the first JSON object out of ``raw``; returns ``(obj, repaired)``."""
    unfenced = _strip_fences(raw)
    fenced = unfenced is not raw
    span = _object_span(unfenced)
    if span is None:
        raise UnparseableReply(raw)
    try:
        obj = json.loads(span)
        repaired = False
    except json.JSONDecodeError:
        fixed = _TRAILING_COMMA.sub(r"\1", span)
        fixed = fixed.replace("“", '"').replace("”", '"')
        try:
            obj = json.loads(fixed)
        except json.JSONDecodeError:
            raise UnparseableReply(raw) from None
        repaired = True
    if not isinstance(obj, dict):
        raise UnparseableReply(raw)
    return obj, repaired or fenced


def _route_from(value: Any) -> Optional[Route]:
    if isinstance(value, dict):
        for key in _PATH_KEYS:
            if key in value:
                return _route_from(value[key])
        return None
    if isinstance(value, (list, tuple)):
        if value and all(isinstance(x, int) or (isinstance(x, str) and x.strip().isdigit())
                         for x in value):
            return collapse_repeats(int(x) for x in value)
        return None
    if isinstance(value, str):
        ids = _INT.findall(value)
        return collapse_repeats(int(x) for x in ids) if ids else None
    if isinstance(value, int):
        return (value,)
    return None


def parse_paths(value: Any) -> List[Route]:
    """Routes from a list of strings/int-lists/objects, or from one string
    holding several ``a -> b -> c`` routes separated by newlines, ``;`` or ``,``."""
    if value is None:
        return []
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return []
        if text.startswith("[") and text.endswith("]"):
            try:
                return parse_paths(json.loads(text))
            except json.JSONDecodeError:
                pass
        if "->" not in text:
            # a bare id list is one route
            route = _route_from(text)
            return [route] if route else []
        chunks = re.split(r"[\n;|]+", text)
        routes = []
        for chunk in chunks:
            pieces = re.split(r"(?<=\d)\s*,\s*(?=\d+\s*->)", chunk) if "," in chunk else [chunk]
            for piece in pieces:
                if "->" in piece:
                    routes.append(_route_from(piece.split(":", 1)[-1] if ":" in piece else piece))
        return [r for r in routes if r]
    if isinstance(value, dict):
        route = _route_from(value)
        return [route] if route else []
    if isinstance(value, (list, tuple)):
        if value and all(isinstance(x, int) for x in value):
            return [collapse_repeats(value)]
        routes = []
        for item in value:
            if isinstance(item, str):
                routes.extend(parse_paths(item))
            else:
                route = _route_from(item)
                if route:
                    routes.append(route)
        return routes
    return []


def parse_ranking(value: Any) -> List[int]:
    if isinstance(value, (list, tuple)):
        out = []
        for item in value:
            if isinstance(item, dict):
                item = item.get("poi", item.get("id"))
            out.extend(parse_ranking(item))
        return out
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        return [int(x) for x in _INT.findall(value)]
    return []


def parse_edges(value: Any) -> List[Tuple[int, int]]:
    if isinstance(value, (list, tuple)):
        if len(value) == 2 and all(isinstance(x, int) for x in value):
            return [(value[0], value[1])]
        out = []
        for item in value:
            out.extend(parse_edges(item))
        return out
    if isinstance(value, dict):
        for a, b in (("from", "to"), ("source", "target"), ("node1", "node2")):
            if a in value and b in value:
                return [(int(value[a]), int(value[b]))]
        edge = value.get("edge")
        return parse_edges(edge) if edge is not None else []
    if isinstance(value, str):
        return [(int(a), int(b)) for a, b in _EDGE.findall(value)]
    return []


def parse_reply(kind: str, raw: str) -> AgentReply:
    if not raw or not raw.strip():
        raise UnparseableReply(raw or "")
    obj, repaired = _load_object(raw)
    key = RESULT_FIELD[kind]
    if key not in obj:
        raise UnparseableReply(raw)
    value = obj[key]
    if kind == "rank_poi":
        ranking = parse_ranking(value)
        if not ranking:
            raise UnparseableReply(raw)
        return AgentReply(kind, raw, obj, poi_rank=tuple(ranking), repair_applied=repaired)
    if kind == "rank_edge":
        edges = parse_edges(value)
        if not edges:
            raise UnparseableReply(raw)
        return AgentReply(kind, raw, obj, edge_rank=tuple(edges), repair_applied=repaired)
    return AgentReply(kind, raw, obj, paths=tuple(parse_paths(value)), repair_applied=repaired)


def validate_paths(reply: AgentReply, graph: TrajectoryGraph, q: Query) -> CandidateSet:
    """Keep routes that start at the source and end at the destination.

    Routes using a segment outside the graph are kept but flagged, so the
    Traversability metric still sees them.
    """
    kept = []
    flagged = []
    for route in reply.paths:
        if len(route) < 2 or route[0] != q.source or route[-1] != q.destination:
            continue
        kept.append(route)
        if any((a, b) not in graph.segment_freq for a, b in zip(route, route[1:])):
            flagged.append(route)
    return CandidateSet.from_routes(kept, flagged)
