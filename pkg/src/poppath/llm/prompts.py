"""Prompt templates for the four agents (five prompt kinds).

Rendering is deterministic. Trajectories are written one per line with
``->`` separators. In the default ``compact`` view each distinct trajectory
appears once, in first-seen order, suffixed with ``(xN)`` when it occurs N > 1
times; the ``full`` view repeats every line.
"""
from __future__ import annotations

import re
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import MissingSlot
from ..trajectory import CandidateSet, Route, TrajectoryDataset, format_route

KINDS = ("discovery", "rank_poi", "rank_edge", "synthesis", "selection")

SEPARATOR = "---------------"
FORMAT_LINE = "Important: Your response must follow the following JSON format:"

HEADERS = {
    "discovery": (
        "You are given a list of historical trajectories and a source-destination pair. "
        "Your task is to extract all candidate paths that connect the source to the destination."
    ),
    "rank_poi": (
        "You are given historical trajectory data. "
        "Your task is to analyze and rank all POIs based on their popularity."
    ),
    "rank_edge": (
        "You are given historical trajectory data. "
        "Your task is to analyze and rank all POI Pairs (Edges) based on their popularity."
    ),
    "synthesis": (
        "You are given edge popularity rankings. For a source-destination pair with no "
        "existing path in historical data, generate candidate paths."
    ),
    "selection": (
        "You are given candidate paths extracted from historical data and POI popularity "
        "rankings. Your task is to rank these paths based on their popularity."
    ),
}

SCHEMAS = {
    "discovery": [
        ("identification_process", "Explain how we can identify existing paths from historical "
                                   "data that contain both source and destination."),
        ("candidate_paths", "Retrieve all possible routes connecting the source and destination "
                            "from the historical data."),
    ],
    "rank_poi": [
        ("calculation_method", "Step by step explain how the popularity of various points of "
                               "interest (POIs) can be analyzed using historical trajectory data."),
        ("ranking_analysis", "Analyze the ranking the POIs based on their frequency of visits or "
                             "interactions in the dataset and provide the ranking."),
        ("poi_rank", "Give out the POIs in the ascending order of rank."),
    ],
    "rank_edge": [
        ("extracted_edges", "Extract edges that can be found from the trajectory data."),
        ("analysis_method", "How to analyze edge frequency and find the most popular edges."),
        ("edge_rank", "Give out the edges in (node1, node2) format in descending order of "
                      "their popularity."),
    ],
    "synthesis": [
        ("generation_strategy", "Explain the strategy for combining popular edges to create "
                                "realistic paths."),
        ("generated_paths", "Generate possible path candidates using edge popularity rankings."),
    ],
    "selection": [
        ("evaluation_method", "Think step by step on how to evaluate paths using POI popularity "
                              "rankings and retrieve the best path."),
        ("ranked_paths", "Rank all candidate paths based on the popularity of POIs they traverse."),
    ],
}

# reply field holding the payload for each kind
RESULT_FIELD = {kind: SCHEMAS[kind][-1][0] for kind in KINDS}

REQUIRED_SLOTS = {
    "discovery": ("trajectories", "source", "destination"),
    "rank_poi": ("trajectories",),
    "rank_edge": ("trajectories",),
    "synthesis": ("source", "destination", "edge_ranking"),
    "selection": ("candidates", "poi_ranking"),
}

RETRY_SUFFIX = "\n\nYour previous reply was not valid JSON. Reply with valid JSON only."


def render_trajectories(trajectories: Sequence[Route], view: str = "compact") -> List[str]:
    if view == "full":
        return [format_route(t) for t in trajectories]
    if view != "compact":
        raise ValueError(f"unknown trajectory view {view!r}")
    counts = Counter(trajectories)
    lines = []
    seen = set()
    for t in trajectories:
        if t in seen:
            continue
        seen.add(t)
        n = counts[t]
        lines.append(format_route(t) + (f" (x{n})" if n > 1 else ""))
    return lines


def _schema_block(kind: str) -> str:
    body = ",\n".join(f'  "{key}": "{desc}"' for key, desc in SCHEMAS[kind])
    return "{\n" + body + "\n}"


def render_prompt(kind: str, dataset: Optional[TrajectoryDataset] = None, query=None,
                  edge_ranking=None, poi_ranking=None, candidates=None,
                  view: str = "compact", trajectories: Optional[Sequence[Route]] = None) -> str:
    """Render the prompt for ``kind``.

    ``trajectories`` overrides the dataset's own list (used for filtered
    ranking context). Rankings may be ranking objects or plain sequences.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown prompt kind {kind!r}")
    if trajectories is None and dataset is not None:
        trajectories = dataset.trajectories
    slots = {
        "trajectories": trajectories,
        "source": None if query is None else query.source,
        "destination": None if query is None else query.destination,
        "edge_ranking": edge_ranking,
        "poi_ranking": poi_ranking,
        "candidates": candidates,
    }
    for slot in REQUIRED_SLOTS[kind]:
        if slots[slot] is None:
            raise MissingSlot(kind, slot)

    parts = [HEADERS[kind], ""]
    if "trajectories" in REQUIRED_SLOTS[kind]:
        parts.append("Historical Trajectories:")
        parts.extend(render_trajectories(trajectories, view))
        parts.append("")
    if kind in ("discovery", "synthesis"):
        parts.append(f"Source: {query.source}")
        parts.append(f"Destination: {query.destination}")
        parts.append("")
    if kind == "synthesis":
        order = edge_ranking.order() if hasattr(edge_ranking, "order") else list(edge_ranking)
        parts.append("Edge Popularity Ranking: " + ", ".join(f"({a},{b})" for a, b in order))
        parts.append("")
    if kind == "selection":
        routes = candidates.routes if isinstance(candidates, CandidateSet) else candidates
        parts.append("Candidate Paths:")
        parts.extend(format_route(r) for r in routes)
        parts.append("")
        order = poi_ranking.order() if hasattr(poi_ranking, "order") else list(poi_ranking)
        parts.append("POI Popularity Ranking: " + ", ".join(str(p) for p in order))
        parts.append("")
    parts.extend([SEPARATOR, "", FORMAT_LINE, "", _schema_block(kind), ""])
    return "\n".join(parts)


# Reading prompts back. The stub endpoint uses this to answer prompts the
# same way the oracle would.

_ROUTE_LINE = re.compile(r"^\s*(\d+(?:\s*->\s*\d+)*)\s*(?:\(x(\d+)\))?\s*$")
_EDGE = re.compile(r"\((\d+)\s*,\s*(\d+)\)")


def prompt_kind(prompt: str) -> str:
    for kind, header in HEADERS.items():
        if prompt.startswith(header):
            return kind
    raise ValueError("prompt does not match any known template")


def _section(lines: List[str], title: str) -> List[str]:
    try:
        start = lines.index(title) + 1
    except ValueError:
        return []
    out = []
    for line in lines[start:]:
        if not line.strip():
            break
        out.append(line)
    return out


def _value(lines: List[str], label: str) -> Optional[str]:
    for line in lines:
        if line.startswith(label):
            return line[len(label):].strip()
    return None


def read_prompt(prompt: str) -> Dict[str, object]:
    """Recover the slots a prompt was rendered from."""
    kind = prompt_kind(prompt)
    lines = prompt.split(SEPARATOR)[0].splitlines()
    out: Dict[str, object] = {"kind": kind}
    traj_lines = _section(lines, "Historical Trajectories:")
    if traj_lines:
        trajectories: List[Route] = []
        for line in traj_lines:
            m = _ROUTE_LINE.match(line)
            if m is None:
                raise ValueError(f"unreadable trajectory line {line!r}")
            route = tuple(int(x) for x in m.group(1).split("->"))
            trajectories.extend([route] * int(m.group(2) or 1))
        out["trajectories"] = trajectories
    for key, label in (("source", "Source:"), ("destination", "Destination:")):
        v = _value(lines, label)
        if v is not None:
            out[key] = int(v)
    v = _value(lines, "Edge Popularity Ranking:")
    if v is not None:
        out["edge_ranking"] = [(int(a), int(b)) for a, b in _EDGE.findall(v)]
    cand_lines = _section(lines, "Candidate Paths:")
    if cand_lines:
        out["candidates"] = [tuple(int(x) for x in line.split("->")) for line in cand_lines]
    v = _value(lines, "POI Popularity Ranking:")
    if v is not None:
        out["poi_ranking"] = [int(x) for x in re.findall(r"\d+", v)]
    return out
