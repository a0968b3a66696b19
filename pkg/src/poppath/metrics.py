"""F1 and Traversability scores plus batch aggregation."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Sequence, Tuple

from .errors import DegenerateRoute, EmptyBatch, EmptyRoute
from .trajectory import TrajectoryGraph


@dataclass(frozen=True)
class MetricReport:
    """Per-query scores. ``None`` means "not applicable" (F1 for GENERATE)."""

    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    traversability: Optional[float] = None


def f1_score(recommended: Sequence[int], ground_truth: Sequence[int]) -> Tuple[float, float, float]:
    """Precision, recall and F1 over the POI sets of the two routes.

    Precision is normalised by the recommended set, recall by the ground
    truth set. F1 is 0 when both are 0.
    """
    if not recommended or not ground_truth:
        raise EmptyRoute("routes must be non-empty")
    rec = set(recommended)
    gt = set(ground_truth)
    hit = len(rec & gt)
    precision = hit / len(rec)
    recall = hit / len(gt)
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def traversability(recommended: Sequence[int], graph: TrajectoryGraph) -> float:
    if len(recommended) < 2:
        raise DegenerateRoute(f"route of length {len(recommended)} has no segments")
    present = sum(
        1 for a, b in zip(recommended, recommended[1:]) if (a, b) in graph.segment_freq
    )
    return present / (len(recommended) - 1)


def evaluate(recommended, graph: TrajectoryGraph, ground_truth=None) -> MetricReport:
    trav = traversability(recommended, graph)
    if ground_truth is None:
        return MetricReport(traversability=trav)
    p, r, f = f1_score(recommended, ground_truth)
    return MetricReport(precision=p, recall=r, f1=f, traversability=trav)


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted per-field mean; fields that are ``None`` everywhere stay ``None``."""
    if not reports:
        raise EmptyBatch("cannot aggregate an empty batch")
    out = {}
    for f in fields(MetricReport):
        vals = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        out[f.name] = sum(vals) / len(vals) if vals else None
    return MetricReport(**out)
