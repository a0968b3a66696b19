from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from poppath.errors import DegenerateRoute, EmptyBatch, EmptyRoute
from poppath.metrics import MetricReport, aggregate, evaluate, f1_score, traversability
from poppath.trajectory import TrajectoryGraph


def graph_of(segments):
    return TrajectoryGraph(segment_freq={s: 1 for s in segments}, poi_freq={}, directed=True)


def exact_f1(rec, gt):
    rec, gt = set(rec), set(gt)
    hit = sum(1 for p in rec if p in gt)
    p = Fraction(hit, len(rec))
    r = Fraction(hit, len(gt))
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f


def test_f1_example():
    p, r, f = f1_score((1, 2, 3), (2, 3, 4))
    assert (round(p, 3), round(r, 3), round(f, 3)) == (0.667, 0.667, 0.667)


def test_f1_disjoint_and_identical():
    assert f1_score((1, 2), (3, 4)) == (0.0, 0.0, 0.0)
    assert f1_score((5, 6, 5), (6, 5)) == (1.0, 1.0, 1.0)


def test_traversability_example():
    assert traversability((1, 2, 3), graph_of({(1, 2)})) == 0.5


def test_degenerate_inputs():
    with pytest.raises(DegenerateRoute):
        traversability((1,), graph_of(set()))
    with pytest.raises(EmptyRoute):
        f1_score((), (1,))


def test_evaluate_without_ground_truth():
    rep = evaluate((1, 2), graph_of({(1, 2)}))
    assert rep == MetricReport(traversability=1.0)


def test_aggregate_mean():
    agg = aggregate([MetricReport(f1=1.0, traversability=1.0), MetricReport(f1=0.5, traversability=1.0),
                     MetricReport(traversability=0.0)])
    assert agg.f1 == 0.75
    assert agg.traversability == pytest.approx(2 / 3)
    assert agg.precision is None
    with pytest.raises(EmptyBatch):
        aggregate([])


routes = st.lists(st.integers(0, 9), min_size=2, max_size=10)


@given(routes, routes, st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9))))
def test_against_exact_fractions(rec, gt, segs):
    p, r, f = f1_score(rec, gt)
    ep, er, ef = exact_f1(rec, gt)
    assert abs(p - ep) < 1e-12 and abs(r - er) < 1e-12 and abs(f - ef) < 1e-12
    pairs = list(zip(rec, rec[1:]))
    want = Fraction(sum(1 for e in pairs if e in segs), len(pairs))
    assert abs(traversability(rec, graph_of(segs)) - want) < 1e-12
