import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poppath.errors import EmptyCandidates, NoPathExists, NoSegments, UnrankedPoi
from poppath.metrics import traversability
from poppath.oracle import (
    EdgeRanking,
    PoiRanking,
    discover_paths,
    k_shortest_paths,
    rank_edges,
    rank_pois,
    select_path,
    synthesize_paths,
)
from poppath.trajectory import (
    CandidateSet,
    Query,
    TrajectoryDataset,
    TrajectoryGraph,
    build_graph,
    canonical_popular_path,
    extract_ground_truth,
    parse_dataset,
)

SAMPLE = """\
10 -> 17 -> 28
1 -> 4 -> 8 -> 9 -> 10 -> 11 -> 15 -> 18 -> 19 -> 23 -> 24 -> 29
2 -> 3 -> 8 -> 9 -> 17 -> 29
1 -> 3 -> 17 -> 18 -> 29
2 -> 4 -> 24
4 -> 8 -> 15
1 -> 8 -> 15
"""


def all_simple_paths(segments, weights, s, d):
    adj = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
    out = []

    def walk(path):
        u = path[-1]
        if u == d:
            out.append(tuple(path))
            return
        for v in adj.get(u, ()):
            if v not in path:
                walk(path + [v])

    walk([s])
    return sorted(out, key=lambda p: (sum(weights[e] for e in zip(p, p[1:])), len(p), p))


def random_graph(rng, n, p):
    segs = {}
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < p:
                segs[(a, b)] = rng.randint(1, 5)
    return TrajectoryGraph(segment_freq=segs, poi_freq={v: 1 for v in range(n)}, directed=True)


def test_discovery_on_sample():
    ds = parse_dataset(SAMPLE)
    cands = discover_paths(ds, Query(1, 19))
    assert cands.routes == ((1, 4, 8, 9, 10, 11, 15, 18, 19),)
    assert not discover_paths(ds, Query(28, 1))


def test_rank_examples():
    g = build_graph(TrajectoryDataset(((1, 2, 3), (2, 3), (3,))))
    assert rank_pois(g).entries == ((3, 3), (2, 2), (1, 1))
    g2 = build_graph(TrajectoryDataset(((1, 2, 3), (2, 3))))
    assert rank_edges(g2).entries == (((2, 3), 2), ((1, 2), 1))
    assert rank_pois(build_graph(TrajectoryDataset(((7,),)))).entries == ((7, 1),)
    assert rank_pois(build_graph(TrajectoryDataset(((5, 4),)))).order() == [4, 5]
    with pytest.raises(NoSegments):
        rank_edges(build_graph(TrajectoryDataset(((7,),))))


def test_rank_totals():
    ds = parse_dataset(SAMPLE)
    g = build_graph(ds)
    assert sum(f for _, f in rank_pois(g).entries) == sum(len(t) for t in ds.trajectories)
    assert sum(f for _, f in rank_edges(g).entries) == sum(len(t) - 1 for t in ds.trajectories)


def test_synthesis_direct_edge():
    g = build_graph(TrajectoryDataset(((1, 2),)))
    assert synthesize_paths(g, Query(1, 2), rank_edges(g)).routes == ((1, 2),)


def test_synthesis_stitches_segments():
    # A=1, Z=9: no trip covers both, three trips share connecting POIs
    ds = TrajectoryDataset(((1, 2, 3), (3, 4, 5), (5, 6, 9), (7, 3)))
    g = build_graph(ds)
    q = Query(1, 9)
    assert not extract_ground_truth(ds, q)
    cands = synthesize_paths(g, q, rank_edges(g))
    assert cands.routes == ((1, 2, 3, 4, 5, 6, 9),)
    assert traversability(cands.routes[0], g) == 1.0


def test_synthesis_ignores_unranked_or_absent_edges():
    g = build_graph(TrajectoryDataset(((1, 2, 3), (1, 3))))
    only = EdgeRanking.from_order([(1, 2), (2, 3), (3, 1)])
    assert synthesize_paths(g, Query(1, 3), only).routes == ((1, 2, 3),)
    with pytest.raises(NoPathExists):
        synthesize_paths(g, Query(3, 1), rank_edges(g))


def test_yen_prefers_popular_edges():
    adj = {0: [(1, 1), (2, 5), (3, 2)], 1: [(3, 1)], 2: [(3, 1)], 3: []}
    # equal weight: fewer hops first
    assert k_shortest_paths(adj, 0, 3, 5) == [(2, (0, 3)), (2, (0, 1, 3)), (6, (0, 2, 3))]


@pytest.mark.parametrize("seed", range(40))
def test_synthesis_matches_exhaustive(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 8)
    g = random_graph(rng, n, rng.uniform(0.2, 0.6))
    if not g.segment_freq:
        return
    edges = rank_edges(g)
    w = edges.weights()
    s, d = rng.sample(range(n), 2)
    want = all_simple_paths(g.segments, w, s, d)[:3]
    if not want:
        with pytest.raises(NoPathExists):
            synthesize_paths(g, Query(s, d), edges, 3)
        return
    assert list(synthesize_paths(g, Query(s, d), edges, 3).routes) == want


def test_select_example():
    cands = CandidateSet.from_routes([(1, 2, 3), (1, 3)])
    ranking = PoiRanking(((1, 2), (3, 2), (2, 1)))
    assert select_path(cands, ranking) == [((1, 2, 3), 5), ((1, 3), 4)]
    assert select_path(CandidateSet.from_routes([(1, 3)]), ranking) == [((1, 3), 4)]


def test_select_errors():
    with pytest.raises(EmptyCandidates):
        select_path(CandidateSet(), PoiRanking(((1, 1),)))
    with pytest.raises(UnrankedPoi):
        select_path(CandidateSet.from_routes([(1, 5)]), PoiRanking(((1, 1),)))


def test_select_order_only_ranking():
    cands = CandidateSet.from_routes([(1, 4, 8, 9, 10, 11, 15, 18, 19), (1, 3, 17, 18, 29)])
    ranking = PoiRanking.from_order([8, 9, 15, 17, 29, 18, 11, 10, 4, 3, 1, 19])
    ranked = select_path(cands, ranking)
    assert ranked[0][0] == (1, 4, 8, 9, 10, 11, 15, 18, 19)
    assert [s for _, s in ranked] == [12 + 11 + 10 + 7 + 6 + 5 + 4 + 2 + 1, 9 + 8 + 7 + 3 + 2]


trajectory = st.lists(st.integers(0, 5), min_size=1, max_size=7)


@settings(max_examples=150, deadline=None)
@given(st.lists(trajectory, min_size=1, max_size=10), st.integers(0, 5), st.integers(0, 5), st.integers(1, 9))
def test_select_agrees_with_canonical(trajs, s, d, scale):
    if s == d:
        return
    ds = TrajectoryDataset(tuple(tuple(t) for t in trajs))
    g = build_graph(ds)
    cands = discover_paths(ds, Query(s, d))
    if not cands:
        return
    assert cands == extract_ground_truth(ds, Query(s, d))
    top = select_path(cands, rank_pois(g))[0][0]
    assert top == canonical_popular_path(cands, g)
    # scaling every frequency leaves the choice unchanged
    scaled = PoiRanking(tuple((p, f * scale) for p, f in rank_pois(g).entries))
    assert select_path(cands, scaled)[0][0] == top
