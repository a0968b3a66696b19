import itertools
import json
import random

import networkx as nx
import pytest

from poppath.errors import InfeasibleDensity
from poppath.synthetic import (
    PRESETS,
    HighwayNetwork,
    SyntheticConfig,
    WalkStats,
    build_network,
    build_steiner_tree,
    check_density,
    generate_base_graph,
    generate_dataset,
    synthesize_trajectory,
    write_dataset,
)
from poppath.trajectory import load_dataset


def exact_steiner_cost(graph, terminals):
    # unit weights: smallest connected node set containing the terminals, minus one
    others = [v for v in graph.nodes() if v not in terminals]
    for extra in range(len(others) + 1):
        for add in itertools.combinations(others, extra):
            if nx.is_connected(graph.subgraph(set(terminals) | set(add))):
                return len(terminals) + extra - 1
    raise AssertionError("graph not connected")


def test_two_nodes():
    g = generate_base_graph(2, 0.5, seed=1)
    assert sorted(g.edges()) == [(0, 1)]


def test_full_density_is_complete():
    g = generate_base_graph(6, 1.0, seed=3)
    assert g.number_of_edges() == 15


def test_epcot_edge_count():
    g = generate_base_graph(17, 0.2, seed=0)
    assert abs(g.number_of_edges() - 27) <= 1
    assert nx.is_connected(g)


def test_infeasible_density():
    with pytest.raises(InfeasibleDensity):
        check_density(10, 0.1)
    with pytest.raises(InfeasibleDensity):
        check_density(5, 0.0)
    with pytest.raises(InfeasibleDensity):
        SyntheticConfig(10, 1.5, 10)


def test_steiner_two_terminals_is_shortest_path():
    g = generate_base_graph(12, 0.3, seed=5)
    tree = build_steiner_tree(g, {0, 7})
    assert len(tree) == nx.shortest_path_length(g, 0, 7)
    t = nx.Graph(list(tree))
    assert nx.has_path(t, 0, 7)


def test_steiner_all_nodes_spans():
    g = generate_base_graph(9, 0.5, seed=2)
    tree = nx.Graph(list(build_steiner_tree(g, g.nodes())))
    assert nx.is_tree(tree) and set(tree.nodes()) == set(g.nodes())


@pytest.mark.parametrize("seed", range(12))
def test_steiner_within_twice_optimal(seed):
    rng = random.Random(seed)
    g = generate_base_graph(10, rng.uniform(0.25, 0.5), seed=rng)
    terminals = set(rng.sample(range(10), 4))
    tree_edges = build_steiner_tree(g, terminals)
    tree = nx.Graph(list(tree_edges))
    assert nx.is_tree(tree) and terminals <= set(tree.nodes())
    assert all(g.has_edge(u, v) for u, v in tree_edges)
    leaves = {v for v in tree.nodes() if tree.degree(v) == 1}
    assert leaves <= terminals
    assert len(tree_edges) <= 2 * exact_steiner_cost(g, terminals)


def line_network():
    # square 0-1-2-3-0 plus highway along 0-1-2-3
    base = nx.cycle_graph(4)
    return HighwayNetwork(base, frozenset({0, 3}), frozenset({(0, 1), (1, 2), (2, 3)}))


def test_full_adherence_follows_tree():
    net = line_network()
    assert synthesize_trajectory(net, 0, 3, adherence=1.0, seed=0) == (0, 1, 2, 3)


def test_zero_adherence_takes_shortcuts():
    net = line_network()
    assert synthesize_trajectory(net, 0, 3, adherence=0.0, seed=0) == (0, 3)


@pytest.mark.parametrize("seed", range(5))
def test_walks_on_random_networks(seed):
    net = build_network(SyntheticConfig(15, 0.3, 0, rng_seed=seed))
    rng = random.Random(seed)
    tree = nx.Graph(list(net.highway))
    for _ in range(20):
        s, d = rng.sample(range(15), 2)
        short = synthesize_trajectory(net, s, d, 0.0, rng)
        assert len(short) - 1 == nx.shortest_path_length(net.base, s, d)
        walk = synthesize_trajectory(net, s, d, 0.9, rng)
        assert walk[0] == s and walk[-1] == d and len(set(walk)) == len(walk)
        assert all(net.base.has_edge(a, b) for a, b in zip(walk, walk[1:]))
    a, b = sorted(net.pivotal)[:2]
    assert synthesize_trajectory(net, a, b, 1.0, rng) == tuple(nx.shortest_path(tree, a, b))


def test_adherence_band():
    stats = WalkStats()
    net = build_network(SyntheticConfig(17, 0.2, 0, rng_seed=1))
    rng = random.Random(7)
    while stats.choice_steps < 1000:
        s, d = rng.sample(range(17), 2)
        synthesize_trajectory(net, s, d, 0.9, rng, stats)
    assert 0.85 <= stats.adherence <= 0.95


def test_seeded_determinism(tmp_path):
    cfg = SyntheticConfig(13, 0.4, 200, rng_seed=4)
    a, sa, _ = generate_dataset(cfg)
    b, sb, _ = generate_dataset(cfg)
    assert a.trajectories == b.trajectories and sa == sb
    c, _, _ = generate_dataset(SyntheticConfig(13, 0.4, 200, rng_seed=5))
    assert c.trajectories != a.trajectories
    path, sidecar = write_dataset(a, sa, tmp_path / "d.txt")
    assert load_dataset(path).trajectories == a.trajectories
    assert json.loads(sidecar.read_text())["unique_pairs"] == sa.unique_pairs


def test_presets_are_feasible():
    for cfg in PRESETS.values():
        check_density(cfg.n_nodes, cfg.target_density)
        assert cfg.n_pivotal >= 2
