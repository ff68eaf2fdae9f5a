import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from lottoprop import (
    GameConfig,
    Network,
    NotReachableError,
    best_friend,
    build_dary_forest,
    friendship_forest,
    good_friends,
    min_good_friend_degree,
    shortest_paths,
)
from lottoprop.friendship import strategic_players
from oracles import best_friend_oracle


def diamond():
    # sender 0 -> a=1, b=2 -> c=3 (two disjoint shortest paths) -> e=4
    return Network(4, 0, ((0, 1), (0, 2), (1, 3), (2, 3), (3, 4)))


def test_diamond():
    net = diamond()
    spd = shortest_paths(net)
    assert spd.path_count[3] == 2
    assert best_friend(net, spd, 3) is None
    assert best_friend(net, spd, 4) == 3
    assert best_friend(net, spd, 1) == 0  # the sender itself
    assert good_friends(net, spd, 3) == {4}
    assert good_friends(net, spd, 1) == frozenset()


def test_chain_and_errors():
    net = Network(4, 0, ((0, 1), (1, 2), (2, 3)))  # node 4 is isolated
    spd = shortest_paths(net)
    assert best_friend(net, spd, 3) == 2
    with pytest.raises(NotReachableError):
        best_friend(net, spd, 0)
    with pytest.raises(NotReachableError):
        best_friend(net, spd, 4)


def test_forest_of_tree_is_tree():
    net = build_dary_forest(GameConfig(3, 3, 2))
    forest = friendship_forest(net)
    assert set(forest.edges) == set(net.edges)
    assert forest.roots == (0,)
    assert min_good_friend_degree(net) == 3


def test_min_degree_drops_with_shared_child():
    base = build_dary_forest(GameConfig(3, 3, 2))
    # node 4 (child of root 1) also linked to root 2: it loses its best friend
    net = Network(base.players, 0, base.edges + ((2, 4),))
    assert best_friend(net, shortest_paths(net), 4) is None
    assert min_good_friend_degree(net, depth_budget=2) == 2


def test_strategic_players_respect_budget():
    net = build_dary_forest(GameConfig(3, 3, 3))
    spd = shortest_paths(net)
    assert strategic_players(net, spd, 2) == list(range(1, 13))
    assert len(strategic_players(net, spd)) == 3 * 13


def _nx_best_friend(g, s, j):
    paths = list(nx.all_shortest_paths(g, s, j))
    common = set(paths[0]).intersection(*map(set, paths[1:])) - {j}
    return next((i for i in g.neighbors(j) if i in common), None)


@st.composite
def graphs(draw, max_nodes=14):
    n = draw(st.integers(2, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=min(len(pairs), 3 * n), unique=True))
    if not any(0 in e for e in edges):
        edges.append((0, draw(st.integers(1, n - 1))))
    return Network(n - 1, 0, tuple(edges))


@settings(max_examples=200, deadline=None)
@given(net=graphs())
def test_best_friend_matches_oracles(net):
    spd = shortest_paths(net)
    g = nx.Graph(list(net.edges))
    g.add_nodes_from(net.nodes)
    lengths = nx.single_source_shortest_path_length(g, 0)
    assert dict(spd.dist) == lengths
    for j in spd.dist:
        if j == 0:
            continue
        assert spd.path_count[j] == len(list(nx.all_shortest_paths(g, 0, j)))
        bf = best_friend(net, spd, j)
        assert bf == _nx_best_friend(g, 0, j) == best_friend_oracle(net.n_nodes, net.edges, 0, j)
    for i in spd.dist:
        assert good_friends(net, spd, i) == {j for j in spd.dist if j != 0 and best_friend(net, spd, j) == i}


@settings(max_examples=100, deadline=None)
@given(net=graphs())
def test_friendship_graph_is_forest(net):
    forest = friendship_forest(net)
    g = nx.Graph(list(forest.edges))
    g.add_nodes_from(forest.parent)
    assert nx.is_forest(g)
    assert all(forest.parent[j] == i for i, j in forest.edges)
    assert set(forest.roots) == {v for v, p in forest.parent.items() if p is None}
