"""Shortest-path structure of general networks: best friends, good friends and
the good-friendship forest."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .model import Network


class NotReachableError(ValueError):
    pass


@dataclass(frozen=True)
class ShortestPathData:
    sender: int
    dist: Mapping[int, int]
    path_count: Mapping[int, int]


def shortest_paths(network: Network) -> ShortestPathData:
    """BFS hop distances and exact shortest-path counts from the sender."""
    s = network.sender
    dist = {s: 0}
    sigma = {s: 1}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in network.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                sigma[v] = 0
                queue.append(v)
            if dist[v] == dist[u] + 1:
                sigma[v] += sigma[u]
    return ShortestPathData(s, MappingProxyType(dist), MappingProxyType(sigma))


def best_friend(network: Network, spd: ShortestPathData, j: int) -> int | None:
    """The neighbour of ``j`` lying on every shortest sender-to-``j`` path, if any.

    Such a neighbour must sit one hop closer, and it carries all of ``j``'s
    shortest paths exactly when its path count equals ``j``'s.  The result may
    be the sender itself.
    """
    if j == spd.sender:
        raise NotReachableError("the sender has no best friend")
    if j not in spd.dist:
        raise NotReachableError(f"node {j} is unreachable from the sender")
    dj = spd.dist[j]
    for i in network.adjacency[j]:
        if spd.dist.get(i) == dj - 1 and spd.path_count[i] == spd.path_count[j]:
            return i
    return None


def good_friends(network: Network, spd: ShortestPathData, i: int) -> frozenset[int]:
    out = set()
    for j in network.adjacency[i]:
        if j != spd.sender and j in spd.dist and best_friend(network, spd, j) == i:
            out.add(j)
    return frozenset(out)


@dataclass(frozen=True)
class FriendshipForest:
    """Best-friend edges ``(i, j)`` with ``i`` the best friend of ``j``."""
    edges: tuple[tuple[int, int], ...]
    roots: tuple[int, ...]
    parent: Mapping[int, int | None]

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(j for p, j in self.edges if p == i)

    def adjacency(self, exclude: int | None = None) -> dict[int, set[int]]:
        """Undirected adjacency of the forest, optionally dropping one node (the sender)."""
        adj: dict[int, set[int]] = {v: set() for v in self.parent if v != exclude}
        for i, j in self.edges:
            if exclude in (i, j):
                continue
            adj[i].add(j)
            adj[j].add(i)
        return adj


def friendship_forest(network: Network, spd: ShortestPathData | None = None) -> FriendshipForest:
    spd = shortest_paths(network) if spd is None else spd
    parent: dict[int, int | None] = {}
    edges = []
    for v in sorted(spd.dist):
        if v == spd.sender:
            parent[v] = None
            continue
        bf = best_friend(network, spd, v)
        parent[v] = bf
        if bf is not None:
            edges.append((bf, v))
    roots = tuple(v for v in sorted(parent) if parent[v] is None)
    return FriendshipForest(tuple(edges), roots, MappingProxyType(parent))


def strategic_players(network: Network, spd: ShortestPathData,
                      depth_budget: int | None = None) -> list[int]:
    """Reachable players with a neighbour farther from the sender.

    With ``depth_budget`` H, only players within H hops can receive a positive
    reward and count as strategic.
    """
    out = []
    for v, dv in spd.dist.items():
        if v == spd.sender:
            continue
        if depth_budget is not None and dv > depth_budget:
            continue
        if any(spd.dist.get(u, -1) > dv for u in network.adjacency[v]):
            out.append(v)
    return sorted(out)


def min_good_friend_degree(network: Network, spd: ShortestPathData | None = None,
                           depth_budget: int | None = None) -> int:
    spd = shortest_paths(network) if spd is None else spd
    if depth_budget is None and network.config is not None:
        depth_budget = network.config.H
    players = strategic_players(network, spd, depth_budget)
    if not players:
        return 0
    forest = friendship_forest(network, spd)
    return min(len(forest.children(p)) for p in players)
