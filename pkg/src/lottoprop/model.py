"""Game model: networks, strategy rules, the propagation process and utilities.

All reward quantities are exact :class:`fractions.Fraction` values.  A leave
amount of ``None`` means the player declines to inform that neighbour.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

DECLINE = None


class ModelError(ValueError):
    """Invalid parameters or an inconsistent network/strategy."""


class FeasibilityError(ModelError):
    def __init__(self, player: int, bucket: int, action):
        self.player = player
        self.bucket = bucket
        self.action = action
        super().__init__(
            f"infeasible action {action!r} for player {player} in reward bucket {bucket}")


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted for reward quantities")
    return Fraction(value)


def geometric_count(d: int, k: int) -> int:
    """Number of nodes on the first ``k`` levels of a complete d-ary tree."""
    if d < 2:
        raise ModelError(f"geometric_count needs d >= 2, got {d}")
    if k < 0:
        raise ModelError(f"geometric_count needs k >= 0, got {k}")
    return (d ** k - 1) // (d - 1)


def _level_count(d: int, levels: int) -> int:
    # same as geometric_count but also defined for d == 1
    return levels if d == 1 else geometric_count(d, levels)


@dataclass(frozen=True)
class GameConfig:
    """Parameters of a forest game.

    ``x_min`` defaults to ``1/H`` so that the initial reward is 1.
    """
    d: int
    f: int
    H: int
    x_min: Fraction | None = None

    def __post_init__(self):
        if self.d < 1 or self.f < self.d:
            raise ModelError(f"need f >= d >= 1, got d={self.d}, f={self.f}")
        if self.H < 1:
            raise ModelError(f"need H >= 1, got {self.H}")
        x_min = Fraction(1, self.H) if self.x_min is None else as_fraction(self.x_min)
        if x_min <= 0:
            raise ModelError("x_min must be positive")
        object.__setattr__(self, "x_min", x_min)

    @property
    def initial_reward(self) -> Fraction:
        return self.H * self.x_min


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected simple graph on node ids ``0..players``; one node is the sender.

    ``players`` counts the non-sender nodes.  ``config`` is set for complete
    d-ary forests built by :func:`build_dary_forest`.
    """
    players: int
    sender: int
    edges: tuple[tuple[int, int], ...]
    config: GameConfig | None = None

    def __post_init__(self):
        n = self.players + 1
        if not 0 <= self.sender < n:
            raise ModelError(f"sender {self.sender} outside 0..{self.players}")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ModelError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ModelError(f"edge ({u}, {v}) references an unknown node")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ModelError(f"parallel edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if not self.adjacency[self.sender]:
            raise ModelError("sender must have at least one neighbour")

    @property
    def n_nodes(self) -> int:
        return self.players + 1

    @property
    def player_count(self) -> int:
        return self.players

    @property
    def kind(self) -> str:
        return "general" if self.config is None else "dary"

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def distance(self) -> Mapping[int, int]:
        """Hop distance from the sender; unreachable nodes are absent."""
        dist = {self.sender: 0}
        queue = deque([self.sender])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return MappingProxyType(dist)

    @cached_property
    def is_tree(self) -> bool:
        return len(self.distance) == self.n_nodes and len(self.edges) == self.n_nodes - 1

    @cached_property
    def targets(self) -> tuple[tuple[int, ...], ...]:
        """Neighbours each player can leave a reward to, in id order.

        On trees these are the children; otherwise all non-sender neighbours.
        """
        dist = self.distance
        out = []
        for u in self.nodes:
            if u == self.sender:
                out.append(())
            elif self.is_tree:
                out.append(tuple(v for v in self.adjacency[u] if dist[v] > dist[u]))
            else:
                out.append(tuple(v for v in self.adjacency[u] if v != self.sender))
        return tuple(out)

    def depth(self, node: int) -> int:
        """Depth below the sender's neighbours (roots are depth 0)."""
        return self.distance[node] - 1

    def default_initial_reward(self) -> Fraction:
        return Fraction(1) if self.config is None else self.config.initial_reward

    def max_bucket(self, node: int, x_min: Fraction, initial_reward: Fraction | None = None) -> int:
        """Largest reward bucket ``node`` can ever receive (0 if unreachable)."""
        if node == self.sender or node not in self.distance:
            return 0
        initial = self.default_initial_reward() if initial_reward is None else initial_reward
        best = initial - (self.distance[node] - 1) * x_min
        return max(int(best // x_min), 0)

    def strategic_players(self, x_min: Fraction, initial_reward: Fraction | None = None) -> list[int]:
        return [u for u in self.nodes
                if u != self.sender and self.targets[u]
                and self.max_bucket(u, x_min, initial_reward) >= 1]


def build_dary_forest(config: GameConfig) -> Network:
    """Sender 0 adjacent to ``f`` roots, each the apex of a complete d-ary tree.

    Trees have levels 0..H; level H holds the non-strategic players who can be
    informed but never receive a positive reward under any profile.
    Ids are assigned level by level.
    """
    d, f, H = config.d, config.f, config.H
    edges = []
    level = list(range(1, f + 1))
    edges.extend((0, r) for r in level)
    next_id = f + 1
    for _ in range(H):
        nxt = []
        for u in level:
            for _ in range(d):
                edges.append((u, next_id))
                nxt.append(next_id)
                next_id += 1
        level = nxt
    players = next_id - 1
    assert players == f * _level_count(d, H + 1)
    return Network(players=players, sender=0, edges=tuple(edges), config=config)


@dataclass(frozen=True, eq=False)
class StrategyRule:
    """A strategy for every player, keyed by reward bucket.

    Bucket ``k`` covers rewards ``k*x_min <= x < (k+1)*x_min``.  ``overrides``
    maps ``player -> {bucket: action vector}``; anything not overridden falls
    back to ``default`` (``"fp"`` or ``"decline"``).  Bucket 0 is always
    all-decline.
    """
    x_min: Fraction
    default: str = "fp"
    overrides: Mapping[int, Mapping[int, tuple]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x_min", as_fraction(self.x_min))
        if self.default not in ("fp", "decline"):
            raise ModelError(f"unknown default policy {self.default!r}")
        frozen = {int(p): MappingProxyType({int(k): tuple(v) for k, v in table.items()})
                  for p, table in self.overrides.items()}
        object.__setattr__(self, "overrides", MappingProxyType(frozen))

    def action(self, network: Network, player: int, bucket: int) -> tuple:
        width = len(network.targets[player])
        if bucket <= 0:
            return (DECLINE,) * width
        table = self.overrides.get(player)
        if table is not None and bucket in table:
            return table[bucket]
        if self.default == "fp":
            return ((bucket - 1) * self.x_min,) * width
        return (DECLINE,) * width

    def with_actions(self, player: int, table: Mapping[int, Sequence]) -> "StrategyRule":
        merged = {p: dict(t) for p, t in self.overrides.items()}
        merged.setdefault(player, {}).update({k: tuple(v) for k, v in table.items()})
        return StrategyRule(self.x_min, self.default, merged)

    def with_many(self, tables: Mapping[int, Mapping[int, Sequence]]) -> "StrategyRule":
        merged = {p: dict(t) for p, t in self.overrides.items()}
        for player, table in tables.items():
            merged.setdefault(player, {}).update({k: tuple(v) for k, v in table.items()})
        return StrategyRule(self.x_min, self.default, merged)

    def check_feasible(self, network: Network, player: int, bucket: int, vector: tuple) -> None:
        if len(vector) != len(network.targets[player]):
            raise FeasibilityError(player, bucket, vector)
        cap = (bucket - 1) * self.x_min
        for z in vector:
            if z is DECLINE:
                continue
            if bucket <= 0 or z < 0 or z > cap:
                raise FeasibilityError(player, bucket, vector)

    def validate(self, network: Network) -> None:
        for player, table in self.overrides.items():
            for bucket, vector in table.items():
                if bucket <= 0:
                    if any(z is not DECLINE for z in vector):
                        raise FeasibilityError(player, bucket, vector)
                    continue
                self.check_feasible(network, player, bucket, vector)


def fp_strategy(network: Network | None = None, x_min=None) -> StrategyRule:
    """Full propagation: in bucket k leave ``(k-1)*x_min`` to every neighbour."""
    if x_min is None:
        if network is None or network.config is None:
            raise ModelError("x_min is required for general networks")
        x_min = network.config.x_min
    return StrategyRule(as_fraction(x_min), "fp")


def decline_strategy(x_min) -> StrategyRule:
    return StrategyRule(as_fraction(x_min), "decline")


@dataclass(frozen=True, eq=False)
class PropagationOutcome:
    aware: frozenset
    reward: Mapping[int, Fraction]
    parent: Mapping[int, int | None]
    order: tuple[int, ...]
    subtree_size: Mapping[int, int]

    @property
    def aware_count(self) -> int:
        return len(self.aware)

    @cached_property
    def children(self) -> Mapping[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {}
        for v in self.order:
            p = self.parent[v]
            if p is not None:
                kids.setdefault(p, []).append(v)
        return MappingProxyType({p: tuple(sorted(c)) for p, c in kids.items()})

    @cached_property
    def subtree_count(self) -> Mapping[tuple[int, int], int]:
        """``(i, j) -> n_ij`` for every claimed parent link."""
        return MappingProxyType({(p, v): self.subtree_size[v]
                                 for v, p in self.parent.items() if p is not None})

    def chain(self, winner: int) -> list[int]:
        """Claimed ancestors of ``winner`` from the winner up to a root."""
        out = [winner]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out


CLAIM_RULES = ("round", "highest")


def propagate(network: Network, rule: StrategyRule,
              initial_reward=None, claim: str = "round") -> PropagationOutcome:
    """Run the propagation process to its fixed point.

    With ``claim="round"`` players become aware in rounds by distance along
    the realized offers.  A newly aware player takes the highest offer received
    that round (ties go to the smallest offering id) and locks that parent.
    Offers to players who are already aware are ignored.

    With ``claim="highest"`` every player ends up with the highest offer any
    aware neighbour makes to it, whenever it arrives (same tie rule).  Offers
    shrink by at least ``x_min`` per hop, so players can be settled in
    decreasing order of reward.  On trees, and under full propagation on any
    graph, both rules give the same outcome.
    """
    initial = network.default_initial_reward() if initial_reward is None else as_fraction(initial_reward)
    if claim == "highest":
        return _propagate_highest(network, rule, initial)
    if claim != "round":
        raise ModelError(f"unknown claim rule {claim!r}")
    x_min = rule.x_min
    targets = network.targets
    reward: dict[int, Fraction] = {}
    parent: dict[int, int | None] = {}
    order: list[int] = []
    bucket_cache: dict[Fraction, int] = {}

    offers = {v: (initial, None) for v in network.adjacency[network.sender]}
    while offers:
        newly = sorted(offers)
        for v in newly:
            reward[v], parent[v] = offers[v]
        order.extend(newly)
        nxt: dict[int, tuple[Fraction, int]] = {}
        for v in newly:
            x = reward[v]
            k = bucket_cache.get(x)
            if k is None:
                k = bucket_cache[x] = int(x // x_min)
            if k <= 0 or not targets[v]:
                continue
            vector = rule.action(network, v, k)
            rule.check_feasible(network, v, k, vector)
            for t, z in zip(targets[v], vector):
                if z is DECLINE or t in reward:
                    continue
                best = nxt.get(t)
                if best is None or z > best[0] or (z == best[0] and v < best[1]):
                    nxt[t] = (z, v)
        offers = nxt
    return _outcome(order, reward, parent)


def _propagate_highest(network: Network, rule: StrategyRule, initial: Fraction) -> PropagationOutcome:
    x_min = rule.x_min
    targets = network.targets
    reward: dict[int, Fraction] = {}
    parent: dict[int, int | None] = {}
    order: list[int] = []
    # entries (-offer, offerer, target); the sender is ranked before every player
    heap = [(-initial, -1, v) for v in network.adjacency[network.sender]]
    heapq.heapify(heap)
    while heap:
        neg, src, v = heapq.heappop(heap)
        if v in reward:
            continue
        reward[v], parent[v] = -neg, (None if src < 0 else src)
        order.append(v)
        k = int(reward[v] // x_min)
        if k <= 0 or not targets[v]:
            continue
        vector = rule.action(network, v, k)
        rule.check_feasible(network, v, k, vector)
        for t, z in zip(targets[v], vector):
            if z is not DECLINE and t not in reward:
                heapq.heappush(heap, (-z, v, t))
    return _outcome(order, reward, parent)


def _outcome(order, reward, parent) -> PropagationOutcome:
    size = dict.fromkeys(order, 1)
    for v in reversed(order):
        p = parent[v]
        if p is not None:
            size[p] += size[v]
    return PropagationOutcome(
        aware=frozenset(order),
        reward=MappingProxyType(reward),
        parent=MappingProxyType(parent),
        order=tuple(order),
        subtree_size=MappingProxyType(size),
    )


def utility(outcome: PropagationOutcome, player: int) -> Fraction:
    """Expected lottery payoff: own win plus the cut kept on every claimed child's subtree."""
    if player not in outcome.aware:
        return Fraction(0)
    x = outcome.reward[player]
    total = x
    for j in outcome.children.get(player, ()):
        total += (x - outcome.reward[j]) * outcome.subtree_size[j]
    return total / outcome.aware_count


def utilities(outcome: PropagationOutcome, players: Iterable[int] | None = None) -> dict[int, Fraction]:
    players = outcome.order if players is None else players
    return {p: utility(outcome, p) for p in players}
