"""Strategy-space search around full propagation.

Covers the closed-form subtree utility of reasonable strategies, best
responses, unilateral (Nash) and connected-coalition deviation searches, and
the root-withholding equilibrium on d-ary forests.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .friendship import FriendshipForest
from .model import (
    DECLINE,
    ModelError,
    Network,
    StrategyRule,
    as_fraction,
    geometric_count,
    propagate,
    utility,
)
from .serialization import frac_str

log = logging.getLogger(__name__)

GRID_RESOLUTION = {"half": 2, "integer": 1}


class CompositionError(ModelError):
    pass


def compositions(d: int, k: int) -> Iterator[tuple[int, ...]]:
    """All ``(d_0, ..., d_k)`` of non-negative integers summing to ``d``."""
    if k == 0:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in compositions(d - first, k - 1):
            yield (first,) + rest


def fp_composition(d: int, k: int) -> tuple[int, ...]:
    return (0,) * k + (d,)


def lemma3_threshold(d: int, k: int) -> int:
    """Smallest outside audience for which deeper referral always pays."""
    return d * geometric_count(d, k) + 2 * k - 1


@dataclass(frozen=True)
class SubgameContext:
    """One subtree root holding ``x = (k + eps) * x_min`` with ``pi0`` aware players outside."""
    d: int
    k: int
    eps: Fraction
    pi0: int
    x_min: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "eps", as_fraction(self.eps))
        object.__setattr__(self, "x_min", as_fraction(self.x_min))
        if self.k < 1:
            raise ModelError("subgame needs k >= 1")
        if not 0 <= self.eps < 1:
            raise ModelError("eps must lie in [0, 1)")

    @property
    def x(self) -> Fraction:
        return (self.k + self.eps) * self.x_min


def _check_composition(ctx: SubgameContext, comp: Sequence[int]) -> None:
    if len(comp) != ctx.k + 1:
        raise CompositionError(f"composition {tuple(comp)} needs length k+1 = {ctx.k + 1}")
    if any(c < 0 for c in comp) or sum(comp) != ctx.d:
        raise CompositionError(f"composition {tuple(comp)} must be non-negative and sum to d = {ctx.d}")


def subgame_utility(ctx: SubgameContext, comp: Sequence[int]) -> Fraction:
    """Exact root utility when ``comp[l]`` children receive ``(l-1)*x_min`` and
    descendants play full propagation (``comp[0]`` children are not informed)."""
    _check_composition(ctx, comp)
    x, x_min, d = ctx.x, ctx.x_min, ctx.d
    q = x
    w = ctx.pi0 + 1
    for j in range(1, ctx.k + 1):
        reach = geometric_count(d, j) if d >= 2 else j
        q += comp[j] * reach * (x - (j - 1) * x_min)
        w += comp[j] * reach
    return q / w


def lemma3_step_check(ctx: SubgameContext, comp: Sequence[int], l: int) -> bool:
    """Whether moving one child from depth target ``l`` to ``l + 1`` raises the root's utility.

    Out-of-range preconditions are logged, not raised, so the check can probe
    how tight the audience threshold is.
    """
    _check_composition(ctx, comp)
    if not 0 <= l < ctx.k or comp[l] == 0:
        raise CompositionError(f"no unit to move at level {l} in {tuple(comp)}")
    if ctx.d < 3 or ctx.pi0 < lemma3_threshold(ctx.d, ctx.k):
        log.info("lemma3_step_check outside precondition: d=%s k=%s pi0=%s (threshold %s)",
                 ctx.d, ctx.k, ctx.pi0, lemma3_threshold(ctx.d, ctx.k) if ctx.d >= 2 else None)
    moved = list(comp)
    moved[l] -= 1
    moved[l + 1] += 1
    return subgame_utility(ctx, moved) > subgame_utility(ctx, comp)


def composition_vector(comp: Sequence[int], x_min) -> tuple:
    """Action vector realizing a composition: children in id order get increasing targets."""
    x_min = as_fraction(x_min)
    out: list = []
    for level, count in enumerate(comp):
        out.extend([DECLINE if level == 0 else (level - 1) * x_min] * count)
    return tuple(out)


def subgame_network(ctx: SubgameContext) -> tuple[Network, Fraction]:
    """Tree fixture: the sender informs the subtree root (id 1) and ``pi0`` isolated players.

    The root's complete d-ary subtree has depth ``k``.  Returns the network and
    the initial reward ``(k + eps) * x_min`` to feed to :func:`propagate`.
    """
    d, k = ctx.d, ctx.k
    edges = [(0, 1)]
    next_id = 2
    for _ in range(ctx.pi0):
        edges.append((0, next_id))
        next_id += 1
    level = [1]
    for _ in range(k):
        nxt = []
        for u in level:
            for _ in range(d):
                edges.append((u, next_id))
                nxt.append(next_id)
                next_id += 1
        level = nxt
    return Network(players=next_id - 1, sender=0, edges=tuple(edges)), ctx.x


def action_grid(bucket: int, x_min, grid: str = "half") -> list:
    """Decline plus every multiple of ``x_min / resolution`` up to ``(bucket-1)*x_min``."""
    if bucket <= 0:
        return [DECLINE]
    res = GRID_RESOLUTION[grid]
    step = as_fraction(x_min) / res
    return [DECLINE] + [i * step for i in range((bucket - 1) * res + 1)]


def action_vectors(width: int, bucket: int, x_min, grid: str = "half") -> Iterator[tuple]:
    return itertools.product(action_grid(bucket, x_min, grid), repeat=width)


def _fmt_vector(vec: Sequence) -> list:
    return [frac_str(z) for z in vec]


@dataclass(frozen=True)
class BestResponse:
    player: int
    bucket: int
    value: Fraction
    argmax: tuple[tuple, ...]
    evaluated: int

    @property
    def unique(self) -> bool:
        return len(self.argmax) == 1


def best_response(network: Network, rule: StrategyRule, player: int, bucket: int | None = None,
                  grid: str = "half", initial_reward=None) -> BestResponse:
    """Argmax of ``player``'s exact utility over the action grid at its realized bucket."""
    base = propagate(network, rule, initial_reward)
    realized = 0 if player not in base.aware else int(base.reward[player] // rule.x_min)
    if bucket is not None and bucket != realized:
        raise ModelError(f"player {player} realizes bucket {realized}, not {bucket}")
    width = len(network.targets[player])
    best_value = None
    best: list[tuple] = []
    count = 0
    for vec in action_vectors(width, realized, rule.x_min, grid):
        out = propagate(network, rule.with_actions(player, {realized: vec}), initial_reward)
        u = utility(out, player)
        count += 1
        if best_value is None or u > best_value:
            best_value, best = u, [vec]
        elif u == best_value:
            best.append(vec)
    return BestResponse(player, realized, best_value, tuple(best), count)


@dataclass
class NashReport:
    holds: bool
    witness: dict | None = None
    players_checked: int = 0
    deviations_checked: int = 0
    truncated: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": self.witness,
                "players_checked": self.players_checked,
                "deviations_checked": self.deviations_checked,
                "truncated": self.truncated}


def is_nash(network: Network, rule: StrategyRule, grid: str = "half", initial_reward=None,
            players: Iterable[int] | None = None, max_vectors: int = 10 ** 5) -> NashReport:
    """Search every unilateral deviation on the action grid.

    A player's own reward does not depend on its strategy, so only its realized
    bucket matters.  Players whose grid exceeds ``max_vectors`` are skipped and
    listed in ``truncated``.
    """
    x_min = rule.x_min
    base = propagate(network, rule, initial_reward)
    candidates = sorted(base.aware) if players is None else sorted(players)
    report = NashReport(True)
    for p in candidates:
        if p == network.sender or p not in base.aware or not network.targets[p]:
            continue
        k = int(base.reward[p] // x_min)
        if k <= 0:
            continue
        width = len(network.targets[p])
        size = len(action_grid(k, x_min, grid)) ** width
        if size > max_vectors:
            report.truncated.append({"player": p, "vectors": size})
            continue
        report.players_checked += 1
        u0 = utility(base, p)
        current = rule.action(network, p, k)
        best = None
        for vec in action_vectors(width, k, x_min, grid):
            if vec == current:
                continue
            report.deviations_checked += 1
            u = utility(propagate(network, rule.with_actions(p, {k: vec}), initial_reward), p)
            if u > u0 and (best is None or u - u0 > best[1]):
                best = (vec, u - u0, u)
        if best is not None:
            report.holds = False
            report.witness = {
                "player": p,
                "bucket": k,
                "deviation": _fmt_vector(best[0]),
                "utility_before": frac_str(u0),
                "utility_after": frac_str(best[2]),
                "delta": frac_str(best[1]),
            }
            return report
    return report


# -- coalitions ---------------------------------------------------------------

def player_graph(network: Network) -> dict[int, set[int]]:
    """Communication graph among players: the network without the sender."""
    return {v: {u for u in network.adjacency[v] if u != network.sender}
            for v in network.nodes if v != network.sender}


def complete_graph(nodes: Iterable[int]) -> dict[int, set[int]]:
    nodes = list(nodes)
    return {v: set(nodes) - {v} for v in nodes}


def _as_adjacency(comm, network: Network) -> dict[int, set[int]]:
    if isinstance(comm, Network):
        return player_graph(comm)
    if isinstance(comm, FriendshipForest):
        return comm.adjacency(exclude=network.sender)
    return {int(v): {int(u) for u in nbrs} for v, nbrs in comm.items()}


def connected_coalitions(adj: Mapping[int, set[int]], max_size: int,
                         allowed: set[int] | None = None) -> list[frozenset]:
    """Every vertex set of size <= max_size inducing a connected subgraph."""
    nodes = sorted(v for v in adj if allowed is None or v in allowed)
    layer = {frozenset([v]) for v in nodes}
    found = set(layer)
    for _ in range(max_size - 1):
        nxt = set()
        for s in layer:
            for v in s:
                for u in adj[v]:
                    if u in s or (allowed is not None and u not in allowed):
                        continue
                    t = s | {u}
                    if t not in found:
                        found.add(t)
                        nxt.add(t)
        layer = nxt
    return sorted(found, key=lambda s: (len(s), sorted(s)))


@dataclass
class CoalitionReport:
    holds: bool
    witness: dict | None = None
    coalitions_checked: int = 0
    profiles_checked: int = 0
    truncated: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": self.witness,
                "coalitions_checked": self.coalitions_checked,
                "profiles_checked": self.profiles_checked,
                "truncated": self.truncated}


def _member_tables(network: Network, rule: StrategyRule, member: int, buckets: Sequence[int],
                   grid: str) -> list[dict[int, tuple]]:
    width = len(network.targets[member])
    per_bucket = [[(b, vec) for vec in action_vectors(width, b, rule.x_min, grid)] for b in buckets]
    return [dict(choice) for choice in itertools.product(*per_bucket)]


def is_connected_coalition_proof(network: Network, rule: StrategyRule, communication,
                                 max_coalition: int, grid: str = "integer", initial_reward=None,
                                 max_profiles: int = 10 ** 6) -> CoalitionReport:
    """Search joint deviations of every connected coalition up to ``max_coalition`` players.

    A deviation refutes the profile when every member is weakly better off and
    one strictly.  Members upstream-free keep only their realized bucket;
    otherwise they choose a full table over every bucket they could receive.
    Coalitions whose joint space exceeds ``max_profiles`` are reported in
    ``truncated`` and not searched.
    """
    x_min = rule.x_min
    adj = _as_adjacency(communication, network)
    base = propagate(network, rule, initial_reward)
    base_u = {p: utility(base, p) for p in base.order}
    strategic = set(network.strategic_players(x_min, initial_reward))
    dist = network.distance

    seen: set[frozenset] = set()
    report = CoalitionReport(True)
    for coalition in connected_coalitions(adj, max_coalition):
        members = frozenset(v for v in coalition if v in strategic)
        if not members or members in seen:
            continue
        seen.add(members)
        ordered = sorted(members)
        spaces = []
        for m in ordered:
            realized = int(base.reward[m] // x_min) if m in base.aware else 0
            upstream = any(dist[o] < dist[m] for o in members if o != m)
            if upstream:
                buckets = list(range(1, network.max_bucket(m, x_min, initial_reward) + 1))
            else:
                buckets = [realized] if realized >= 1 else []
            spaces.append(_member_tables(network, rule, m, buckets, grid) if buckets else [{}])
        size = 1
        for s in spaces:
            size *= len(s)
        if size > max_profiles:
            report.truncated.append({"coalition": ordered, "profiles": size})
            continue
        report.coalitions_checked += 1
        before = {m: base_u.get(m, Fraction(0)) for m in ordered}
        for joint in itertools.product(*spaces):
            report.profiles_checked += 1
            dev = rule.with_many({m: t for m, t in zip(ordered, joint) if t})
            out = propagate(network, dev, initial_reward)
            after = {m: utility(out, m) for m in ordered}
            if all(after[m] >= before[m] for m in ordered) and any(after[m] > before[m] for m in ordered):
                report.holds = False
                report.witness = {
                    "coalition": ordered,
                    "deviation": {str(m): {str(b): _fmt_vector(v) for b, v in t.items()}
                                  for m, t in zip(ordered, joint)},
                    "utility_before": {str(m): frac_str(before[m]) for m in ordered},
                    "utility_after": {str(m): frac_str(after[m]) for m in ordered},
                }
                return report
    return report


def counterexample_profile(network: Network) -> StrategyRule:
    """Root of the first subtree keeps everything; its children never forward; the rest play FP."""
    cfg = network.config
    if cfg is None:
        raise ModelError("counterexample_profile needs a d-ary forest")
    if cfg.d < 4:
        raise ModelError(f"counterexample_profile assumes d >= 4, got d={cfg.d}")
    root = min(network.adjacency[network.sender])
    kids = network.targets[root]
    tables = {root: {b: (Fraction(0),) * len(kids) for b in range(1, cfg.H + 1)}}
    for c in kids:
        width = len(network.targets[c])
        tables[c] = {b: (DECLINE,) * width for b in range(1, cfg.H + 1)}
    return StrategyRule(cfg.x_min, "fp", tables)


def coalition_utilities(network: Network, rule: StrategyRule, coalition: Iterable[int],
                        initial_reward=None) -> dict[int, Fraction]:
    out = propagate(network, rule, initial_reward)
    return {m: utility(out, m) for m in coalition}
