"""Iterated elimination of weakly dominated strategies on tree networks.

Strategies are tables ``bucket -> action vector`` over a discretized leave
grid (multiples of ``x_min / resolution`` plus decline).  Two tables that
differ in a single bucket can only be told apart when the player receives a
reward in that bucket, so dominance is decided bucket by bucket.

On a tree, a player's utility depends on the rest of the profile only through
its received reward ``x``, the number ``pi`` of aware players outside its
subtree, and, for each child, the child subtree's *response*: how many players
it brings in for each reward bucket it might be handed.  These factors are
chosen by disjoint sets of opponents, so the opponent profiles a player faces
are exactly the product of the achievable ``(x, pi)`` pairs and the achievable
child responses.  :class:`DominanceOracle` enumerates that product, which makes
the dominance test exact.  When the product is too large, a seeded sample is
used and the result is labelled ``"sampled"``.

:func:`reverify` re-checks logged eliminations by the independent route of
running :func:`~lottoprop.model.propagate` on concrete opponent profiles.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .model import DECLINE, ModelError, Network, StrategyRule, propagate, utility
from .serialization import frac_str

NO = -1  # decline, in grid units


class DominanceError(RuntimeError):
    """A dominance step the elimination order relies on failed verification."""

    def __init__(self, message: str, counterexample: dict):
        super().__init__(message)
        self.counterexample = counterexample


@dataclass(frozen=True)
class EliminationEvent:
    round: int
    player: int
    bucket: int
    eliminated: tuple
    dominator: tuple
    mode: str = "exact"

    def to_dict(self) -> dict:
        return {"round": self.round, "player": self.player, "bucket": self.bucket,
                "eliminated": [frac_str(z) for z in self.eliminated],
                "dominator": [frac_str(z) for z in self.dominator],
                "mode": self.mode}


def _units_sum(sets: Sequence[set[int]]) -> set[int]:
    total = {0}
    for s in sets:
        total = {a + b for a in total for b in s}
    return total


class _Grid:
    """Conversion between exact leave amounts and integer grid units."""

    def __init__(self, x_min: Fraction, resolution: int):
        self.x_min = x_min
        self.res = resolution
        self.step = x_min / resolution

    def bucket(self, units: int) -> int:
        return units // self.res

    def to_frac(self, vec: Sequence[int]) -> tuple:
        return tuple(DECLINE if u == NO else u * self.step for u in vec)

    def values(self, bucket: int) -> list[int]:
        return [NO] + list(range((bucket - 1) * self.res + 1))

    def fp(self, bucket: int, width: int) -> tuple[int, ...]:
        return ((bucket - 1) * self.res,) * width


class DominanceOracle:
    """Exact opponent-scenario enumeration for one surviving-set snapshot."""

    def __init__(self, network: Network, grid: _Grid, initial_units: int,
                 surviving: dict[tuple[int, int], list[tuple[int, ...]]],
                 max_scenarios: int, sample_size: int, rng: random.Random):
        self.net = network
        self.grid = grid
        self.initial_units = initial_units
        self.surviving = surviving
        self.max_scenarios = max_scenarios
        self.sample_size = sample_size
        self.rng = rng
        self._maxb = {v: network.max_bucket(v, grid.x_min, initial_units * grid.step)
                      for v in network.nodes}
        self.responses = self._responses()
        self.states = self._states()

    def _responses(self) -> dict[int, list[tuple[int, ...]]]:
        net, grid = self.net, self.grid
        resp: dict[int, list[tuple[int, ...]]] = {}
        order = sorted((v for v in net.nodes if v != net.sender), key=lambda v: -net.distance[v])
        for c in order:
            mb = self._maxb[c]
            kids = net.targets[c]
            if not kids or mb == 0:
                resp[c] = [(1,) * (mb + 1)]
                continue
            found = set()
            for combo in itertools.product(*(resp[t] for t in kids)):
                per_bucket = []
                for b in range(1, mb + 1):
                    if (c, b) not in self.surviving:  # bucket never reached
                        per_bucket.append([1])
                        continue
                    counts = {1 + sum(f[grid.bucket(z)] for f, z in zip(combo, vec) if z != NO)
                              for vec in self.surviving[(c, b)]}
                    per_bucket.append(sorted(counts))
                for choice in itertools.product(*per_bucket):
                    found.add((1,) + choice)
            resp[c] = sorted(found)
        return resp

    def _child_counts(self, child: int, units: int) -> set[int]:
        if units == NO:
            return {0}
        b = self.grid.bucket(units)
        return {r[b] for r in self.responses[child]}

    def _states(self) -> dict[int, set[tuple[int, int]]]:
        net, grid = self.net, self.grid
        roots = list(net.adjacency[net.sender])
        root_counts = {r: {f[grid.bucket(self.initial_units)] for f in self.responses[r]}
                       for r in roots}
        states: dict[int, set[tuple[int, int]]] = {}
        for r in roots:
            others = _units_sum([root_counts[o] for o in roots if o != r])
            states[r] = {(self.initial_units, s) for s in others}
        order = sorted((v for v in net.nodes if v != net.sender), key=lambda v: net.distance[v])
        for i in order:
            kids = net.targets[i]
            if not kids:
                continue
            for c in kids:
                states.setdefault(c, set())
            for x, pi in states.get(i, ()):
                b = grid.bucket(x)
                if b == 0:
                    continue
                for vec in self.surviving[(i, b)]:
                    counts = [self._child_counts(t, z) for t, z in zip(kids, vec)]
                    for idx, c in enumerate(kids):
                        z = vec[idx]
                        if z == NO:
                            continue
                        rest = _units_sum(counts[:idx] + counts[idx + 1:])
                        states[c].update((z, pi + 1 + s) for s in rest)
        return states

    def scenarios(self, player: int, bucket: int):
        """Arrays describing every opponent scenario for ``player`` in ``bucket``.

        Returns ``(x, pi, combos, exact)`` where ``combos`` lists child-response
        index tuples.
        """
        grid = self.grid
        pairs = sorted(s for s in self.states.get(player, ()) if grid.bucket(s[0]) == bucket)
        kids = self.net.targets[player]
        sizes = [len(self.responses[t]) for t in kids]
        n_combo = 1
        for s in sizes:
            n_combo *= s
        exact = n_combo * max(len(pairs), 1) <= self.max_scenarios
        if exact:
            combos = list(itertools.product(*(range(s) for s in sizes)))
        else:
            combos = [tuple(self.rng.randrange(s) for s in sizes) for _ in range(self.sample_size)]
            # keep the extreme responses (all-min and all-max) in every sample
            combos.append(tuple(0 for _ in sizes))
            combos.append(tuple(s - 1 for s in sizes))
        return pairs, combos, exact

    def payoff_arrays(self, player: int, bucket: int, vectors: Sequence[tuple[int, ...]]):
        """Numerators and denominators of the player's utility, shape ``(len(vectors), scenarios)``."""
        pairs, combos, exact = self.scenarios(player, bucket)
        kids = self.net.targets[player]
        if not pairs:
            empty = np.zeros((len(vectors), 0), dtype=np.int64)
            return empty, empty, exact, [], []
        vec = np.array(vectors, dtype=np.int64).reshape(len(vectors), len(kids))
        count = np.zeros((len(combos), len(vectors)), dtype=np.int64)
        paid = np.zeros_like(count)
        grid = self.grid
        for t_idx, t in enumerate(kids):
            table = np.array(self.responses[t], dtype=np.int64)  # (n_resp, buckets)
            col = vec[:, t_idx]
            informed = col != NO
            bidx = np.where(informed, col // grid.res, 0)
            rows = np.array([c[t_idx] for c in combos], dtype=np.int64)
            n = table[rows][:, bidx] * informed  # (combos, vectors)
            count += n
            paid += n * np.where(informed, col, 0)
        xs = np.array([p[0] for p in pairs], dtype=np.int64)[:, None, None]
        pis = np.array([p[1] for p in pairs], dtype=np.int64)[:, None, None]
        num = xs * (1 + count[None]) - paid[None]
        den = pis + 1 + count[None]
        num = num.reshape(-1, len(vectors)).T
        den = den.reshape(-1, len(vectors)).T
        return num, den, exact, pairs, combos

    def dominated(self, player: int, bucket: int, vectors: Sequence[tuple[int, ...]],
                  candidates: Iterable[tuple[int, int]] | None = None):
        """Pairs ``(a, b)`` of indices with ``vectors[a]`` weakly dominated by ``vectors[b]``.

        With ``candidates`` only those pairs are tested and the full comparison
        is returned for each; otherwise all dominated ``a`` are found.
        """
        num, den, exact, pairs, combos = self.payoff_arrays(player, bucket, vectors)
        if candidates is not None:
            out = []
            for a, b in candidates:
                diff = num[a] * den[b] - num[b] * den[a]
                ok = diff.size > 0 and diff.max() <= 0 and diff.min() < 0
                worst = int(np.argmax(diff)) if diff.size else None
                out.append((a, b, bool(ok), worst))
            return out, exact, (num, den, pairs, combos)
        found = {}
        for a in range(len(vectors)):
            if num.shape[1] == 0:
                break
            diff = num[a][None, :] * den - num * den[a][None, :]
            weak = (diff.max(axis=1) <= 0) & (diff.min(axis=1) < 0)
            weak[a] = False
            hits = np.flatnonzero(weak)
            if hits.size:
                found[a] = [int(h) for h in hits]
        return found, exact

    def describe(self, player: int, pairs, combos, column: int) -> dict:
        per = len(combos)
        x, pi = pairs[column // per]
        combo = combos[column % per]
        kids = self.net.targets[player]
        return {
            "player": player,
            "received": frac_str(x * self.grid.step),
            "outside_aware": pi,
            "child_responses": {str(t): list(self.responses[t][r]) for t, r in zip(kids, combo)},
        }


@dataclass
class EliminationState:
    """Surviving action vectors per ``(player, bucket)`` and the elimination log."""
    network: Network
    x_min: Fraction
    resolution: int
    initial_reward: Fraction
    surviving: dict[tuple[int, int], list[tuple[int, ...]]]
    log: list[EliminationEvent] = field(default_factory=list)
    rounds: int = 0
    history: list[dict] = field(default_factory=list)
    labels: set = field(default_factory=set)

    @property
    def grid(self) -> _Grid:
        return _Grid(self.x_min, self.resolution)

    def survivors(self, player: int, bucket: int) -> list[tuple]:
        return [self.grid.to_frac(v) for v in self.surviving[(player, bucket)]]

    def fp_survives(self) -> bool:
        g = self.grid
        return all(g.fp(b, len(self.network.targets[p])) in vecs
                   for (p, b), vecs in self.surviving.items())

    def only_fp(self) -> bool:
        g = self.grid
        return all(vecs == [g.fp(b, len(self.network.targets[p]))]
                   for (p, b), vecs in self.surviving.items())

    def snapshot(self, round_no: int) -> dict:
        for snap in self.history:
            if snap["round"] == round_no:
                return snap["surviving"]
        raise KeyError(round_no)

    def jsonl(self) -> str:
        import json
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.log)


def _initial_state(network: Network, x_min: Fraction, resolution: int,
                   initial_reward: Fraction) -> EliminationState:
    grid = _Grid(x_min, resolution)
    surviving = {}
    for p in network.strategic_players(x_min, initial_reward):
        width = len(network.targets[p])
        top = network.max_bucket(p, x_min, initial_reward)
        # neighbours of the sender always receive the initial reward itself
        low = top if network.distance[p] == 1 else 1
        for b in range(low, top + 1):
            surviving[(p, b)] = sorted(itertools.product(grid.values(b), repeat=width))
    return EliminationState(network, x_min, resolution, initial_reward, surviving)


def _appendix_target(round_no: int, bucket: int, res: int):
    """Map a coordinate to its replacement in this round, or None to keep it."""
    if round_no == 1:
        return lambda z: 0 if (z == NO or 0 < z < res) else None
    if bucket < round_no:
        return None
    keep = (round_no - 1) * res

    def repl(z):
        if z == NO:
            return None
        if z % res == 0 and z // res <= round_no - 2:
            return keep
        if (round_no - 1) * res < z < round_no * res:
            return keep
        return None
    return repl


def _oracle(state: EliminationState, max_scenarios: int, sample_size: int,
            rng: random.Random) -> DominanceOracle:
    units = state.initial_reward / state.grid.step
    if units.denominator != 1:
        raise ModelError("initial reward must be a multiple of the grid step")
    return DominanceOracle(state.network, state.grid, int(units), state.surviving,
                           max_scenarios, sample_size, rng)


def _check_network(network: Network, enforce_shape: bool) -> None:
    if not network.is_tree:
        raise ModelError("iterated elimination is implemented for tree networks only")
    cfg = network.config
    if enforce_shape and cfg is not None and not cfg.f > cfg.d >= 3:
        raise ModelError(f"elimination fixtures need f > d >= 3, got d={cfg.d}, f={cfg.f}")


def iterated_elimination(network: Network, order: str = "appendix", seed: int | None = None,
                         x_min=None, initial_reward=None, resolution: int = 2,
                         max_scenarios: int = 2_000_000, sample_size: int = 4096,
                         enforce_shape: bool = True,
                         max_steps: int = 10_000) -> EliminationState:
    """Eliminate dominated strategies in the appendix order or a seeded random order.

    ``"appendix"`` replays the rounds: round 1 replaces decline and leaves below
    ``x_min`` by 0; round ``l >= 2`` lifts leaves of ``0..(l-2)*x_min`` and
    leaves strictly between ``(l-1)*x_min`` and ``l*x_min`` to
    ``(l-1)*x_min`` in every bucket ``>= l``.  Every step is verified; a failed
    step raises :class:`DominanceError` with the offending scenario.

    ``"random"`` repeatedly picks a random ``(player, bucket)`` and removes a
    random non-empty subset of its dominated vectors until nothing is
    dominated or ``max_steps`` is hit.
    """
    _check_network(network, enforce_shape)
    if x_min is None:
        if network.config is None:
            raise ModelError("x_min is required for general networks")
        x_min = network.config.x_min
    x_min = Fraction(x_min)
    initial = network.default_initial_reward() if initial_reward is None else Fraction(initial_reward)
    state = _initial_state(network, x_min, resolution, initial)
    rng = random.Random(seed if seed is not None else 0)
    if order == "appendix":
        _run_appendix(state, max_scenarios, sample_size, rng)
    elif order == "random":
        _run_random(state, max_scenarios, sample_size, rng, max_steps)
    else:
        raise ValueError(f"unknown elimination order {order!r}")
    return state


def _run_appendix(state: EliminationState, max_scenarios: int, sample_size: int,
                  rng: random.Random) -> None:
    grid = state.grid
    horizon = max((b for _, b in state.surviving), default=0)
    for round_no in range(1, horizon + 1):
        state.history.append({"round": round_no,
                              "surviving": {k: list(v) for k, v in state.surviving.items()}})
        oracle = _oracle(state, max_scenarios, sample_size, rng)
        removals = {}
        for (p, b), vecs in sorted(state.surviving.items()):
            repl = _appendix_target(round_no, b, grid.res)
            if repl is None:
                continue
            index = {v: i for i, v in enumerate(vecs)}
            pairs = []
            for v in vecs:
                w = tuple(z if repl(z) is None else repl(z) for z in v)
                if w != v:
                    if w not in index:
                        raise DominanceError(
                            f"dominator {grid.to_frac(w)} of player {p} bucket {b} already eliminated",
                            {"player": p, "bucket": b})
                    pairs.append((index[v], index[w]))
            if not pairs:
                continue
            results, exact, (num, den, sc_pairs, combos) = oracle.dominated(p, b, vecs, pairs)
            mode = "exact" if exact else "sampled"
            state.labels.add(mode)
            gone = set()
            for a, w, ok, worst in results:
                if not ok:
                    ce = {"round": round_no, "player": p, "bucket": b,
                          "eliminated": [frac_str(z) for z in grid.to_frac(vecs[a])],
                          "dominator": [frac_str(z) for z in grid.to_frac(vecs[w])]}
                    if worst is not None:
                        ce["scenario"] = oracle.describe(p, sc_pairs, combos, worst)
                    raise DominanceError(
                        f"round {round_no}: {ce['eliminated']} is not dominated by "
                        f"{ce['dominator']} for player {p} in bucket {b}", ce)
                state.log.append(EliminationEvent(round_no, p, b, grid.to_frac(vecs[a]),
                                                  grid.to_frac(vecs[w]), mode))
                gone.add(a)
            removals[(p, b)] = gone
        for key, gone in removals.items():
            state.surviving[key] = [v for i, v in enumerate(state.surviving[key]) if i not in gone]
        state.rounds = round_no
        if not state.fp_survives():
            raise DominanceError(f"full propagation eliminated in round {round_no}", {"round": round_no})


def _run_random(state: EliminationState, max_scenarios: int, sample_size: int,
                rng: random.Random, max_steps: int) -> None:
    grid = state.grid
    step = 0
    stable: set = set()
    oracle = None
    while step < max_steps:
        live = [k for k in sorted(state.surviving) if k not in stable and len(state.surviving[k]) > 1]
        if not live:
            break
        key = rng.choice(live)
        if oracle is None:
            oracle = _oracle(state, max_scenarios, sample_size, rng)
        vecs = state.surviving[key]
        found, exact = oracle.dominated(key[0], key[1], vecs)
        if not found:
            stable.add(key)
            continue
        step += 1
        state.history.append({"round": step,
                              "surviving": {k: list(v) for k, v in state.surviving.items()}})
        mode = "exact" if exact else "sampled"
        state.labels.add(mode)
        dominated = sorted(found)
        chosen = rng.sample(dominated, rng.randint(1, len(dominated)))
        # a removed vector is always dominated by some undominated (hence kept) one
        undominated = [i for i in range(len(vecs)) if i not in found]
        for a in sorted(chosen):
            keepers = [w for w in found[a] if w in undominated] or found[a]
            state.log.append(EliminationEvent(step, key[0], key[1], grid.to_frac(vecs[a]),
                                              grid.to_frac(vecs[keepers[0]]), mode))
        drop = set(chosen)
        state.surviving[key] = [v for i, v in enumerate(vecs) if i not in drop]
        state.rounds = step
        stable.clear()
        oracle = None


def order_is_almost_monotonic(log: Sequence[EliminationEvent], x_min) -> bool:
    """Check that withholding-heavier vectors never outlive lighter ones by a full ``x_min``.

    For two eliminated vectors of the same player and bucket, if the smallest
    leave of the first is at least ``x_min`` below the second's (decline counts
    as below everything), the first must not be eliminated in a later round.
    """
    x_min = Fraction(x_min)
    groups: dict[tuple[int, int], list[EliminationEvent]] = {}
    for e in log:
        groups.setdefault((e.player, e.bucket), []).append(e)

    def low(vec):
        return None if any(z is DECLINE for z in vec) else min(vec)

    for events in groups.values():
        mins = [(low(e.eliminated), e.round) for e in events]
        for m1, r1 in mins:
            for m2, r2 in mins:
                if r1 <= r2 or m2 is None:
                    continue
                if m1 is None or m1 + x_min <= m2:
                    return False
    return True


@dataclass
class Reverification:
    ok: bool
    mode: str
    profiles: int
    strict: int
    violation: dict | None = None


def _strategy_count(snapshot, player: int) -> int:
    total = 1
    for (p, _), vecs in snapshot.items():
        if p != player:
            total *= len(vecs)
    return total


def reverify(state: EliminationState, event: EliminationEvent, samples: int = 64,
             seed: int = 0, exhaustive_limit: int = 10 ** 6) -> Reverification:
    """Re-check one logged elimination with full propagation runs.

    Opponent profiles are drawn from the surviving sets in force when the
    elimination happened: exhaustively when there are at most
    ``exhaustive_limit`` of them, otherwise ``samples`` seeded draws, half of
    them steered so the player lands in the event's bucket.
    """
    net, grid = state.network, state.grid
    snap = state.snapshot(event.round)
    player, bucket = event.player, event.bucket
    others = sorted({p for p, _ in snap if p != player})
    keys = sorted(k for k in snap if k[0] != player)
    conv: dict[tuple[int, ...], tuple] = {}

    def frac(vec):
        out = conv.get(vec)
        if out is None:
            out = conv[vec] = grid.to_frac(vec)
        return out

    def evaluate(tables) -> tuple[Fraction, Fraction]:
        base = StrategyRule(state.x_min, "fp", tables)
        u_bad = utility(propagate(net, base.with_actions(player, {bucket: event.eliminated}),
                                  state.initial_reward), player)
        u_good = utility(propagate(net, base.with_actions(player, {bucket: event.dominator}),
                                   state.initial_reward), player)
        return u_bad, u_good

    total = _strategy_count(snap, player)
    result = Reverification(True, "exhaustive" if total <= exhaustive_limit else "sampled", 0, 0)

    def record(tables) -> bool:
        u_bad, u_good = evaluate(tables)
        result.profiles += 1
        if u_bad > u_good:
            result.ok = False
            result.violation = {
                "player": player, "bucket": bucket,
                "profile": {str(p): {str(b): [frac_str(z) for z in v] for b, v in t.items()}
                            for p, t in tables.items()},
                "eliminated_utility": frac_str(u_bad), "dominator_utility": frac_str(u_good)}
            return False
        if u_bad < u_good:
            result.strict += 1
        return True

    if result.mode == "exhaustive":
        for choice in itertools.product(*(snap[k] for k in keys)):
            tables: dict[int, dict[int, tuple]] = {}
            for (p, b), vec in zip(keys, choice):
                tables.setdefault(p, {})[b] = frac(vec)
            if not record(tables):
                break
        return result

    rng = random.Random((seed, player, bucket, event.round, event.eliminated).__hash__())
    path = _path_to(net, player)
    for i in range(samples):
        tables = {p: {} for p in others}
        for (p, b) in keys:
            tables[p][b] = frac(rng.choice(snap[(p, b)]))
        if i % 2 == 0:
            _steer(state, snap, path, player, bucket, tables, rng, frac)
        if not record(tables):
            break
    return result


def _path_to(net: Network, node: int) -> list[int]:
    path = [node]
    dist = net.distance
    while dist[path[-1]] > 1:
        v = path[-1]
        path.append(next(u for u in net.adjacency[v] if dist[u] == dist[v] - 1))
    return list(reversed(path))


def _steer(state: EliminationState, snap, path: list[int], player: int, bucket: int,
           tables, rng: random.Random, frac) -> None:
    """Pick ancestor actions so that ``player`` receives a reward in ``bucket``."""
    grid, net = state.grid, state.network
    good = [set() for _ in path]
    good[-1] = {bucket}
    for t in range(len(path) - 2, -1, -1):
        a, nxt = path[t], path[t + 1]
        idx = net.targets[a].index(nxt)
        for (p, b), vecs in snap.items():
            if p == a and any(v[idx] != NO and grid.bucket(v[idx]) in good[t + 1] for v in vecs):
                good[t].add(b)
    x = state.initial_reward
    for t in range(len(path) - 1):
        a, nxt = path[t], path[t + 1]
        b = int(x // state.x_min)
        if b not in good[t]:
            return
        idx = net.targets[a].index(nxt)
        options = [v for v in snap[(a, b)] if v[idx] != NO and grid.bucket(v[idx]) in good[t + 1]]
        vec = rng.choice(options)
        tables[a][b] = frac(vec)
        x = vec[idx] * grid.step
