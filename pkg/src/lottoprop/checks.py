"""Exact falsification sweeps for the closed-form inequalities behind the
equilibrium results.

Every sweep returns a :class:`SweepReport`.  Margins are ``lhs - rhs`` of the
inequality being tested, so a non-negative (or positive, for strict
inequalities) minimum margin means the sweep found no counterexample.
Points where a strict inequality holds only with equality on a known boundary
are listed under ``boundary`` instead of ``violations``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .equilibrium import (
    SubgameContext,
    compositions,
    fp_composition,
    lemma3_step_check,
    lemma3_threshold,
    subgame_utility,
)
from .model import DECLINE, GameConfig, StrategyRule, build_dary_forest, geometric_count, propagate, utility
from .serialization import frac_str

EPS_GRID = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


@dataclass
class SweepReport:
    claim: str
    grid: dict
    checked: int = 0
    violations: list = field(default_factory=list)
    margin: Fraction | None = None
    boundary: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def note(self, margin: Fraction) -> None:
        self.checked += 1
        if self.margin is None or margin < self.margin:
            self.margin = margin

    def to_dict(self) -> dict:
        return {"claim": self.claim, "grid": self.grid, "checked": self.checked,
                "holds": self.holds, "violations": self.violations,
                "margin": frac_str(self.margin), "boundary": self.boundary}


def iroot(n: int, q: int) -> int:
    """Largest integer ``r`` with ``r**q <= n``."""
    if n < 0 or q < 1:
        raise ValueError("iroot needs n >= 0 and q >= 1")
    if n < 2:
        return n
    r = 1 << ((n.bit_length() + q - 1) // q)  # overestimate
    while True:
        s = ((q - 1) * r + n // r ** (q - 1)) // q
        if s >= r:
            break
        r = s
    while r ** q > n:
        r -= 1
    while (r + 1) ** q <= n:
        r += 1
    return r


def power_bounds(d: int, y: Fraction, scale: int) -> tuple[Fraction, Fraction]:
    """Rationals ``lo <= d**y <= hi`` with ``hi - lo <= 1/scale``."""
    y = Fraction(y)
    if y.denominator == 1:
        v = Fraction(d) ** y.numerator
        return v, v
    p, q = y.numerator, y.denominator
    r = iroot(d ** p * scale ** q, q)
    lo = Fraction(r, scale)
    hi = lo if r ** q == d ** p * scale ** q else Fraction(r + 1, scale)
    return lo, hi


def _fbar_bounds(d: int, k: int, y: Fraction, scale: int) -> tuple[Fraction, Fraction]:
    lo, hi = power_bounds(d, y, scale)
    w = (k + 1 - y) / (d - 1)
    return w * (lo - 1), w * (hi - 1)


def fbar(d: int, k: int, y) -> Fraction:
    """``(k + 1 - y) * G(y)`` for integer ``y``."""
    y = Fraction(y)
    if y.denominator != 1:
        raise ValueError("exact fbar needs an integer argument; use power_bounds otherwise")
    return (k + 1 - y) * geometric_count(d, int(y))


def check_claim1(d_range: Iterable[int] = range(3, 7), k_range: Iterable[int] = range(1, 7),
                 step: Fraction = Fraction(1, 8)) -> SweepReport:
    """Monotonicity of ``(k+1-y)(d^y-1)/(d-1)`` on ``[0, k)`` and its bound by ``G(k)``.

    Successive grid values are compared through exact interval bounds on
    ``d^y``; the interval is refined until the comparison is decided.
    """
    step = Fraction(step)
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("claim1", {"d": d_range, "k": k_range, "step": frac_str(step)})
    for d in d_range:
        for k in k_range:
            n_points = int(k / step)
            ys = [i * step for i in range(n_points)]
            gk = geometric_count(d, k)
            for a, b in zip(ys, ys[1:]):
                scale = 1 << 20
                while True:
                    lo_a, hi_a = _fbar_bounds(d, k, a, scale)
                    lo_b, hi_b = _fbar_bounds(d, k, b, scale)
                    if hi_a <= lo_b or lo_a > hi_b or scale > 1 << 200:
                        break
                    scale <<= 20
                if lo_a > hi_b:
                    rep.violations.append({"d": d, "k": k, "y": frac_str(a), "next": frac_str(b)})
                rep.note(lo_b - hi_a)
            lo_last, hi_last = _fbar_bounds(d, k, ys[-1], 1 << 40)
            if hi_last > gk:
                rep.violations.append({"d": d, "k": k, "y": frac_str(ys[-1]), "bound": gk})
    return rep


def claim2_margin(ctx: SubgameContext, comp: Sequence[int]) -> Fraction:
    """``(1 + 2 eps) W - 2 Q / x_min`` for the subgame closed form."""
    d, k = ctx.d, ctx.k
    w = ctx.pi0 + 1 + sum(comp[j] * geometric_count(d, j) for j in range(1, k + 1))
    q = ctx.x + sum(comp[j] * geometric_count(d, j) * (ctx.x - (j - 1) * ctx.x_min)
                    for j in range(1, k + 1))
    return (1 + 2 * ctx.eps) * w - 2 * q / ctx.x_min


def check_claim2(d_range: Iterable[int] = (3, 4, 5), k_range: Iterable[int] = range(2, 6),
                 eps_grid: Sequence[Fraction] = EPS_GRID, pi0_offsets: Sequence[int] = (0, 1, 5)) -> SweepReport:
    """Strict inequality over every composition that still has a unit below depth ``k``.

    The full-propagation composition itself can meet the inequality with
    equality (at ``eps = 0`` and the threshold audience); such points are
    reported as boundary cases since no deepening move starts from them.
    """
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("claim2", {"d": d_range, "k": k_range, "eps": [frac_str(e) for e in eps_grid],
                                 "pi0_offsets": list(pi0_offsets)})
    for d in d_range:
        for k in k_range:
            for eps in eps_grid:
                for off in pi0_offsets:
                    ctx = SubgameContext(d, k, eps, lemma3_threshold(d, k) + off)
                    for comp in compositions(d, k):
                        m = claim2_margin(ctx, comp)
                        point = {"d": d, "k": k, "eps": frac_str(eps), "pi0": ctx.pi0,
                                 "comp": list(comp), "margin": frac_str(m)}
                        if comp == fp_composition(d, k):
                            if m <= 0:
                                rep.boundary.append(point)
                            continue
                        rep.note(m)
                        if m <= 0:
                            rep.violations.append(point)
    return rep


def claim3_sum(d: int, k: int, comp: Sequence[int]) -> int:
    """``sum_i d_i G(i) (2k - 2i + 1)`` over ``comp = (d_1, ..., d_k)``."""
    return sum(c * geometric_count(d, i) * (2 * k - 2 * i + 1) for i, c in enumerate(comp, start=1))


def check_claim3(d_range: Iterable[int] = (3, 4, 5), k_range: Iterable[int] = range(1, 6)) -> SweepReport:
    """``sum_i d_i G(i)(2k-2i+1) < d G(k)`` for all ``d_1 + ... + d_k <= d``.

    Putting every unit at depth ``k`` gives equality; those points go to
    ``boundary`` and every other composition must be strict.
    """
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("claim3", {"d": d_range, "k": k_range})
    for d in d_range:
        for k in k_range:
            rhs = d * geometric_count(d, k)
            for total in range(d + 1):
                for comp in compositions(total, k - 1):
                    comp = tuple(comp)
                    m = Fraction(rhs - claim3_sum(d, k, comp))
                    point = {"d": d, "k": k, "comp": list(comp), "margin": frac_str(m)}
                    if m < 0:
                        rep.violations.append(point)
                    elif m == 0:
                        (rep.boundary if comp[-1] == d else rep.violations).append(point)
                    if comp[-1] != d:
                        rep.note(m)
    return rep


def eq2_links(f: int, d: int, k: int) -> list[tuple[str, Fraction, Fraction, bool]]:
    """Each link ``(name, lhs, rhs, strict)`` of the chain bounding the outside audience."""
    g = lambda j: geometric_count(d, j)  # noqa: E731
    return [
        ("(f-1)G(k+1) >= d^(k+1)-1", Fraction((f - 1) * g(k + 1)), Fraction(d ** (k + 1) - 1), False),
        ("d^(k+1)-1 > d(d^k-1)", Fraction(d ** (k + 1) - 1), Fraction(d * (d ** k - 1)), True),
        ("d(d^k-1) >= (d+1)/(d-1)(d^k-1)", Fraction(d * (d ** k - 1)), Fraction((d + 1) * (d ** k - 1), d - 1), False),
        ("(d+1)G(k) >= dG(k)+2k-1", Fraction((d + 1) * g(k)), Fraction(d * g(k) + 2 * k - 1), False),
        ("G(k) >= 2k-1", Fraction(g(k)), Fraction(2 * k - 1), False),
    ]


def check_eq2(f_range: Iterable[int] = range(3, 9), d_range: Iterable[int] = range(3, 8),
              k_range: Iterable[int] = range(1, 13)) -> SweepReport:
    f_range, d_range, k_range = list(f_range), list(d_range), list(k_range)
    rep = SweepReport("eq2", {"f": f_range, "d": d_range, "k": k_range})
    for f in f_range:
        for d in d_range:
            if f < d:
                continue
            for k in k_range:
                for name, lhs, rhs, strict in eq2_links(f, d, k):
                    m = lhs - rhs
                    rep.note(m)
                    if m < 0 or (strict and m == 0):
                        rep.violations.append({"f": f, "d": d, "k": k, "link": name, "margin": frac_str(m)})
                # the audience bound used when f > d
                if f > d:
                    m = Fraction((f - 1) * geometric_count(d, k + 1) - (d * geometric_count(d, k) + 2 * k - 1))
                    if m <= 0:
                        rep.violations.append({"f": f, "d": d, "k": k, "link": "(f-1)G(k+1) > dG(k)+2k-1",
                                               "margin": frac_str(m)})
    return rep


def intro_gain(n_prime: int, c: Fraction, friend_counts: Sequence[int]) -> Fraction:
    """Sharing ``c`` minus not sharing, for a player whose friends have ``friend_counts`` friends."""
    total = sum(friend_counts)
    return Fraction(1 + (1 - c) * total, total + n_prime) - Fraction(1 + len(friend_counts), n_prime)


def check_intro_inequality(n_range: Iterable[int] = range(2, 21), f_range: Iterable[int] = range(1, 6),
                           c_grid: Sequence[Fraction] = tuple(Fraction(i, 8) for i in range(1, 8)),
                           extra: int = 4) -> SweepReport:
    """Sweep of the sharing-beats-hoarding inequality and of ``(1+f)/(n+f) > 1/n``.

    The audience ``n'`` counts the ``n`` initial players plus the player's
    ``f_i`` friends.  Friend counts ``f_j`` range from the smallest integer
    above the stated threshold ``(n+1)/(n(1-c)-1)`` to ``extra`` beyond it,
    all equal.  Points where the threshold is undefined (``n(1-c) <= 1``)
    are skipped.
    """
    n_range, f_range = list(n_range), list(f_range)
    rep = SweepReport("intro", {"n": n_range, "f_i": f_range, "c": [frac_str(c) for c in c_grid],
                                "n_prime": "n + f_i", "extra": extra})
    for n in n_range:
        for fi in f_range:
            m = Fraction(1 + fi, n + fi) - Fraction(1, n)
            if m <= 0:
                rep.violations.append({"eq": "(1+f)/(n+f) > 1/n", "n": n, "f_i": fi, "margin": frac_str(m)})
            for c in c_grid:
                c = Fraction(c)
                denom = n * (1 - c) - 1
                if denom <= 0:
                    continue
                threshold = Fraction(n + 1) / denom
                start = int(threshold) + 1
                for fj in range(start, start + extra + 1):
                    gain = intro_gain(n + fi, c, [fj] * fi)
                    rep.note(gain)
                    if gain <= 0:
                        rep.violations.append({"eq": "sharing", "n": n, "f_i": fi, "c": frac_str(c),
                                               "f_j": fj, "margin": frac_str(gain)})
    return rep


def check_lemma3(d_range: Iterable[int] = (3, 4, 5), k_range: Iterable[int] = range(1, 6),
                 eps_grid: Sequence[Fraction] = EPS_GRID, pi0_offsets: Sequence[int] = (0,)) -> SweepReport:
    """Every one-unit deepening move raises the subtree root's utility at the threshold audience."""
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("lemma3", {"d": d_range, "k": k_range, "eps": [frac_str(e) for e in eps_grid],
                                 "pi0_offsets": list(pi0_offsets)})
    for d, k, eps, off in itertools.product(d_range, k_range, eps_grid, pi0_offsets):
        ctx = SubgameContext(d, k, eps, lemma3_threshold(d, k) + off)
        for comp in compositions(d, k):
            base = subgame_utility(ctx, comp)
            for l in range(k):
                if comp[l] == 0:
                    continue
                moved = list(comp)
                moved[l] -= 1
                moved[l + 1] += 1
                m = subgame_utility(ctx, moved) - base
                rep.note(m)
                if not lemma3_step_check(ctx, comp, l):
                    rep.violations.append({"d": d, "k": k, "eps": frac_str(eps), "pi0": ctx.pi0,
                                           "comp": list(comp), "l": l, "margin": frac_str(m)})
    return rep


def check_corollary1(d_range: Iterable[int] = (3, 4), k_range: Iterable[int] = range(1, 5),
                     eps_grid: Sequence[Fraction] = EPS_GRID) -> SweepReport:
    """Full propagation is the unique best composition at the threshold audience."""
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("corollary1", {"d": d_range, "k": k_range, "eps": [frac_str(e) for e in eps_grid]})
    for d, k, eps in itertools.product(d_range, k_range, eps_grid):
        ctx = SubgameContext(d, k, eps, lemma3_threshold(d, k))
        fp = fp_composition(d, k)
        u_fp = subgame_utility(ctx, fp)
        runner_up = max(subgame_utility(ctx, c) for c in compositions(d, k) if c != fp)
        m = u_fp - runner_up
        rep.note(m)
        if m <= 0:
            rep.violations.append({"d": d, "k": k, "eps": frac_str(eps), "margin": frac_str(m)})
    return rep


def check_lemma2(d_range: Iterable[int] = (3, 4), k_range: Iterable[int] = range(1, 5),
                 eps_grid: Sequence[Fraction] = EPS_GRID) -> SweepReport:
    """Root utility is nondecreasing in the referral count of any informed child.

    For each composition and each child targeted at depth ``j``, that child's
    subtree count ranges over ``1..G(j)`` with the rest of the subtree fixed
    at full propagation.
    """
    d_range, k_range = list(d_range), list(k_range)
    rep = SweepReport("lemma2", {"d": d_range, "k": k_range, "eps": [frac_str(e) for e in eps_grid]})
    for d, k, eps in itertools.product(d_range, k_range, eps_grid):
        ctx = SubgameContext(d, k, eps, lemma3_threshold(d, k))
        x = ctx.x
        for comp in compositions(d, k):
            q = x + sum(comp[j] * geometric_count(d, j) * (x - (j - 1)) for j in range(1, k + 1))
            w = ctx.pi0 + 1 + sum(comp[j] * geometric_count(d, j) for j in range(1, k + 1))
            for j in range(1, k + 1):
                if comp[j] == 0:
                    continue
                g = geometric_count(d, j)
                q0, w0 = q - g * (x - (j - 1)), w - g
                prev = None
                for delta in range(1, g + 1):
                    u = (q0 + delta * (x - (j - 1))) / (w0 + delta)
                    if prev is not None:
                        rep.note(u - prev)
                        if u < prev:
                            rep.violations.append({"d": d, "k": k, "eps": frac_str(eps),
                                                   "comp": list(comp), "j": j, "delta": delta})
                    prev = u
    return rep


LEMMA1_FORESTS = ((3, 3, 2), (3, 3, 3), (3, 5, 2), (3, 5, 3), (4, 5, 2), (4, 5, 3))


def _random_forest_rule(net, rng: random.Random, denominator: int, decline_prob: float) -> StrategyRule:
    x_min = net.config.x_min
    tables = {}
    for p in net.nodes:
        width = len(net.targets[p])
        if p == net.sender or not width:
            continue
        top = net.max_bucket(p, x_min, net.config.initial_reward)
        tables[p] = {b: tuple(DECLINE if rng.random() < decline_prob
                              else Fraction(rng.randint(0, (b - 1) * denominator), denominator) * x_min
                              for _ in range(width))
                     for b in range(1, top + 1)}
    return StrategyRule(x_min, "fp", tables)


def _decline_flips(net, rule, out):
    """Every ``(player, bucket, slot)`` where an aware player declines a neighbour."""
    x_min = rule.x_min
    for p in sorted(out.aware):
        b = int(out.reward[p] // x_min)
        if b < 1:
            continue
        for slot, z in enumerate(rule.action(net, p, b)):
            if z is DECLINE:
                yield p, b, slot


def _flip_margin(net, rule, out, p, b, slot, rep, where):
    vec = list(rule.action(net, p, b))
    vec[slot] = Fraction(0)
    after = propagate(net, rule.with_actions(p, {b: vec}))
    m = utility(after, p) - utility(out, p)
    child = net.targets[p][slot]
    joined = child not in out.aware and after.parent.get(child) == p
    rep.note(m)
    if m < 0 or (joined and m == 0):
        rep.violations.append({**where, "player": p, "bucket": b, "neighbour": child,
                               "joined": joined, "margin": frac_str(m)})


def check_lemma1(samples: int = 10_000, seed: int = 0, forests: Sequence = LEMMA1_FORESTS,
                 exhaustive: Sequence = ((3, 3, 1),), denominator: int = 4,
                 decline_prob: float = 0.3) -> SweepReport:
    """Turning one Decline into leave-0 never lowers the player's utility.

    ``samples`` random profiles are spread round-robin over ``forests``; each
    contributes one flip at a random aware player that declines somebody.
    Leaves are random multiples of ``x_min / denominator``.  On every forest in
    ``exhaustive`` all Decline/leave-0 profiles are enumerated and every flip
    is checked.  When the flipped neighbour joins through the player the gain
    must be strict.
    """
    rng = random.Random(seed)
    rep = SweepReport("lemma1", {"samples": samples, "seed": seed, "forests": [list(f) for f in forests],
                                 "exhaustive": [list(f) for f in exhaustive], "denominator": denominator})
    nets = [build_dary_forest(GameConfig(*f)) for f in forests]
    drawn = 0
    while drawn < samples:
        net = nets[drawn % len(nets)]
        rule = _random_forest_rule(net, rng, denominator, decline_prob)
        out = propagate(net, rule)
        flips = list(_decline_flips(net, rule, out))
        if not flips:
            continue
        p, b, slot = rng.choice(flips)
        _flip_margin(net, rule, out, p, b, slot, rep, {"forest": list(forests[drawn % len(nets)])})
        drawn += 1
    for f in exhaustive:
        net = build_dary_forest(GameConfig(*f))
        x_min = net.config.x_min
        keys = [(p, b) for p in net.nodes if p != net.sender and net.targets[p]
                for b in range(1, net.max_bucket(p, x_min, net.config.initial_reward) + 1)]
        if any(b > 1 for _, b in keys):
            raise ValueError("exhaustive decline-flip enumeration is limited to H = 1 forests")
        slots = [(p, b, i) for p, b in keys for i in range(len(net.targets[p]))]
        for bits in itertools.product((DECLINE, Fraction(0)), repeat=len(slots)):
            tables: dict = {}
            for (p, b, i), z in zip(slots, bits):
                tables.setdefault(p, {}).setdefault(b, []).append(z)
            rule = StrategyRule(x_min, "fp", tables)
            out = propagate(net, rule)
            for p, b, slot in _decline_flips(net, rule, out):
                _flip_margin(net, rule, out, p, b, slot, rep, {"forest": list(f), "exhaustive": True})
    return rep


SWEEPS = {
    "lemma1": check_lemma1,
    "1": check_claim1,
    "2": check_claim2,
    "3": check_claim3,
    "eq2": check_eq2,
    "intro": check_intro_inequality,
    "lemma3": check_lemma3,
    "lemma2": check_lemma2,
    "corollary1": check_corollary1,
}
