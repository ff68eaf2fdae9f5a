import logging
from fractions import Fraction

import pytest

from lottoprop import (
    DECLINE,
    GameConfig,
    ModelError,
    build_dary_forest,
    decline_strategy,
    fp_strategy,
    propagate,
    utility,
)
from lottoprop.equilibrium import (
    CompositionError,
    SubgameContext,
    action_grid,
    best_response,
    coalition_utilities,
    complete_graph,
    composition_vector,
    compositions,
    connected_coalitions,
    counterexample_profile,
    fp_composition,
    is_connected_coalition_proof,
    is_nash,
    lemma3_step_check,
    lemma3_threshold,
    player_graph,
    subgame_network,
    subgame_utility,
)

EPS = [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]


def test_compositions_count():
    from math import comb
    for d in (3, 4):
        for k in range(1, 5):
            comps = list(compositions(d, k))
            assert len(comps) == len(set(comps)) == comb(d + k, k)
            assert all(sum(c) == d and len(c) == k + 1 for c in comps)


def test_threshold_values():
    assert lemma3_threshold(3, 2) == 15
    assert lemma3_threshold(3, 3) == 44


def test_subgame_utility_examples():
    ctx = SubgameContext(3, 1, Fraction(1, 2), 10)
    assert subgame_utility(ctx, (0, 3)) == Fraction(3, 7)
    ctx = SubgameContext(4, 3, Fraction(1, 4), 9, Fraction(1, 3))
    assert subgame_utility(ctx, (4, 0, 0, 0)) == ctx.x / 10


def test_subgame_utility_rejects_bad_compositions():
    ctx = SubgameContext(3, 2, 0, 15)
    with pytest.raises(CompositionError):
        subgame_utility(ctx, (0, 3))
    with pytest.raises(CompositionError):
        subgame_utility(ctx, (1, 1, 2))
    with pytest.raises(ModelError):
        SubgameContext(3, 0, 0, 1)
    with pytest.raises(ModelError):
        SubgameContext(3, 1, 1, 1)


@pytest.mark.parametrize("pi0", [0, 15, 40])
@pytest.mark.parametrize("eps", EPS)
def test_closed_form_matches_simulation(pi0, eps):
    ctx = SubgameContext(3, 2, eps, pi0, Fraction(1, 2))
    net, initial = subgame_network(ctx)
    for comp in compositions(3, 2):
        rule = fp_strategy(x_min=ctx.x_min).with_actions(1, {2: composition_vector(comp, ctx.x_min)})
        out = propagate(net, rule, initial)
        assert utility(out, 1) == subgame_utility(ctx, comp), comp


def test_leave_zero_counts_like_one_level():
    # leave-0 informs the child without letting it forward: same as a depth-1 target
    ctx = SubgameContext(3, 2, 0, 15)
    net, initial = subgame_network(ctx)
    zero = fp_strategy(x_min=1).with_actions(1, {2: (0, 0, 1)})
    assert utility(propagate(net, zero, initial), 1) == subgame_utility(ctx, (0, 2, 1))


def test_lemma3_examples(caplog):
    assert lemma3_step_check(SubgameContext(3, 2, 0, 15), (1, 2, 0), 1)
    assert lemma3_step_check(SubgameContext(3, 1, 0, 3), (3, 0), 0)
    with caplog.at_level(logging.INFO, logger="lottoprop.equilibrium"):
        lemma3_step_check(SubgameContext(3, 3, 0, 0), (0, 0, 3, 0), 2)
    assert "outside precondition" in caplog.text
    with pytest.raises(CompositionError):
        lemma3_step_check(SubgameContext(3, 2, 0, 15), (0, 0, 3), 0)


def test_lemma3_can_fail_below_threshold():
    ctx = SubgameContext(3, 3, 0, 0)
    results = [lemma3_step_check(ctx, c, l) for c in compositions(3, 3) for l in range(3) if c[l]]
    assert not all(results)


def test_best_response_single_subtree_k2():
    ctx = SubgameContext(3, 2, 0, 15)
    net, initial = subgame_network(ctx)
    br = best_response(net, fp_strategy(x_min=1), 1, initial_reward=initial)
    assert br.bucket == 2 and br.unique
    assert br.argmax == ((1, 1, 1),)
    assert br.evaluated == len(action_grid(2, 1)) ** 3


def test_best_response_k3_matches_composition_search():
    ctx = SubgameContext(3, 3, 0, lemma3_threshold(3, 3) + 5)
    net, initial = subgame_network(ctx)
    br = best_response(net, fp_strategy(x_min=1), 1, grid="integer", initial_reward=initial)
    assert br.argmax == ((2, 2, 2),)
    best = max(compositions(3, 3), key=lambda c: subgame_utility(ctx, c))
    assert best == fp_composition(3, 3)
    assert br.value == subgame_utility(ctx, best)


def test_best_response_bucket_zero_is_decline():
    net = build_dary_forest(GameConfig(3, 3, 2))
    rule = fp_strategy(net).with_actions(1, {2: (0, 0, 0)})
    br = best_response(net, rule, 4)
    assert br.bucket == 0 and br.argmax == ((DECLINE,) * 3,) and br.evaluated == 1
    with pytest.raises(ModelError):
        best_response(net, rule, 4, bucket=1)


def test_fp_is_nash_small_forest():
    net = build_dary_forest(GameConfig(3, 3, 2))
    rep = is_nash(net, fp_strategy(net))
    assert rep.holds and rep.players_checked == 12 and not rep.truncated


def test_no_propagation_is_not_nash():
    net = build_dary_forest(GameConfig(3, 3, 2))
    rep = is_nash(net, decline_strategy(net.config.x_min))
    assert not rep.holds
    assert rep.witness["player"] in (1, 2, 3)
    assert Fraction(rep.witness["delta"]) > 0


def test_nash_truncation_is_reported():
    net = build_dary_forest(GameConfig(3, 3, 2))
    rep = is_nash(net, fp_strategy(net), max_vectors=5)
    assert rep.holds and len(rep.truncated) == 12 and rep.players_checked == 0


def test_connected_coalitions_on_path():
    adj = {1: {2}, 2: {1, 3}, 3: {2}}
    sets = connected_coalitions(adj, 3)
    assert [sorted(s) for s in sets] == [[1], [2], [3], [1, 2], [2, 3], [1, 2, 3]]
    assert len(connected_coalitions(complete_graph([1, 2, 3, 4]), 2)) == 4 + 6


def test_roots_coalition_breaks_fp():
    net = build_dary_forest(GameConfig(3, 3, 2))
    fp = fp_strategy(net)
    roots = sorted(net.adjacency[0])
    hoard = fp.with_many({r: {2: (DECLINE,) * 3} for r in roots})
    assert set(coalition_utilities(net, hoard, roots).values()) == {Fraction(1, 3)}
    assert utility(propagate(net, fp), 1) == Fraction(7, 39)
    rep = is_connected_coalition_proof(net, fp, complete_graph(roots), 3)
    assert not rep.holds
    after = {int(m): Fraction(v) for m, v in rep.witness["utility_after"].items()}
    before = {int(m): Fraction(v) for m, v in rep.witness["utility_before"].items()}
    assert all(after[m] >= before[m] for m in after) and any(after[m] > before[m] for m in after)


def test_fp_coalition_proof_tiny_forest():
    net = build_dary_forest(GameConfig(3, 3, 1))
    rep = is_connected_coalition_proof(net, fp_strategy(net), player_graph(net), 3, grid="half")
    assert rep.holds and rep.coalitions_checked == 3


def test_coalition_truncation_is_reported():
    net = build_dary_forest(GameConfig(3, 3, 2))
    rep = is_connected_coalition_proof(net, fp_strategy(net), player_graph(net), 2, max_profiles=5)
    assert rep.holds and rep.truncated


def test_counterexample_profile_shape():
    net = build_dary_forest(GameConfig(4, 5, 2))
    rule = counterexample_profile(net)
    assert rule.action(net, 1, 2) == (0, 0, 0, 0)
    assert rule.action(net, 6, 1) == (DECLINE,) * 4
    assert rule.action(net, 2, 2) == (Fraction(1, 2),) * 4
    with pytest.raises(ModelError):
        counterexample_profile(build_dary_forest(GameConfig(3, 5, 2)))
