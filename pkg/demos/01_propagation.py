"""Full propagation on a small d-ary forest, then one player keeps more."""
from fractions import Fraction

from lottoprop import GameConfig, build_dary_forest, fp_strategy, propagate, utility

net = build_dary_forest(GameConfig(d=3, f=3, H=2))
fp = fp_strategy(net)
out = propagate(net, fp)
print(f"{out.aware_count} players aware; root 1 gets {utility(out, 1)}")

greedy = fp.with_actions(1, {2: (Fraction(0),) * 3})
out = propagate(net, greedy)
print(f"root 1 leaves 0 to its children: {out.aware_count} aware, root 1 gets {utility(out, 1)}")
