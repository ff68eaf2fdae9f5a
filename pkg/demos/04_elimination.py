"""Iterated elimination on (3,4,2) leaves only full propagation."""
from lottoprop import GameConfig, build_dary_forest
from lottoprop.elimination import iterated_elimination, order_is_almost_monotonic

net = build_dary_forest(GameConfig(3, 4, 2))
state = iterated_elimination(net, "appendix")
print(f"{len(state.log)} eliminations over {state.rounds} rounds")
print("root 1 keeps:", state.survivors(1, 2))
print("almost monotonic:", order_is_almost_monotonic(state.log, net.config.x_min))
