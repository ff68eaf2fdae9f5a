"""FP survives unilateral deviations; a coalition of all roots does not."""
from lottoprop import GameConfig, build_dary_forest, fp_strategy
from lottoprop.equilibrium import complete_graph, is_connected_coalition_proof, is_nash

net = build_dary_forest(GameConfig(3, 3, 2))
fp = fp_strategy(net)
print("nash:", is_nash(net, fp).holds)
roots = complete_graph(net.adjacency[0])
rep = is_connected_coalition_proof(net, fp, roots, 3)
print("roots as a coalition:", rep.witness["utility_before"], "->", rep.witness["utility_after"])
