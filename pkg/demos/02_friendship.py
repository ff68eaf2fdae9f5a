"""Best friends on a graph with two equal-length routes."""
from lottoprop import Network, best_friend, friendship_forest, good_friends, shortest_paths

net = Network(4, 0, ((0, 1), (0, 2), (1, 3), (2, 3), (3, 4)))
spd = shortest_paths(net)
for v in range(1, 5):
    print(v, "best friend:", best_friend(net, spd, v), "good friends:", sorted(good_friends(net, spd, v)))
print("forest edges:", friendship_forest(net, spd).edges)
