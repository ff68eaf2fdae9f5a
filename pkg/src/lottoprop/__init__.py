"""Exact model and equilibrium checks for lottery-based information propagation.

A sender announces a lottery reward; aware players forward the news to
neighbours while keeping a cut of the reward, and one aware player is drawn
uniformly to win.  The package computes outcomes and utilities exactly and
searches for profitable deviations from full propagation.
"""

from .model import (
    DECLINE,
    FeasibilityError,
    GameConfig,
    ModelError,
    Network,
    PropagationOutcome,
    StrategyRule,
    build_dary_forest,
    decline_strategy,
    fp_strategy,
    geometric_count,
    propagate,
    utilities,
    utility,
)
from .friendship import (
    FriendshipForest,
    NotReachableError,
    ShortestPathData,
    best_friend,
    friendship_forest,
    good_friends,
    min_good_friend_degree,
    shortest_paths,
)
from .equilibrium import (
    SubgameContext,
    best_response,
    compositions,
    counterexample_profile,
    is_connected_coalition_proof,
    is_nash,
    lemma3_step_check,
    subgame_utility,
)
from .elimination import (
    DominanceError,
    EliminationState,
    iterated_elimination,
    order_is_almost_monotonic,
    reverify,
)
from .checks import SweepReport
from .experiments import ExperimentResult, ExperimentSpec, emit_csv, random_network, run_experiment

__version__ = "0.1.0"
