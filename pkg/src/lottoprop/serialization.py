"""JSON encodings for networks, strategy rules and outcomes.

Rationals are written as ``"p/q"`` strings.  A network file looks like::

    {"players": 39, "sender": 0, "edges": [[0, 1], ...],
     "kind": "general" | {"dary": {"d": 3, "f": 3, "H": 2, "x_min": "1/2"}}}

``players`` counts the non-sender nodes, so ids run over ``0..players``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import GameConfig, Network, PropagationOutcome, StrategyRule, as_fraction


def frac_str(x: Fraction | None) -> str | None:
    if x is None:
        return None
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def network_to_dict(network: Network) -> dict:
    if network.config is None:
        kind = "general"
    else:
        c = network.config
        kind = {"dary": {"d": c.d, "f": c.f, "H": c.H, "x_min": frac_str(c.x_min)}}
    return {
        "players": network.players,
        "sender": network.sender,
        "edges": [list(e) for e in network.edges],
        "kind": kind,
    }


def network_from_dict(data: dict) -> Network:
    kind = data.get("kind", "general")
    config = None
    if isinstance(kind, dict):
        spec = kind["dary"]
        config = GameConfig(spec["d"], spec["f"], spec["H"],
                            None if spec.get("x_min") is None else as_fraction(spec["x_min"]))
    elif kind != "general":
        raise ValueError(f"unknown network kind {kind!r}")
    return Network(players=int(data["players"]), sender=int(data["sender"]),
                   edges=tuple(tuple(e) for e in data["edges"]), config=config)


def load_network(path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))


def dump_network(network: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network)) + "\n")


def rule_to_dict(rule: StrategyRule) -> dict:
    return {
        "x_min": frac_str(rule.x_min),
        "default": rule.default,
        "overrides": {
            str(p): {str(k): [frac_str(z) for z in vec] for k, vec in table.items()}
            for p, table in rule.overrides.items()
        },
    }


def rule_from_dict(data: dict) -> StrategyRule:
    overrides = {
        int(p): {int(k): tuple(None if z is None else as_fraction(z) for z in vec)
                 for k, vec in table.items()}
        for p, table in data.get("overrides", {}).items()
    }
    return StrategyRule(as_fraction(data["x_min"]), data.get("default", "fp"), overrides)


def outcome_to_dict(outcome: PropagationOutcome) -> dict:
    return {
        "aware_count": outcome.aware_count,
        "aware": sorted(outcome.aware),
        "reward": {str(v): frac_str(x) for v, x in sorted(outcome.reward.items())},
        "parent": {str(v): p for v, p in sorted(outcome.parent.items())},
        "subtree_count": [[i, j, n] for (i, j), n in sorted(outcome.subtree_count.items())],
    }
