"""Command-line entry point: ``lottoprop <command> ...``.

Verdicts go to stdout as one JSON object (CSV for ``experiment``), a short
human summary goes to stderr.  Exit codes: 0 when the checked property holds,
1 when it fails (the witness is in the JSON), 2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import checks
from .elimination import DominanceError, iterated_elimination, order_is_almost_monotonic
from .equilibrium import (
    complete_graph,
    counterexample_profile,
    is_connected_coalition_proof,
    is_nash,
    player_graph,
)
from .experiments import ExperimentSpec, emit_csv, load_spec, run_experiment
from .friendship import (
    best_friend,
    friendship_forest,
    good_friends,
    min_good_friend_degree,
    shortest_paths,
)
from .model import (
    CLAIM_RULES,
    GameConfig,
    ModelError,
    build_dary_forest,
    decline_strategy,
    fp_strategy,
    propagate,
    utilities,
)
from .serialization import (
    frac_str,
    load_network,
    network_to_dict,
    outcome_to_dict,
    rule_from_dict,
)

OK, VIOLATED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def parse_dary(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3 or not all(p.strip().isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected d,f,H (three integers), got {text!r}")
    return tuple(int(p) for p in parts)


def _network_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--dary", type=parse_dary, metavar="d,f,H", help="d-ary forest shorthand")
    g.add_argument("--graph", type=Path, metavar="FILE", help="network JSON file")
    p.add_argument("--x-min", type=parse_fraction, metavar="p/q", help="override x_min")
    p.add_argument("--initial", type=parse_fraction, metavar="p/q",
                   help="initial reward (default H*x_min for forests, 1 otherwise)")


def _profile_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", default="fp",
                   help="fp, decline, counterexample, or a strategy JSON file (default fp)")


def _load(args):
    if args.dary is not None:
        d, f, H = args.dary
        net = build_dary_forest(GameConfig(d, f, H, args.x_min))
    else:
        net = load_network(args.graph)
    if net.config is not None:
        x_min = net.config.x_min if args.x_min is None else args.x_min
    elif args.x_min is not None:
        x_min = args.x_min
    else:
        x_min = None
    initial = args.initial if args.initial is not None else net.default_initial_reward()
    return net, x_min, Fraction(initial)


def _load_game(args):
    net, x_min, initial = _load(args)
    if x_min is None:
        raise UsageError("general networks need --x-min")
    return net, Fraction(x_min), initial


def _rule(args, net, x_min):
    name = getattr(args, "profile", "fp")
    if name == "fp":
        return fp_strategy(x_min=x_min)
    if name == "decline":
        return decline_strategy(x_min)
    if name == "counterexample":
        return counterexample_profile(net)
    path = Path(name)
    if not path.exists():
        raise UsageError(f"unknown profile {name!r}")
    return rule_from_dict(json.loads(path.read_text()))


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _say(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def cmd_build(args) -> int:
    net, _, _ = _load(args)
    data = network_to_dict(net)
    if args.out:
        args.out.write_text(json.dumps(data) + "\n")
        _say(f"wrote {net.n_nodes} nodes to {args.out}")
    else:
        _emit(data)
    return OK


def cmd_propagate(args) -> int:
    net, x_min, initial = _load_game(args)
    out = propagate(net, _rule(args, net, x_min), initial, args.claim)
    _emit(outcome_to_dict(out))
    _say(f"{out.aware_count} aware players")
    return OK


def cmd_utility(args) -> int:
    net, x_min, initial = _load_game(args)
    out = propagate(net, _rule(args, net, x_min), initial, args.claim)
    players = args.player if args.player else None
    _emit({str(p): frac_str(u) for p, u in utilities(out, players).items()})
    return OK


def cmd_verify_nash(args) -> int:
    net, x_min, initial = _load_game(args)
    rep = is_nash(net, _rule(args, net, x_min), grid=args.grid, initial_reward=initial,
                  max_vectors=args.max_vectors)
    _emit(rep.to_dict())
    _say(f"nash: {rep.holds} ({rep.deviations_checked} deviations, {len(rep.truncated)} players skipped)")
    return OK if rep.holds else VIOLATED


def _communication(args, net):
    if args.comm == "network":
        return player_graph(net)
    if args.comm == "friendship":
        return friendship_forest(net)
    if args.comm == "roots":
        return complete_graph(net.adjacency[net.sender])
    raise UsageError(f"unknown communication graph {args.comm!r}")


def cmd_verify_ccp(args) -> int:
    net, x_min, initial = _load_game(args)
    rep = is_connected_coalition_proof(net, _rule(args, net, x_min), _communication(args, net),
                                       args.max_coalition, grid=args.grid, initial_reward=initial,
                                       max_profiles=args.max_profiles)
    _emit(rep.to_dict())
    _say(f"coalition-proof: {rep.holds} ({rep.coalitions_checked} coalitions, "
         f"{len(rep.truncated)} truncated)")
    return OK if rep.holds else VIOLATED


def cmd_eliminate(args) -> int:
    if args.order == "random" and args.seed is None:
        raise UsageError("--order random needs --seed")
    net, x_min, initial = _load_game(args)
    try:
        state = iterated_elimination(net, args.order, seed=args.seed, x_min=x_min,
                                     initial_reward=initial)
    except DominanceError as exc:
        _emit({"holds": False, "error": str(exc), "witness": exc.counterexample})
        return VIOLATED
    if args.log:
        args.log.write_text(state.jsonl())
    survivors = {f"{p}:{b}": [[frac_str(z) for z in v] for v in state.survivors(p, b)]
                 for p, b in sorted(state.surviving)}
    verdict = {
        "order": args.order,
        "seed": args.seed,
        "rounds": state.rounds,
        "eliminated": len(state.log),
        "fp_survives": state.fp_survives(),
        "only_fp": state.only_fp(),
        "almost_monotonic": order_is_almost_monotonic(state.log, x_min),
        "dominance_checks": sorted(state.labels),
        "survivors": survivors,
    }
    verdict["holds"] = verdict["fp_survives"] and (args.order != "appendix" or verdict["only_fp"])
    _emit(verdict)
    _say(f"{len(state.log)} eliminations in {state.rounds} steps; only FP left: {state.only_fp()}")
    return OK if verdict["holds"] else VIOLATED


def cmd_friends(args) -> int:
    net, _, _ = _load(args)
    spd = shortest_paths(net)
    forest = friendship_forest(net, spd)
    nodes = [v for v in sorted(spd.dist) if v != net.sender]
    _emit({
        "sender": net.sender,
        "distance": {str(v): spd.dist[v] for v in sorted(spd.dist)},
        "path_count": {str(v): spd.path_count[v] for v in sorted(spd.dist)},
        "best_friend": {str(v): best_friend(net, spd, v) for v in nodes},
        "good_friends": {str(v): sorted(good_friends(net, spd, v)) for v in sorted(spd.dist)},
        "forest_edges": [list(e) for e in forest.edges],
        "forest_roots": list(forest.roots),
        "min_good_friend_degree": min_good_friend_degree(net, spd, args.depth_budget),
        "unreachable": sorted(set(net.nodes) - set(spd.dist)),
    })
    return OK


_GRID_KEYS = {"d": "d_range", "k": "k_range", "f": "f_range", "n": "n_range",
              "eps": "eps_grid", "c": "c_grid", "step": "step", "pi0": "pi0_offsets", "extra": "extra",
              "samples": "samples", "seed": "seed"}
_SCALAR_KEYS = ("step", "extra", "samples", "seed")


def parse_grid(text: str | None) -> dict:
    """``"d=3..5;k=1,2,4;eps=0,1/4"`` -> keyword arguments for a sweep."""
    out: dict = {}
    if not text:
        return out
    for part in text.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"grid entry {part!r} is not key=values")
        key, val = (s.strip() for s in part.split("=", 1))
        if key not in _GRID_KEYS:
            raise UsageError(f"unknown grid key {key!r}; use one of {sorted(_GRID_KEYS)}")
        if ".." in val:
            lo, hi = val.split("..")
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [Fraction(v) for v in val.split(",")]
            values = [int(v) if v.denominator == 1 and key not in ("eps", "c") else v for v in values]
        if key in _SCALAR_KEYS:
            if len(values) != 1:
                raise UsageError(f"{key} takes a single value")
            values = values[0]
        out[_GRID_KEYS[key]] = values
    return out


def cmd_check(args) -> int:
    sweep = checks.SWEEPS[args.claim]
    try:
        rep = sweep(**parse_grid(args.grid))
    except TypeError as exc:
        raise UsageError(f"grid does not fit claim {args.claim}: {exc}") from exc
    _emit(rep.to_dict())
    _say(f"claim {args.claim}: {'holds' if rep.holds else 'VIOLATED'} on {rep.checked} points, "
         f"min margin {frac_str(rep.margin)}, {len(rep.boundary)} boundary points")
    return OK if rep.holds else VIOLATED


def cmd_experiment(args) -> int:
    if args.spec is not None:
        spec = load_spec(args.spec)
    else:
        missing = [f for f in ("n", "d", "H", "K", "seed") if getattr(args, f) is None]
        if missing:
            raise UsageError("experiment needs --spec or all of --n --d --H --K --seed "
                             f"(missing {', '.join('--' + m for m in missing)})")
        spec = ExperimentSpec(args.n, args.d, args.H, args.K, args.factor,
                              args.withhold, args.seed, args.claim)
    res = run_experiment(spec, workers=args.workers)
    emit_csv(res, args.out if args.out else sys.stdout)
    means = [res.mean(k) for k in spec.withhold_grid]
    ordered = bool(means) and spec.withhold_grid[0] == 1 and all(means[0] > m for m in means[1:])
    _say(f"{spec.K} networks in {res.runtime:.1f}s; withhold-1 strictly best: {ordered}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lottoprop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a d-ary forest or normalize a network file")
    _network_args(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_build)

    for name, func, help_ in (("propagate", cmd_propagate, "run the propagation process"),
                              ("utility", cmd_utility, "exact utilities of aware players")):
        p = sub.add_parser(name, help=help_)
        _network_args(p)
        _profile_arg(p)
        p.add_argument("--claim", choices=CLAIM_RULES, default="round")
        if name == "utility":
            p.add_argument("--player", type=int, action="append")
        p.set_defaults(func=func)

    p = sub.add_parser("verify-nash", help="search unilateral deviations")
    _network_args(p)
    _profile_arg(p)
    p.add_argument("--grid", choices=("half", "integer"), default="half")
    p.add_argument("--max-vectors", type=int, default=10 ** 5)
    p.set_defaults(func=cmd_verify_nash)

    p = sub.add_parser("verify-ccp", help="search connected coalition deviations")
    _network_args(p)
    _profile_arg(p)
    p.add_argument("--comm", choices=("network", "friendship", "roots"), default="network",
                   help="communication graph: the network, the good-friendship forest, or all roots")
    p.add_argument("--max-coalition", type=int, default=3)
    p.add_argument("--grid", choices=("half", "integer"), default="integer")
    p.add_argument("--max-profiles", type=int, default=10 ** 6)
    p.set_defaults(func=cmd_verify_ccp)

    p = sub.add_parser("eliminate", help="iterated elimination of dominated strategies")
    _network_args(p)
    p.add_argument("--order", choices=("appendix", "random"), default="appendix")
    p.add_argument("--seed", type=int)
    p.add_argument("--log", type=Path, help="write the elimination log as JSON lines")
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("friends", help="best friends, good friends and the friendship forest")
    _network_args(p)
    p.add_argument("--depth-budget", type=int)
    p.set_defaults(func=cmd_friends)

    p = sub.add_parser("check", help="exact inequality sweeps")
    p.add_argument("--claim", required=True, choices=sorted(checks.SWEEPS))
    p.add_argument("--grid", help='e.g. "d=3..5;k=1..4;eps=0,1/4"')
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("experiment", help="withhold-k comparison on random networks (CSV)")
    p.add_argument("--spec", type=Path, help="experiment spec JSON")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--factor", type=parse_fraction, default=Fraction(1))
    p.add_argument("--withhold", type=int, nargs="*")
    p.add_argument("--seed", type=int)
    p.add_argument("--claim", choices=CLAIM_RULES, default="round")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ModelError, OSError, ValueError) as exc:
        _say(f"error: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
