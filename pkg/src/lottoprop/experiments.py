"""Monte-Carlo comparison of uniform withholding levels on random networks.

All players except a focal one fully propagate; the focal player withholds
``k * x_min`` from every neighbour and their exact utility is recorded for each
``k``.  Network ``i`` of an experiment is drawn from
``numpy.random.default_rng(master_seed + i)``, so results do not depend on how
the work is spread over processes.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import CLAIM_RULES, ModelError, Network, StrategyRule, as_fraction, propagate, utility
from .serialization import frac_str

CSV_HEADER = ["k", "mean_utility", "std", "samples", "n", "d", "H", "K", "factor", "seed"]


@dataclass(frozen=True)
class ExperimentSpec:
    n: int
    d: int
    H: int
    K: int
    focal_degree_factor: Fraction = Fraction(1)
    withhold_grid: tuple[int, ...] | None = None
    master_seed: int = 0
    claim: str = "round"

    def __post_init__(self):
        object.__setattr__(self, "focal_degree_factor", as_fraction(self.focal_degree_factor))
        grid = tuple(range(1, self.H + 1)) if self.withhold_grid is None else tuple(self.withhold_grid)
        object.__setattr__(self, "withhold_grid", grid)
        if self.H < 1 or self.K < 0:
            raise ModelError("need H >= 1 and K >= 0")
        if not self.n > self.d >= 2:
            raise ModelError(f"need n > d >= 2, got n={self.n}, d={self.d}")
        if self.claim not in CLAIM_RULES:
            raise ModelError(f"unknown claim rule {self.claim!r}")
        if any(not 1 <= k <= self.H for k in grid):
            raise ModelError(f"withhold levels must lie in 1..{self.H}")

    @property
    def x_min(self) -> Fraction:
        return Fraction(1, self.H)

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "H": self.H, "K": self.K,
                "focal_degree_factor": frac_str(self.focal_degree_factor),
                "withhold_grid": list(self.withhold_grid), "master_seed": self.master_seed,
                "claim": self.claim}


def load_spec(path) -> ExperimentSpec:
    data = json.loads(Path(path).read_text())
    factor = data.get("focal_degree_factor", data.get("factor", 1))
    return ExperimentSpec(n=data["n"], d=data["d"], H=data["H"], K=data["K"],
                          focal_degree_factor=factor, withhold_grid=data.get("withhold_grid"),
                          master_seed=data.get("master_seed", data.get("seed", 0)),
                          claim=data.get("claim", "round"))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    samples: dict[int, list[Fraction]]
    runtime: float = 0.0
    unreachable: int = 0
    extra: dict = field(default_factory=dict)

    def mean(self, k: int) -> Fraction:
        xs = self.samples[k]
        return sum(xs, Fraction(0)) / len(xs) if xs else Fraction(0)

    def variance(self, k: int) -> Fraction:
        """Population variance over the sampled networks."""
        xs = self.samples[k]
        if not xs:
            return Fraction(0)
        mu = self.mean(k)
        return sum(((x - mu) ** 2 for x in xs), Fraction(0)) / len(xs)

    def std(self, k: int) -> Decimal:
        with localcontext() as ctx:
            ctx.prec = 40
            v = self.variance(k)
            return (Decimal(v.numerator) / Decimal(v.denominator)).sqrt()

    def relative_margin(self, best: int = 1, other: int = 2) -> Fraction:
        """``(mean(best) - mean(other)) / mean(other)``."""
        return (self.mean(best) - self.mean(other)) / self.mean(other)


def _draw_count(d: int, factor: Fraction = Fraction(1)) -> int:
    return math.ceil(factor * Fraction(d, 2))


def random_network(n: int, d: int, focal_degree_factor=1, seed: int = 0, focal: int = 0) -> Network:
    """Each player links to ``ceil(d/2)`` distinct random others; the focal player
    draws ``ceil(factor * d/2)`` instead.  Duplicate links collapse into one.

    The sender is a uniformly chosen non-focal player.
    """
    if not n > d >= 2:
        raise ModelError(f"need n > d >= 2, got n={n}, d={d}")
    factor = as_fraction(focal_degree_factor)
    rng = np.random.default_rng(seed)
    edges = set()
    for v in range(n):
        m = min(_draw_count(d, factor if v == focal else Fraction(1)), n - 1)
        others = rng.choice(n - 1, size=m, replace=False)
        for u in others:
            u = int(u) + (int(u) >= v)  # skip v itself
            edges.add((min(u, v), max(u, v)))
    sender = int(rng.integers(n - 1))
    sender += sender >= focal
    return Network(players=n - 1, sender=sender, edges=tuple(sorted(edges)))


def withhold_rule(network: Network, focal: int, x_min: Fraction, k: int,
                  initial_reward: Fraction = Fraction(1)) -> StrategyRule:
    """Everyone fully propagates; ``focal`` leaves ``max(b - k, 0) * x_min`` in bucket ``b``."""
    width = len(network.targets[focal])
    top = network.max_bucket(focal, x_min, initial_reward)
    table = {b: (max(b - k, 0) * x_min,) * width for b in range(1, top + 1)}
    return StrategyRule(x_min, "fp", {focal: table} if width else {})


def focal_utilities(network: Network, focal: int, x_min: Fraction, withhold_grid: Sequence[int],
                    initial_reward: Fraction = Fraction(1), claim: str = "round") -> dict[int, Fraction]:
    out = {}
    for k in withhold_grid:
        rule = withhold_rule(network, focal, x_min, k, initial_reward)
        out[k] = utility(propagate(network, rule, initial_reward, claim), focal)
    return out


def _one_network(args) -> tuple[dict[int, Fraction], bool]:
    spec, index = args
    net = random_network(spec.n, spec.d, spec.focal_degree_factor, spec.master_seed + index)
    reached = 0 in net.distance and net.max_bucket(0, spec.x_min) >= 1
    return focal_utilities(net, 0, spec.x_min, spec.withhold_grid, claim=spec.claim), not reached


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Evaluate ``spec.K`` networks, optionally across ``workers`` processes."""
    start = time.perf_counter()
    jobs = [(spec, i) for i in range(spec.K)]
    if workers > 1 and spec.K > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_network, jobs, chunksize=max(1, spec.K // (4 * workers))))
    else:
        rows = [_one_network(j) for j in jobs]
    samples = {k: [r[k] for r, _ in rows] for k in spec.withhold_grid}
    return ExperimentResult(spec, samples, time.perf_counter() - start,
                            unreachable=sum(1 for _, u in rows if u))


def decimal12(x) -> str:
    with localcontext() as ctx:
        ctx.prec = 40
        if isinstance(x, Fraction):
            x = Decimal(x.numerator) / Decimal(x.denominator)
        return format(x, ".12g")


def emit_csv(result: ExperimentResult, path) -> None:
    """Write one row per withhold level to ``path`` (a file name or an open text stream)."""
    if hasattr(path, "write"):
        _write_rows(result, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(result, fh)


def _write_rows(result: ExperimentResult, fh) -> None:
    spec = result.spec
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for k in spec.withhold_grid:
        writer.writerow([k, decimal12(result.mean(k)), decimal12(result.std(k)),
                         len(result.samples[k]), spec.n, spec.d, spec.H, spec.K,
                         frac_str(spec.focal_degree_factor), spec.master_seed])
