"""
roadcast — Scenarios
Interval uncertainty over speeds, densities and rates; the two fixed proxy
scenarios; worst-case search by pivot; and seeded sampling for SAA.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import NumericError, UnknownIdError
from .geometry import Interval, PartitionIndex, sorted_ids
from .metrics import (
    Number,
    contact_opportunity_time,
    load_profile,
    number_type,
    site_set,
)
from .paths import MovementPath, MovementSet, path_subsegments

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """One joint realization: v_e and h_e per edge, r_a per site."""
    speeds: Dict[str, float] = field(hash=False)
    densities: Dict[str, float] = field(hash=False)
    rates: Dict[str, float] = field(hash=False)
    label: str = ""

    def speed(self, edge_id: str) -> float:
        try:
            return self.speeds[edge_id]
        except KeyError:
            raise UnknownIdError(f"scenario {self.label or '?'} has no speed for edge {edge_id}") from None

    def density(self, edge_id: str) -> float:
        try:
            return self.densities[edge_id]
        except KeyError:
            raise UnknownIdError(f"scenario {self.label or '?'} has no density for edge {edge_id}") from None

    def rate(self, site_id: str) -> float:
        try:
            return self.rates[site_id]
        except KeyError:
            raise UnknownIdError(f"scenario {self.label or '?'} has no rate for site {site_id}") from None

    def with_speeds(self, speeds: Mapping[str, float], label: Optional[str] = None) -> "Scenario":
        merged = dict(self.speeds)
        merged.update(speeds)
        return replace(self, speeds=merged, label=self.label if label is None else label)

    @classmethod
    def uniform(cls, index: PartitionIndex, speed: float, density: float, rate: float,
                label: str = "uniform") -> "Scenario":
        return cls(
            {e: speed for e in index.network.edges},
            {e: density for e in index.network.edges},
            {a: rate for a in index.sites},
            label,
        )


@dataclass(frozen=True)
class UncertaintyModel:
    speed: Dict[str, Interval] = field(hash=False)
    density: Dict[str, Interval] = field(hash=False)
    rate: Dict[str, Interval] = field(hash=False)

    def __post_init__(self):
        for kind, table in (("speed", self.speed), ("density", self.density), ("rate", self.rate)):
            for key, (lo, hi) in table.items():
                if not 0 < lo <= hi:
                    raise NumericError(f"{kind} interval of {key} is [{lo}, {hi}]")

    @classmethod
    def from_index(cls, index: PartitionIndex) -> "UncertaintyModel":
        edges = index.network.edges
        return cls(
            {e: edges[e].speed_interval for e in edges},
            {e: edges[e].density_interval for e in edges},
            {a: index.sites[a].rate_interval for a in index.sites},
        )

    @property
    def beta(self) -> float:
        return max((hi / lo for lo, hi in self.speed.values()), default=1.0)

    def contains(self, scenario: Scenario, tol: float = 1e-12) -> bool:
        for table, values in ((self.speed, scenario.speeds),
                              (self.density, scenario.densities),
                              (self.rate, scenario.rates)):
            for key, (lo, hi) in table.items():
                x = values.get(key)
                if x is None or not lo - tol <= x <= hi + tol:
                    return False
        return True


def mean_speed_scenario(model: UncertaintyModel) -> Scenario:
    """k0: midpoint speeds, densest traffic, slowest APs."""
    return Scenario(
        {e: (lo + hi) / 2 for e, (lo, hi) in model.speed.items()},
        {e: hi for e, (lo, hi) in model.density.items()},
        {a: lo for a, (lo, hi) in model.rate.items()},
        "k0",
    )


def mean_scenario(model: UncertaintyModel) -> Scenario:
    """k^0: every variable at its interval midpoint."""
    return Scenario(
        {e: (lo + hi) / 2 for e, (lo, hi) in model.speed.items()},
        {e: (lo + hi) / 2 for e, (lo, hi) in model.density.items()},
        {a: (lo + hi) / 2 for a, (lo, hi) in model.rate.items()},
        "k^0",
    )


def pessimistic_scenario(model: UncertaintyModel, label: str = "h2r1") -> Scenario:
    """Slowest speeds, densest traffic, slowest APs."""
    return Scenario(
        {e: lo for e, (lo, hi) in model.speed.items()},
        {e: hi for e, (lo, hi) in model.density.items()},
        {a: lo for a, (lo, hi) in model.rate.items()},
        label,
    )


def worst_case_for_path(index: PartitionIndex, deployment, path: MovementPath,
                        model: UncertaintyModel, exact: bool = False) -> Tuple[Scenario, Number]:
    """Minimize gamma_p over speeds with h at h2 and r at r1.

    For each pivot edge e*, edges whose r_e does not exceed r_e* run at the
    lowest speed and the rest at the highest; the best pivot is kept.
    """
    num = number_type(exact)
    base = pessimistic_scenario(model, f"worst({path.id})")
    rates = load_profile(index, deployment, base, exact).edge_rates
    lengths = {e: num(index.network.edges[e].length) for e in path.edges}

    best_speeds: Optional[Dict[str, float]] = None
    best_value: Optional[Number] = None
    for pivot in sorted_ids(set(path.edges)):
        speeds = {}
        acc = total = num(0)
        for edge_id in path.edges:
            lo, hi = model.speed[edge_id]
            v = lo if rates[edge_id] <= rates[pivot] else hi
            speeds[edge_id] = v
            t = lengths[edge_id] / num(v)
            acc += rates[edge_id] * t
            total += t
        value = acc / total
        if best_value is None or value < best_value:
            best_value, best_speeds = value, speeds
    log.debug("worst case for %s: %s", path.id, float(best_value))
    return base.with_speeds(best_speeds), best_value


def worst_case_overall(index: PartitionIndex, deployment, movements: MovementSet,
                       model: UncertaintyModel,
                       exact: bool = False) -> Tuple[Scenario, str, Number]:
    """k_S: the per-path worst case of the path with the smallest value."""
    if not len(movements):
        raise UnknownIdError("worst-case search needs at least one path")
    best = None
    for path in movements:
        scenario, value = worst_case_for_path(index, deployment, path, model, exact)
        if best is None or value < best[2]:
            best = (scenario, path.id, value)
    return best


def worst_case_time_special(index: PartitionIndex, deployment, path: MovementPath,
                            intervals: Optional[Mapping[str, Interval]] = None,
                            exact: bool = False) -> Tuple[Dict[str, float], Number]:
    """Worst eta^t with per-subsegment speeds: slow where uncovered, fast where covered."""
    deployed = site_set(deployment)
    speeds: Dict[str, float] = {}
    for sub_id in path_subsegments(index, path):
        sub = index.subsegments[sub_id]
        lo, hi = (intervals[sub_id] if intervals is not None
                  else index.network.edges[sub.parent_edge].speed_interval)
        speeds[sub_id] = hi if sub.covering_sites & deployed else lo
    value = contact_opportunity_time(index, path, deployed, subsegment_speeds=speeds, exact=exact)
    return speeds, value


def sample_scenarios(model: UncertaintyModel, n: int, seed: int,
                     prefix: str = "sample") -> List[Scenario]:
    """n independent uniform draws; edges (speed, then density) before sites."""
    if n < 1:
        raise NumericError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    edges = sorted_ids(model.speed)
    sites = sorted_ids(model.rate)
    out = []
    for i in range(n):
        speeds = {e: float(rng.uniform(*model.speed[e])) for e in edges}
        densities = {e: float(rng.uniform(*model.density[e])) for e in edges}
        rates = {a: float(rng.uniform(*model.rate[a])) for a in sites}
        out.append(Scenario(speeds, densities, rates, f"{prefix}#{i + 1}"))
    return out
