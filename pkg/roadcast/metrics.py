"""
roadcast — Metrics
Contact opportunity in distance and in time, the random-association load
model, average throughput, and the truncated multi-path objective.

EdgeValueState keeps the per-edge quantity every path metric averages over
(covered fraction of the edge, or r_e(S)) and updates it one site at a time,
so planners only re-evaluate the paths whose edges actually changed.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .errors import NumericError, UnknownIdError
from .geometry import PartitionIndex, sorted_ids
from .paths import MovementPath, MovementSet, path_subsegments

if TYPE_CHECKING:
    from .scenario import Scenario

Number = Union[float, Fraction]


class MetricKind(str, Enum):
    DISTANCE = "d"
    TIME = "t"
    THROUGHPUT = "gamma"


def number_type(exact: bool):
    return Fraction if exact else float


@dataclass(frozen=True)
class Deployment:
    sites: FrozenSet[str]
    cost: float

    @classmethod
    def of(cls, index: PartitionIndex, sites: Iterable[str], stage: str = "single") -> "Deployment":
        attr = {"single": "cost", "first": "first_stage_cost", "second": "second_stage_cost"}[stage]
        sites = frozenset(sites)
        return cls(sites, sum(getattr(index.site(s), attr) for s in sorted_ids(sites)))

    def sorted(self) -> List[str]:
        return sorted_ids(self.sites)


def site_set(deployment: Union[Deployment, Iterable[str]]) -> FrozenSet[str]:
    if isinstance(deployment, Deployment):
        return deployment.sites
    return frozenset(deployment)


def _checked_speed(v, where: str):
    if not v > 0:
        raise NumericError(f"nonpositive speed {v} on {where}")
    return v


# ─── Contact opportunity ──────────────────────────────────────────────────────

def contact_opportunity_distance(index: PartitionIndex, path: MovementPath, deployment,
                                 factor: float = 1.0, exact: bool = False) -> Number:
    """Fraction of the path's distance inside some deployed region."""
    num = number_type(exact)
    deployed = site_set(deployment)
    covered = total = num(0)
    for sub_id in path_subsegments(index, path):
        sub = index.subsegments[sub_id]
        d = num(sub.length)
        total += d
        if sub.covering_sites & deployed:
            covered += d
    return num(factor) * covered / total


def contact_opportunity_time(index: PartitionIndex, path: MovementPath, deployment,
                             scenario: Optional["Scenario"] = None,
                             subsegment_speeds: Optional[Mapping[str, float]] = None,
                             exact: bool = False) -> Number:
    """Fraction of the path's travel time inside some deployed region."""
    num = number_type(exact)
    deployed = site_set(deployment)
    covered = total = num(0)
    for sub_id in path_subsegments(index, path):
        sub = index.subsegments[sub_id]
        if subsegment_speeds is not None:
            v = subsegment_speeds[sub_id]
        else:
            v = scenario.speed(sub.parent_edge)
        t = num(sub.length) / num(_checked_speed(v, sub_id))
        total += t
        if sub.covering_sites & deployed:
            covered += t
    return covered / total


# ─── Load model ───────────────────────────────────────────────────────────────

@dataclass
class LoadProfile:
    users: Dict[str, Number]         # u_l
    counts: Dict[str, int]           # n_l
    site_users: Dict[str, Number]    # u_a
    rates: Dict[str, Number]         # r_l (0 when uncovered)
    edge_rates: Dict[str, Number]    # r_e(S)


def load_profile(index: PartitionIndex, deployment, scenario: "Scenario",
                 exact: bool = False) -> LoadProfile:
    """Random association: users of l split evenly over the n_l covering APs."""
    num = number_type(exact)
    one = num(1)
    deployed = site_set(deployment)
    for site_id in deployed:
        index.site(site_id)

    users: Dict[str, Number] = {}
    counts: Dict[str, int] = {}
    for sub_id, sub in index.subsegments.items():
        users[sub_id] = num(scenario.density(sub.parent_edge)) * num(sub.length)
        counts[sub_id] = len(sub.covering_sites & deployed)

    site_users: Dict[str, Number] = {}
    for site_id in sorted_ids(deployed):
        total = num(0)
        for sub_id in index.site_subsegments[site_id]:
            total += users[sub_id] / counts[sub_id]
        site_users[site_id] = total

    rates: Dict[str, Number] = {}
    for sub_id, sub in index.subsegments.items():
        serving = sorted_ids(sub.covering_sites & deployed)
        if not serving:
            rates[sub_id] = num(0)
            continue
        share = sum((num(scenario.rate(a)) / max(site_users[a], one) for a in serving), num(0))
        rates[sub_id] = share / len(serving)

    edge_rates: Dict[str, Number] = {}
    for edge_id, subs in index.edge_subsegments.items():
        acc = num(0)
        for sub_id in subs:
            if counts[sub_id]:
                acc += num(index.subsegments[sub_id].length) * rates[sub_id]
        edge_rates[edge_id] = acc / num(index.network.edges[edge_id].length)
    return LoadProfile(users, counts, site_users, rates, edge_rates)


def average_throughput(index: PartitionIndex, path: MovementPath, deployment,
                       scenario: "Scenario", exact: bool = False,
                       profile: Optional[LoadProfile] = None) -> Number:
    """Time-weighted average of r_e(S) along the path (per-edge form)."""
    num = number_type(exact)
    prof = profile or load_profile(index, deployment, scenario, exact)
    acc = total = num(0)
    for edge_id in path.edges:
        t = num(index.network.edges[edge_id].length) / num(_checked_speed(scenario.speed(edge_id), edge_id))
        acc += prof.edge_rates[edge_id] * t
        total += t
    return acc / total


def average_throughput_subsegments(index: PartitionIndex, path: MovementPath, deployment,
                                   scenario: "Scenario", exact: bool = False,
                                   profile: Optional[LoadProfile] = None) -> Number:
    """Same quantity summed per subsegment: sum r_l d_l/v_l over sum d_l/v_l."""
    num = number_type(exact)
    prof = profile or load_profile(index, deployment, scenario, exact)
    acc = total = num(0)
    for sub_id in path_subsegments(index, path):
        sub = index.subsegments[sub_id]
        t = num(sub.length) / num(_checked_speed(scenario.speed(sub.parent_edge), sub_id))
        acc += prof.rates[sub_id] * t
        total += t
    return acc / total


def path_metric(index: PartitionIndex, path: MovementPath, deployment, kind: MetricKind,
                scenario: Optional["Scenario"] = None, factor: float = 1.0,
                exact: bool = False, profile: Optional[LoadProfile] = None) -> Number:
    kind = MetricKind(kind)
    if kind is MetricKind.DISTANCE:
        return contact_opportunity_distance(index, path, deployment, factor, exact)
    if scenario is None:
        raise NumericError(f"metric {kind.value} needs a scenario")
    num = number_type(exact)
    if kind is MetricKind.TIME:
        return num(factor) * contact_opportunity_time(index, path, deployment, scenario, exact=exact)
    return num(factor) * average_throughput(index, path, deployment, scenario, exact, profile)


def truncated_objective(index: PartitionIndex, movements: MovementSet, deployment, lam: float,
                        kind: MetricKind = MetricKind.DISTANCE,
                        scenarios: Sequence["Scenario"] = (),
                        factors: Optional[Mapping[str, float]] = None,
                        exact: bool = False) -> Number:
    """Sum over paths (and scenarios) of min(m_p(S), lambda)."""
    kind = MetricKind(kind)
    num = number_type(exact)
    lam = num(lam)
    factors = factors or {}
    cases: List[Optional["Scenario"]] = list(scenarios) or [None]
    total = num(0)
    for scenario in cases:
        profile = None
        if kind is MetricKind.THROUGHPUT:
            profile = load_profile(index, deployment, scenario, exact)
        for path in movements:
            value = path_metric(index, path, deployment, kind, scenario,
                                factors.get(path.id, 1.0), exact, profile)
            total += min(value, lam)
    return total


# ─── Incremental per-edge state ───────────────────────────────────────────────

def edge_weights(index: PartitionIndex, path: MovementPath, kind: MetricKind,
                 scenario: Optional["Scenario"] = None,
                 speeds: Optional[Mapping[str, float]] = None,
                 exact: bool = False) -> Tuple[Number, ...]:
    """Per-edge weights of the path average: d_e for distance, d_e/v_e otherwise."""
    num = number_type(exact)
    out = []
    for edge_id in path.edges:
        d = num(index.network.edges[edge_id].length)
        if MetricKind(kind) is MetricKind.DISTANCE:
            out.append(d)
            continue
        v = speeds[edge_id] if speeds is not None and edge_id in speeds else scenario.speed(edge_id)
        out.append(d / num(_checked_speed(v, edge_id)))
    return tuple(out)


class EdgeValueState:
    """x_e(S) for every edge under one scenario, grown one site at a time.

    Distance and time objectives use the covered fraction of e; throughput
    uses r_e(S) under the load model. A path metric is then the weighted
    mean of x_e over E_p with the weights from edge_weights.
    """

    def __init__(self, index: PartitionIndex, kind: MetricKind,
                 scenario: Optional["Scenario"] = None, exact: bool = False,
                 sites: Iterable[str] = ()):
        self.index = index
        self.kind = MetricKind(kind)
        self.scenario = scenario
        self.num = number_type(exact)
        self.zero = self.num(0)
        self.sites: Set[str] = set()
        self.counts: Dict[str, int] = {}
        self.values: Dict[str, Number] = {}
        if self.kind is MetricKind.THROUGHPUT:
            if scenario is None:
                raise NumericError("throughput state needs a scenario")
            num = self.num
            self._users = {
                sub_id: num(scenario.density(sub.parent_edge)) * num(sub.length)
                for sub_id, sub in index.subsegments.items()
            }
            self._rate = {a: num(scenario.rate(a)) for a in index.sites}
            self.site_users: Dict[str, Number] = {}
            self.sub_rates: Dict[str, Number] = {}
        for site_id in sorted_ids(sites):
            self.add(site_id)

    def value(self, edge_id: str) -> Number:
        return self.values.get(edge_id, self.zero)

    def delta(self, site_id: str) -> Dict[str, Number]:
        """New x_e for the edges that adding site_id would change."""
        if site_id in self.sites:
            return {}
        if site_id not in self.index.site_subsegments:
            raise UnknownIdError(f"unknown site {site_id}")
        if self.kind is MetricKind.THROUGHPUT:
            return self._throughput_delta(site_id)[0]
        num = self.num
        changed: Dict[str, Number] = {}
        for sub_id in self.index.site_subsegments[site_id]:
            if self.counts.get(sub_id, 0):
                continue
            sub = self.index.subsegments[sub_id]
            edge_id = sub.parent_edge
            base = changed.get(edge_id, self.value(edge_id))
            changed[edge_id] = base + num(sub.length) / num(self.index.network.edges[edge_id].length)
        return changed

    def add(self, site_id: str) -> Dict[str, Number]:
        if site_id in self.sites:
            return {}
        if self.kind is MetricKind.THROUGHPUT:
            changed, site_users, sub_rates = self._throughput_delta(site_id)
            self.site_users.update(site_users)
            self.sub_rates.update(sub_rates)
        else:
            changed = self.delta(site_id)
        for sub_id in self.index.site_subsegments[site_id]:
            self.counts[sub_id] = self.counts.get(sub_id, 0) + 1
        self.sites.add(site_id)
        self.values.update(changed)
        return changed

    def _throughput_delta(self, site_id: str):
        index = self.index
        num = self.num
        one = num(1)
        own = index.site_subsegments[site_id]
        new_counts = {s: self.counts.get(s, 0) + 1 for s in own}
        active = self.sites | {site_id}

        affected = {site_id}
        for sub_id in own:
            affected.update(b for b in index.subsegments[sub_id].covering_sites if b in self.sites)

        site_users: Dict[str, Number] = {}
        touched: Set[str] = set()
        for b in sorted_ids(affected):
            total = self.zero
            for sub_id in index.site_subsegments[b]:
                total += self._users[sub_id] / new_counts.get(sub_id, self.counts.get(sub_id, 0))
                touched.add(sub_id)
            site_users[b] = total

        sub_rates: Dict[str, Number] = {}
        edges: Set[str] = set()
        for sub_id in touched:
            serving = sorted_ids(index.subsegments[sub_id].covering_sites & active)
            share = self.zero
            for c in serving:
                u = site_users[c] if c in site_users else self.site_users[c]
                share += self._rate[c] / max(u, one)
            sub_rates[sub_id] = share / len(serving)
            edges.add(index.subsegments[sub_id].parent_edge)

        changed: Dict[str, Number] = {}
        for edge_id in sorted_ids(edges):
            acc = self.zero
            for sub_id in index.edge_subsegments[edge_id]:
                rate = sub_rates.get(sub_id)
                if rate is None:
                    rate = self.sub_rates.get(sub_id)
                if rate is not None:
                    acc += num(index.subsegments[sub_id].length) * rate
            changed[edge_id] = acc / num(index.network.edges[edge_id].length)
        return changed, site_users, sub_rates


def weighted_value(state: EdgeValueState, edges: Sequence[str], weights: Sequence[Number],
                   override: Optional[Mapping[str, Number]] = None) -> Number:
    acc = total = state.zero
    for edge_id, w in zip(edges, weights):
        x = override[edge_id] if override is not None and edge_id in override else state.value(edge_id)
        acc += x * w
        total += w
    return acc / total
