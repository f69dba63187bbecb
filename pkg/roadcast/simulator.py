"""
roadcast — Flow-level simulator
Restricted random-waypoint traces over the road network, density estimates
from the trace, and a discrete-time association sweep that measures the
throughput users actually receive from a deployment.
"""
import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .config import START_RETRIES
from .errors import NoQualifyingPairError, NumericError
from .geometry import PartitionIndex, RoadNetwork, natural_key, sorted_ids
from .metrics import load_profile
from .paths import shortest_path
from .scenario import Scenario

log = logging.getLogger(__name__)

POLICIES = ("least", "random")


# ─── Traces ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TraceSegment:
    user: int
    t0: float
    t1: float
    edge: str
    off0: float
    off1: float
    leg: int = 0

    def offset_at(self, t: float) -> float:
        if self.t1 <= self.t0:
            return self.off1
        f = min(max((t - self.t0) / (self.t1 - self.t0), 0.0), 1.0)
        return self.off0 + (self.off1 - self.off0) * f


@dataclass
class MobilityTrace:
    segments: Dict[int, List[TraceSegment]]
    duration: float
    seed: Optional[int] = None
    _starts: Dict[int, List[float]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for user, segs in self.segments.items():
            segs.sort(key=lambda s: s.t0)
            self._starts[user] = [s.t0 for s in segs]

    @property
    def users(self) -> List[int]:
        return sorted(self.segments)

    def at(self, user: int, t: float) -> Optional[TraceSegment]:
        segs = self.segments.get(user, [])
        i = bisect.bisect_right(self._starts.get(user, []), t) - 1
        if i < 0 or i >= len(segs):
            return None
        return segs[i]

    def legs(self, user: int) -> List[int]:
        return sorted({s.leg for s in self.segments.get(user, [])})


def generate_mobility(network: RoadNetwork, users: int, duration: float, min_leg: float,
                      seed: int) -> MobilityTrace:
    """Each user walks shortest paths between random intersections at least min_leg apart."""
    if duration <= 0:
        raise NumericError(f"duration {duration} must be positive")
    nodes = sorted_ids(network.nodes)
    lengths = dict(nx.all_pairs_dijkstra_path_length(network.graph, weight="length"))
    far = {n: [m for m in nodes if lengths[n][m] >= min_leg] for n in nodes}
    to_target: Dict[str, Dict[str, float]] = {}

    segments: Dict[int, List[TraceSegment]] = {}
    for user in range(users):
        rng = np.random.default_rng([seed, user])
        for _ in range(START_RETRIES):
            here = nodes[int(rng.integers(len(nodes)))]
            if far[here]:
                break
        else:
            raise NoQualifyingPairError(
                f"user {user}: no start with a destination {min_leg} m away after {START_RETRIES} tries"
            )

        segs: List[TraceSegment] = []
        t = 0.0
        leg = 0
        while t < duration:
            dest = far[here][int(rng.integers(len(far[here])))]
            if dest not in to_target:
                to_target[dest] = nx.single_source_dijkstra_path_length(network.graph, dest, weight="length")
            route = shortest_path(network, here, dest, to_target=to_target[dest])
            for a, b in zip(route, route[1:]):
                edge = network.edge_between(a, b)
                v = float(rng.uniform(*edge.speed_interval))
                dt = edge.length / v
                off0, off1 = (0.0, edge.length) if edge.u == a else (edge.length, 0.0)
                if t + dt >= duration:
                    f = (duration - t) / dt
                    segs.append(TraceSegment(user, t, duration, edge.id, off0, off0 + (off1 - off0) * f, leg))
                    t = duration
                    break
                segs.append(TraceSegment(user, t, t + dt, edge.id, off0, off1, leg))
                t += dt
            here = dest
            leg += 1
        segments[user] = segs
    log.info("generated %d users over %.1f s (%d segments)",
             users, duration, sum(len(s) for s in segments.values()))
    return MobilityTrace(segments, duration, seed)


def estimate_density(trace: MobilityTrace, network: RoadNetwork) -> Dict[str, float]:
    """Time-average users per meter on every edge."""
    if trace.duration <= 0:
        raise NumericError("trace duration must be positive")
    occupancy = {e: 0.0 for e in network.edges}
    for segs in trace.segments.values():
        for s in segs:
            occupancy[s.edge] += s.t1 - s.t0
    return {
        e: occupancy[e] / (trace.duration * network.edges[e].length)
        for e in sorted_ids(network.edges)
    }


# ─── Throughput sweep ─────────────────────────────────────────────────────────

@dataclass
class SimReport:
    leg_means: Dict[str, float]
    user_means: Dict[int, float]
    densities: Dict[str, float]
    mean: float
    percentiles: Dict[int, float]
    ccdf: List[Tuple[float, float]]
    analytic: Dict[str, Dict[str, float]] = field(default_factory=dict)
    tick_totals: Optional[List[float]] = None
    capacity: float = 0.0


def _ccdf(values: Sequence[float], points: int = 50) -> List[Tuple[float, float]]:
    if not values:
        return []
    xs = np.sort(np.asarray(values, dtype=float))
    grid = np.linspace(0.0, float(xs[-1]), points)
    n = len(xs)
    return [(float(x), float(n - np.searchsorted(xs, x, side="left")) / n) for x in grid]


def evaluate_throughput(trace: MobilityTrace, index: PartitionIndex, deployment: Sequence[str],
                        rates: Mapping[str, float], policy: str = "least", timestep: float = 1.0,
                        seed: int = 0, record: bool = False) -> SimReport:
    """Sweep ticks; each in-range user holds one AP and shares its rate equally."""
    if not timestep > 0:
        raise NumericError(f"timestep {timestep} must be positive")
    if policy not in POLICIES:
        raise NumericError(f"unknown association policy {policy}")
    deployed = frozenset(deployment)
    for site_id in deployed:
        index.site(site_id)
    capacity = float(sum(rates[a] for a in deployed))
    rng = np.random.default_rng(seed)

    users = trace.users
    assoc: Dict[int, Optional[str]] = {u: None for u in users}
    in_range: Dict[int, frozenset] = {u: frozenset() for u in users}
    seen_at: Dict[int, Dict[str, int]] = {u: {} for u in users}
    user_acc = {u: 0.0 for u in users}
    leg_acc: Dict[Tuple[int, int], List[float]] = {}
    site_acc: Dict[str, List[float]] = {a: [0.0, 0.0] for a in deployed}
    totals: List[float] = []

    ticks = max(1, math.ceil(trace.duration / timestep - 1e-9))
    for i in range(ticks):
        t0 = i * timestep
        width = min(timestep, trace.duration - t0)
        t = t0 + width / 2
        load: Dict[str, int] = {}
        where: Dict[int, Tuple[TraceSegment, str]] = {}
        choosing: List[Tuple[int, frozenset]] = []

        # users that keep their AP are counted before anyone picks
        for u in users:
            seg = trace.at(u, t)
            if seg is None:
                assoc[u], in_range[u] = None, frozenset()
                continue
            sub = index.locate(seg.edge, seg.offset_at(t))
            where[u] = (seg, sub.id)
            now = sub.covering_sites & deployed
            for a in now - in_range[u]:
                seen_at[u][a] = i
            for a in in_range[u] - now:
                seen_at[u].pop(a, None)
            if not now:
                assoc[u] = None
            elif assoc[u] in now and now == in_range[u]:
                load[assoc[u]] = load.get(assoc[u], 0) + 1
            else:
                choosing.append((u, now))
            in_range[u] = now

        for u, now in choosing:
            options = sorted_ids(now)
            if policy == "random":
                assoc[u] = options[int(rng.integers(len(options)))]
            else:
                assoc[u] = min(options, key=lambda a: (load.get(a, 0), -seen_at[u][a], natural_key(a)))
            load[assoc[u]] = load.get(assoc[u], 0) + 1

        total = 0.0
        for u in users:
            a = assoc[u]
            rate = rates[a] / load[a] if a is not None else 0.0
            total += rate
            user_acc[u] += rate * width
            if u in where:
                seg, sub_id = where[u]
                acc = leg_acc.setdefault((u, seg.leg), [0.0, 0.0])
                acc[0] += rate * width
                acc[1] += width
                for b in index.subsegments[sub_id].covering_sites & deployed:
                    site_acc[b][0] += rate * width
                    site_acc[b][1] += width
        if record:
            totals.append(total)

    leg_means = {
        f"u{u}:{leg}": acc[0] / acc[1]
        for (u, leg), acc in sorted(leg_acc.items()) if acc[1] > 0
    }
    user_means = {u: user_acc[u] / trace.duration for u in users}
    values = list(leg_means.values())
    percentiles = (
        {q: float(np.percentile(values, q)) for q in (5, 25, 50, 75, 95)} if values else {}
    )
    densities = estimate_density(trace, index.network)
    report = SimReport(
        leg_means=leg_means,
        user_means=user_means,
        densities=densities,
        mean=float(np.mean(values)) if values else 0.0,
        percentiles=percentiles,
        ccdf=_ccdf(values),
        analytic=_analytic_gap(index, deployed, rates, densities, site_acc),
        tick_totals=totals if record else None,
        capacity=capacity,
    )
    log.info("simulated %d users, %d ticks: mean leg throughput %.4g", len(users), ticks, report.mean)
    return report


def _analytic_gap(index: PartitionIndex, deployed: frozenset, rates: Mapping[str, float],
                  densities: Mapping[str, float],
                  site_acc: Mapping[str, List[float]]) -> Dict[str, Dict[str, float]]:
    """Per deployed site: user-weighted analytic r_l over L_a against the simulated rate."""
    if not deployed:
        return {}
    scenario = Scenario(
        {e: 1.0 for e in index.network.edges},
        dict(densities),
        {a: rates.get(a, 0.0) for a in index.sites},
        "estimated",
    )
    profile = load_profile(index, deployed, scenario)
    out: Dict[str, Dict[str, float]] = {}
    for a in sorted_ids(deployed):
        subs = index.site_subsegments[a]
        mass = sum(float(profile.users[s]) for s in subs)
        analytic = (sum(float(profile.users[s] * profile.rates[s]) for s in subs) / mass) if mass > 0 else 0.0
        acc = site_acc.get(a, [0.0, 0.0])
        simulated = acc[0] / acc[1] if acc[1] > 0 else 0.0
        gap = (simulated - analytic) / analytic if analytic > 0 else 0.0
        out[a] = {"analytic": analytic, "simulated": simulated, "gap": gap}
    return out
