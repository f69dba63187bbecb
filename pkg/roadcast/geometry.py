"""
roadcast — Geometry
Road network, coverage shapes, and the subsegment partition that candidate
coverage regions induce on road centerlines.
"""
import bisect
import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import shapely
from shapely.geometry import LineString
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry.polygon import orient

from .config import (
    DEFAULT_COST,
    DEFAULT_DENSITY_INTERVAL,
    DEFAULT_RATE_INTERVAL,
    DEFAULT_SPEED_INTERVAL,
    EPS_GEO,
)
from .errors import (
    DegenerateEdgeError,
    DisconnectedNetworkError,
    ParseError,
    PartitionError,
    UnknownIdError,
)

log = logging.getLogger(__name__)

Interval = Tuple[float, float]

_DIGITS = re.compile(r"(\d+)")


def natural_key(ident: str) -> Tuple:
    """Sort key that orders "a2" before "a10"."""
    return tuple(
        (0, int(tok), "") if tok.isdigit() else (1, 0, tok)
        for tok in _DIGITS.split(ident)
        if tok
    )


def sorted_ids(ids: Iterable[str]) -> List[str]:
    return sorted(ids, key=natural_key)


# ─── Road Network ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ParseError(f"non-finite coordinate ({self.x}, {self.y})")

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class RoadNode:
    id: str
    position: Point
    artificial: bool = False


@dataclass(frozen=True)
class RoadEdge:
    id: str
    u: str
    v: str
    length: float
    speed_interval: Interval = DEFAULT_SPEED_INTERVAL
    density_interval: Interval = DEFAULT_DENSITY_INTERVAL

    def __post_init__(self):
        if not self.length > EPS_GEO:
            raise DegenerateEdgeError(f"edge {self.id} has length {self.length} <= {EPS_GEO}")
        v1, v2 = self.speed_interval
        if not 0 < v1 <= v2:
            raise ParseError(f"edge {self.id}: speed interval [{v1}, {v2}] must satisfy 0 < v1 <= v2")
        h1, h2 = self.density_interval
        if not 0 < h1 <= h2:
            raise ParseError(f"edge {self.id}: density interval [{h1}, {h2}] must satisfy 0 < h1 <= h2")

    @property
    def endpoints(self) -> Tuple[str, str]:
        return self.u, self.v

    def other(self, node_id: str) -> str:
        return self.v if node_id == self.u else self.u


class RoadNetwork:
    """Connected, undirected geometric graph of straight road segments."""

    def __init__(self, nodes: Iterable[RoadNode], edges: Iterable[RoadEdge], eps: float = EPS_GEO):
        self.eps = eps
        self.nodes: Dict[str, RoadNode] = {}
        self.edges: Dict[str, RoadEdge] = {}
        self.adjacency: Dict[str, List[str]] = {}
        self.graph = nx.Graph()

        for node in nodes:
            if node.id in self.nodes:
                raise ParseError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
            self.adjacency[node.id] = []
            self.graph.add_node(node.id)

        for edge in edges:
            if edge.id in self.edges:
                raise ParseError(f"duplicate edge id {edge.id}")
            for end in edge.endpoints:
                if end not in self.nodes:
                    raise UnknownIdError(f"edge {edge.id} references missing node {end}")
            if edge.u == edge.v:
                raise ParseError(f"edge {edge.id} is a self-loop at {edge.u}")
            if self.graph.has_edge(edge.u, edge.v):
                other = self.graph.edges[edge.u, edge.v]["id"]
                raise ParseError(
                    f"edge {edge.id} duplicates {other} between {edge.u} and {edge.v}; "
                    f"insert an artificial node"
                )
            euclid = self.nodes[edge.u].position.distance_to(self.nodes[edge.v].position)
            if not math.isclose(edge.length, euclid, rel_tol=1e-9, abs_tol=eps):
                raise ParseError(f"edge {edge.id}: length {edge.length} differs from geometry {euclid}")
            self.edges[edge.id] = edge
            self.adjacency[edge.u].append(edge.id)
            self.adjacency[edge.v].append(edge.id)
            self.graph.add_edge(edge.u, edge.v, id=edge.id, length=edge.length,
                                fastest=edge.length / edge.speed_interval[1])

        for node_id in self.adjacency:
            self.adjacency[node_id] = sorted_ids(self.adjacency[node_id])

        if not self.nodes:
            raise ParseError("network has no nodes")
        if not nx.is_connected(self.graph):
            parts = nx.number_connected_components(self.graph)
            raise DisconnectedNetworkError(f"road network is disconnected ({parts} components)")

    def __repr__(self) -> str:
        return f"RoadNetwork({len(self.nodes)} nodes, {len(self.edges)} edges)"

    def edge(self, edge_id: str) -> RoadEdge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownIdError(f"unknown edge {edge_id}") from None

    def edge_between(self, a: str, b: str) -> RoadEdge:
        if not self.graph.has_edge(a, b):
            raise UnknownIdError(f"nodes {a} and {b} are not adjacent")
        return self.edges[self.graph.edges[a, b]["id"]]

    def position(self, node_id: str) -> Point:
        return self.nodes[node_id].position

    def nearest_node(self, point: Point) -> str:
        return min(
            sorted_ids(self.nodes),
            key=lambda n: self.nodes[n].position.distance_to(point),
        )


# ─── Coverage Regions ─────────────────────────────────────────────────────────

def _circle_roots(a: Point, ux: float, uy: float, center: Point, radius: float, eps: float) -> List[float]:
    """Arclengths t where a + t*u crosses the circle; tangencies are ignored."""
    fx, fy = a.x - center.x, a.y - center.y
    b = fx * ux + fy * uy
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - c
    if math.isnan(disc):
        raise ArithmeticError("NaN discriminant")
    if disc <= 0:
        return []
    s = math.sqrt(disc)
    if s <= eps:
        return []
    return [-b - s, -b + s]


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


@dataclass(frozen=True)
class Disk:
    center: Point
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParseError(f"disk radius {self.radius} must be positive")

    def contains(self, p: Point, eps: float = EPS_GEO) -> bool:
        return self.center.distance_to(p) <= self.radius + eps

    def bounds(self) -> Tuple[float, float, float, float]:
        c, r = self.center, self.radius
        return c.x - r, c.y - r, c.x + r, c.y + r

    def crossings(self, a: Point, ux: float, uy: float, length: float, eps: float) -> List[float]:
        return _circle_roots(a, ux, uy, self.center, self.radius, eps)


# unit directions of the rays separating quadrant k-1 from quadrant k
_RAYS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


@dataclass(frozen=True)
class FourSector:
    """Four axis-aligned 90-degree sectors; radii[q] covers [90q, 90(q+1)) degrees."""
    center: Point
    radii: Tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.radii) != 4 or not all(r > 0 for r in self.radii):
            raise ParseError(f"sector radii {self.radii} must be four positive values")

    def quadrant(self, p: Point) -> int:
        angle = math.degrees(math.atan2(p.y - self.center.y, p.x - self.center.x)) % 360.0
        return min(int(angle // 90.0), 3)

    def contains(self, p: Point, eps: float = EPS_GEO) -> bool:
        d = self.center.distance_to(p)
        if d <= eps:
            return True
        return d <= self.radii[self.quadrant(p)] + eps

    def bounds(self) -> Tuple[float, float, float, float]:
        c, r = self.center, max(self.radii)
        return c.x - r, c.y - r, c.x + r, c.y + r

    @staticmethod
    def _in_closed_quadrant(dx: float, dy: float, q: int, tol: float) -> bool:
        if q == 0:
            return dx >= -tol and dy >= -tol
        if q == 1:
            return dx <= tol and dy >= -tol
        if q == 2:
            return dx <= tol and dy <= tol
        return dx >= -tol and dy <= tol

    def crossings(self, a: Point, ux: float, uy: float, length: float, eps: float) -> List[float]:
        ts: List[float] = []
        for q, r in enumerate(self.radii):
            tol = eps * max(1.0, r)
            for t in _circle_roots(a, ux, uy, self.center, r, eps):
                dx = a.x + t * ux - self.center.x
                dy = a.y + t * uy - self.center.y
                if self._in_closed_quadrant(dx, dy, q, tol):
                    ts.append(t)
        # boundary rays contribute only between the two adjacent radii
        for k, (ex, ey) in enumerate(_RAYS):
            denom = _cross(ux, uy, ex, ey)
            if abs(denom) <= eps:
                continue
            wx, wy = self.center.x - a.x, self.center.y - a.y
            t = _cross(wx, wy, ex, ey) / denom
            s = _cross(wx, wy, ux, uy) / denom
            lo, hi = sorted((self.radii[k - 1], self.radii[k]))
            if lo < s <= hi + eps:
                ts.append(t)
        return ts


@dataclass(frozen=True)
class PolygonRegion:
    vertices: Tuple[Point, ...]
    shape: ShapelyPolygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ParseError("polygon needs at least 3 vertices")
        poly = ShapelyPolygon([(p.x, p.y) for p in self.vertices])
        if not poly.is_valid or poly.area <= 0:
            raise ParseError("polygon must be simple with positive area")
        object.__setattr__(self, "shape", orient(poly, sign=1.0))

    def contains(self, p: Point, eps: float = EPS_GEO) -> bool:
        return self.shape.distance(ShapelyPoint(p.x, p.y)) <= eps

    def bounds(self) -> Tuple[float, float, float, float]:
        return self.shape.bounds

    def crossings(self, a: Point, ux: float, uy: float, length: float, eps: float) -> List[float]:
        line = LineString([(a.x, a.y), (a.x + ux * length, a.y + uy * length)])
        hits = line.intersection(self.shape.boundary)
        return [
            (float(x) - a.x) * ux + (float(y) - a.y) * uy
            for x, y in shapely.get_coordinates(hits)
        ]


CoverageRegion = Union[Disk, FourSector, PolygonRegion]


def region_contains(region: CoverageRegion, point: Point, eps: float = EPS_GEO) -> bool:
    """True iff point lies in the closed region."""
    return region.contains(point, eps)


# ─── Candidate Sites ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CandidateSite:
    id: str
    position: Point
    region: CoverageRegion
    cost: float = DEFAULT_COST
    first_stage_cost: Optional[float] = None
    second_stage_cost: Optional[float] = None
    rate_interval: Interval = DEFAULT_RATE_INTERVAL

    def __post_init__(self):
        if self.first_stage_cost is None:
            object.__setattr__(self, "first_stage_cost", self.cost)
        if self.second_stage_cost is None:
            object.__setattr__(self, "second_stage_cost", self.first_stage_cost)
        for name in ("cost", "first_stage_cost", "second_stage_cost"):
            if getattr(self, name) < 0:
                raise ParseError(f"site {self.id}: {name} must be nonnegative")
        if self.second_stage_cost < self.first_stage_cost:
            raise ParseError(f"site {self.id}: second-stage cost below first-stage cost")
        r1, r2 = self.rate_interval
        if not 0 < r1 <= r2:
            raise ParseError(f"site {self.id}: rate interval [{r1}, {r2}] must satisfy 0 < r1 <= r2")

    def with_inflation(self, factor: float) -> "CandidateSite":
        return dataclasses.replace(self, second_stage_cost=self.first_stage_cost * factor)


# ─── Partition ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Subsegment:
    id: str
    parent_edge: str
    start: float
    end: float
    length: float
    covering_sites: FrozenSet[str]


@dataclass
class PartitionIndex:
    network: RoadNetwork
    sites: Dict[str, CandidateSite]
    subsegments: Dict[str, Subsegment]
    edge_subsegments: Dict[str, Tuple[str, ...]]
    site_subsegments: Dict[str, Tuple[str, ...]]
    eps: float = EPS_GEO
    _starts: Dict[str, List[float]] = field(default_factory=dict, repr=False)

    def site(self, site_id: str) -> CandidateSite:
        try:
            return self.sites[site_id]
        except KeyError:
            raise UnknownIdError(f"unknown site {site_id}") from None

    def site_ids(self) -> List[str]:
        return sorted_ids(self.sites)

    def edge_subs(self, edge_id: str) -> Tuple[str, ...]:
        try:
            return self.edge_subsegments[edge_id]
        except KeyError:
            raise UnknownIdError(f"unknown edge {edge_id}") from None

    def locate(self, edge_id: str, offset: float) -> Subsegment:
        """Subsegment of edge_id holding the arclength offset."""
        subs = self.edge_subs(edge_id)
        if edge_id not in self._starts:
            self._starts[edge_id] = [self.subsegments[s].start for s in subs]
        i = bisect.bisect_right(self._starts[edge_id], offset) - 1
        return self.subsegments[subs[max(0, min(i, len(subs) - 1))]]


def _bbox_overlap(a: Sequence[float], b: Sequence[float], eps: float) -> bool:
    return a[0] <= b[2] + eps and b[0] <= a[2] + eps and a[1] <= b[3] + eps and b[1] <= a[3] + eps


def _edge_breakpoints(network: RoadNetwork, edge: RoadEdge, sites: Sequence[CandidateSite],
                      eps: float) -> List[float]:
    a = network.position(edge.u)
    b = network.position(edge.v)
    d = edge.length
    ux, uy = (b.x - a.x) / d, (b.y - a.y) / d
    points = [0.0, d]
    for site in sites:
        try:
            ts = site.region.crossings(a, ux, uy, d, eps)
        except (ArithmeticError, ValueError) as exc:
            raise PartitionError(f"boundary intersection failed: {exc}", edge.id, site.id) from exc
        for t in ts:
            if not math.isfinite(t):
                raise PartitionError(f"non-finite crossing {t}", edge.id, site.id)
            if eps < t < d - eps:
                points.append(t)
    points.sort()
    merged = [0.0]
    for t in points[1:]:
        if t - merged[-1] > eps:
            merged.append(t)
    if d - merged[-1] > eps:
        merged.append(d)
    else:
        merged[-1] = d
    return merged


def partition_edges(network: RoadNetwork, sites: Iterable[CandidateSite],
                    eps: float = EPS_GEO) -> PartitionIndex:
    """Split every edge at the points where a coverage boundary crosses it."""
    site_map: Dict[str, CandidateSite] = {}
    for site in sites:
        if site.id in site_map:
            raise ParseError(f"duplicate site id {site.id}")
        site_map[site.id] = site
    ordered_sites = [site_map[s] for s in sorted_ids(site_map)]
    bounds = {s.id: s.region.bounds() for s in ordered_sites}

    subsegments: Dict[str, Subsegment] = {}
    edge_subs: Dict[str, Tuple[str, ...]] = {}
    site_subs: Dict[str, List[str]] = {s: [] for s in site_map}

    for edge_id in sorted_ids(network.edges):
        edge = network.edges[edge_id]
        a = network.position(edge.u)
        b = network.position(edge.v)
        ebox = (min(a.x, b.x), min(a.y, b.y), max(a.x, b.x), max(a.y, b.y))
        near = [s for s in ordered_sites if _bbox_overlap(ebox, bounds[s.id], eps)]
        cuts = _edge_breakpoints(network, edge, near, eps)

        ids = []
        for i, (s0, s1) in enumerate(zip(cuts, cuts[1:])):
            mid_t = 0.5 * (s0 + s1) / edge.length
            mid = Point(a.x + (b.x - a.x) * mid_t, a.y + (b.y - a.y) * mid_t)
            cover = frozenset(s.id for s in near if region_contains(s.region, mid, eps))
            sub = Subsegment(f"{edge_id}:{i}", edge_id, s0, s1, s1 - s0, cover)
            subsegments[sub.id] = sub
            ids.append(sub.id)
            for site_id in cover:
                site_subs[site_id].append(sub.id)

        total = sum(subsegments[s].length for s in ids)
        assert math.isclose(total, edge.length, rel_tol=1e-9, abs_tol=eps), (edge_id, total)
        edge_subs[edge_id] = tuple(ids)

    log.debug("partitioned %d edges into %d subsegments for %d sites",
              len(edge_subs), len(subsegments), len(site_map))
    return PartitionIndex(
        network=network,
        sites=site_map,
        subsegments=subsegments,
        edge_subsegments=edge_subs,
        site_subsegments={s: tuple(v) for s, v in site_subs.items()},
        eps=eps,
    )


def covered_subsegments(index: PartitionIndex, deployment: Iterable[str]) -> FrozenSet[str]:
    """L_S: subsegments inside the union of the deployed regions."""
    covered = set()
    for site_id in deployment:
        index.site(site_id)
        covered.update(index.site_subsegments[site_id])
    return frozenset(covered)
