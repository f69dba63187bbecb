"""
roadcast — Movement paths
Shortest-path sampling, projection of paths onto subsegments, and the
path-splitting reduction that drops paths implied by two of their halves.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .config import EPS_GEO
from .errors import NoQualifyingPairError, ParseError, UnknownIdError
from .geometry import PartitionIndex, RoadNetwork, natural_key, sorted_ids

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MovementPath:
    id: str
    nodes: Tuple[str, ...]
    edges: Tuple[str, ...]
    length: float

    @classmethod
    def from_nodes(cls, network: RoadNetwork, path_id: str, nodes: Sequence[str]) -> "MovementPath":
        nodes = tuple(nodes)
        if len(nodes) < 2:
            raise ParseError(f"path {path_id} needs at least two nodes")
        if len(set(nodes)) != len(nodes):
            raise ParseError(f"path {path_id} repeats a node")
        for n in nodes:
            if n not in network.nodes:
                raise UnknownIdError(f"path {path_id} references missing node {n}")
        edges = tuple(network.edge_between(a, b).id for a, b in zip(nodes, nodes[1:]))
        length = sum(network.edges[e].length for e in edges)
        return cls(path_id, nodes, edges, length)

    def key(self) -> Tuple[str, ...]:
        """Orientation-free identity of the node sequence."""
        return min(self.nodes, tuple(reversed(self.nodes)))


@dataclass
class MovementSet:
    paths: List[MovementPath]
    demands: Dict[str, float]
    min_length: Optional[float] = None
    count: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        seen = set()
        for p in self.paths:
            if p.id in seen:
                raise ParseError(f"duplicate path id {p.id}")
            seen.add(p.id)
            demand = self.demands.setdefault(p.id, 1.0)
            if not demand > 0:
                raise ParseError(f"path {p.id}: demand must be positive")
        self.paths = sorted(self.paths, key=lambda p: natural_key(p.id))

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def path(self, path_id: str) -> MovementPath:
        for p in self.paths:
            if p.id == path_id:
                return p
        raise UnknownIdError(f"unknown path {path_id}")

    def subset(self, keep: Iterable[str]) -> "MovementSet":
        keep = set(keep)
        return MovementSet(
            [p for p in self.paths if p.id in keep],
            {k: v for k, v in self.demands.items() if k in keep},
            self.min_length, self.count, self.seed,
        )


# ─── Shortest paths ───────────────────────────────────────────────────────────

def _weight(fastest: bool) -> str:
    return "fastest" if fastest else "length"


def _distances_to(network: RoadNetwork, target: str, fastest: bool) -> Dict[str, float]:
    return nx.single_source_dijkstra_path_length(network.graph, target, weight=_weight(fastest))


def shortest_path(network: RoadNetwork, source: str, target: str, fastest: bool = False,
                  to_target: Optional[Dict[str, float]] = None) -> List[str]:
    """Shortest path with the lexicographically smallest node sequence among ties."""
    dist = to_target if to_target is not None else _distances_to(network, target, fastest)
    if source not in dist:
        raise UnknownIdError(f"no route from {source} to {target}")
    w = _weight(fastest)
    tol = EPS_GEO * max(1.0, dist[source])
    path = [source]
    here = source
    while here != target:
        step = None
        for nb in sorted(network.graph.neighbors(here), key=natural_key):
            if nb in path:
                continue
            if abs(network.graph.edges[here, nb][w] + dist[nb] - dist[here]) <= tol:
                step = nb
                break
        if step is None:
            raise UnknownIdError(f"shortest-path reconstruction failed at {here}")
        path.append(step)
        here = step
    return path


def generate_paths(network: RoadNetwork, min_length: float, count: int, seed: int,
                   fastest: bool = False) -> MovementSet:
    """Sample node pairs at distance >= min_length and keep their shortest paths."""
    if not min_length > 0:
        raise ParseError("minimum path length must be positive")
    nodes = sorted_ids(network.nodes)
    length_of = dict(nx.all_pairs_dijkstra_path_length(network.graph, weight="length"))
    pairs = [
        (a, b)
        for i, a in enumerate(nodes)
        for b in nodes[i + 1:]
        if length_of[a][b] >= min_length
    ]
    if not pairs:
        raise NoQualifyingPairError(
            f"no node pair is at least {min_length} m apart "
            f"(diameter {max(max(d.values()) for d in length_of.values()):.1f} m)"
        )

    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(pairs), size=count)
    seen: Dict[Tuple[str, str], None] = {}
    for i in draws:
        seen.setdefault(pairs[int(i)], None)

    paths = []
    to_target: Dict[str, Dict[str, float]] = {}
    for k, (a, b) in enumerate(seen):
        if b not in to_target:
            to_target[b] = _distances_to(network, b, fastest)
        nodes_ab = shortest_path(network, a, b, fastest, to_target[b])
        paths.append(MovementPath.from_nodes(network, f"p{k + 1}", nodes_ab))
    log.info("sampled %d distinct paths from %d draws over %d qualifying pairs",
             len(paths), count, len(pairs))
    return MovementSet(paths, {p.id: 1.0 for p in paths}, min_length, count, seed)


# ─── Demands ──────────────────────────────────────────────────────────────────

def normalize_demands(movements: MovementSet) -> Tuple[float, Dict[str, float]]:
    """lambda = min_p lambda_p and the per-path factor lambda / lambda_p."""
    lam = min(movements.demands[p.id] for p in movements)
    return lam, {p.id: lam / movements.demands[p.id] for p in movements}


# ─── Path splitting reduction ─────────────────────────────────────────────────

@dataclass
class Reduction:
    movements: MovementSet
    removed: List[str] = field(default_factory=list)
    long_removed: int = 0
    reason: Optional[str] = None


def reduce_paths(movements: MovementSet, index: Optional[PartitionIndex] = None) -> MovementSet:
    """Drop every path that splits at an inner node into two paths of the set."""
    return split_reduction(movements).movements


def split_reduction(movements: MovementSet) -> Reduction:
    """reduce_paths plus its bookkeeping: removed ids, long paths, skip reason."""
    demands = {movements.demands[p.id] for p in movements}
    if len(demands) > 1:
        reason = "demands are not uniform; splitting rule needs a single target"
        log.warning("path reduction skipped: %s", reason)
        return Reduction(movements, reason=reason)

    current = {p.id: p for p in movements}
    removed: List[str] = []
    while True:
        keys = {p.key() for p in current.values()}
        drop = []
        for pid in sorted_ids(current):
            nodes = current[pid].nodes
            for i in range(1, len(nodes) - 1):
                head = nodes[: i + 1]
                tail = nodes[i:]
                if min(head, head[::-1]) in keys and min(tail, tail[::-1]) in keys:
                    drop.append(pid)
                    break
        if not drop:
            break
        for pid in drop:
            del current[pid]
        removed.extend(drop)

    long_removed = 0
    if movements.min_length:
        long_removed = sum(
            1 for pid in removed if movements.path(pid).length > 2 * movements.min_length
        )
    if removed:
        log.info("path splitting removed %d of %d paths", len(removed), len(movements))
    return Reduction(movements.subset(current), removed, long_removed)


# ─── Projection ───────────────────────────────────────────────────────────────

def path_subsegments(index: PartitionIndex, path: MovementPath) -> List[str]:
    """L_p in traversal order."""
    out: List[str] = []
    for a, edge_id in zip(path.nodes, path.edges):
        subs = index.edge_subs(edge_id)
        edge = index.network.edges[edge_id]
        out.extend(subs if edge.u == a else reversed(subs))
    return out


def sites_touching(index: PartitionIndex, path: MovementPath) -> FrozenSet[str]:
    """A_p: sites covering at least one subsegment of the path."""
    sites = set()
    for edge_id in path.edges:
        for sub in index.edge_subs(edge_id):
            sites.update(index.subsegments[sub].covering_sites)
    return frozenset(sites)
