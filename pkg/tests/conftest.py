import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from roadcast.formats import load_paths, read_network
from roadcast.geometry import (
    CandidateSite,
    Disk,
    PartitionIndex,
    Point,
    RoadEdge,
    RoadNetwork,
    RoadNode,
    partition_edges,
)
from roadcast.paths import MovementSet, generate_paths
from roadcast.metrics import contact_opportunity_distance

# Three unit edges on a line, one unit disk per edge.
T1_NETWORK = """\
# a --e1-- m1 --e2-- m2 --e3-- b
node a 0 0
node m1 1 0 artificial
node m2 2 0 artificial
node b 3 0
edge e1 a m1 0.5 1 1 1
edge e2 m1 m2 0.5 1 1 1
edge e3 m2 b 0.5 1 1 1
site a1 0.5 0 disk 0.5 cost 1 rate 1 1
site a2 1.5 0 disk 0.5 cost 1 rate 1 1
site a3 2.5 0 disk 0.5 cost 1 rate 1 1
"""
T1_PATHS = "path p a m1 m2 b\n"

# Two perpendicular 10 m roads; a covers half of each, b and c 3 m at the ends.
T3_NETWORK = """\
node W -10 0
node O 0 0
node N 0 10
edge e1 W O
edge e2 O N
site a 0 0 disk 5
site b -8.5 0 disk 1.5
site c 0 8.5 disk 1.5
"""
T3_PATHS = "path p1 W O\npath p2 O N\n"


@dataclass
class Fixture:
    index: PartitionIndex
    movements: MovementSet

    @property
    def network(self) -> RoadNetwork:
        return self.index.network


def load_fixture(network_text: str, paths_text: str) -> Fixture:
    parsed = read_network(network_text)
    index = partition_edges(parsed.network, parsed.sites)
    return Fixture(index, load_paths(paths_text, parsed.network))


@pytest.fixture
def t1() -> Fixture:
    return load_fixture(T1_NETWORK, T1_PATHS)


@pytest.fixture
def t3() -> Fixture:
    return load_fixture(T3_NETWORK, T3_PATHS)


@pytest.fixture
def write_inputs(tmp_path: Path):
    """Write named text files into tmp_path and return their paths."""
    def _write(**files: str) -> dict:
        out = {}
        for name, text in files.items():
            p = tmp_path / f"{name}.txt"
            p.write_text(text, encoding="utf-8")
            out[name] = str(p)
        return out
    return _write


# ─── Random instances ─────────────────────────────────────────────────────────

def grid_network(rows: int, cols: int, spacing: float, rng: np.random.Generator) -> RoadNetwork:
    nodes = [RoadNode(f"n{r}x{c}", Point(c * spacing, r * spacing)) for r in range(rows) for c in range(cols)]
    edges = []
    k = itertools.count(1)
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr < rows and cc < cols:
                    lo = float(rng.uniform(5, 15))
                    hi = lo * float(rng.uniform(1, 2))
                    edges.append(RoadEdge(f"e{next(k)}", f"n{r}x{c}", f"n{rr}x{cc}", spacing, (lo, hi)))
    return RoadNetwork(nodes, edges)


def grid_instance(seed: int, sites: int = 12, rows: int = 4, cols: int = 4, spacing: float = 100.0,
                  paths: int = 8, disjoint: bool = False) -> Fixture:
    """Grid roads with random disk sites; disjoint sites sit on distinct edge midpoints."""
    rng = np.random.default_rng(seed)
    network = grid_network(rows, cols, spacing, rng)
    out = []
    if disjoint:
        edge_ids = sorted(network.edges)
        chosen = rng.choice(len(edge_ids), size=min(sites, len(edge_ids)), replace=False)
        for i, j in enumerate(sorted(int(x) for x in chosen)):
            e = network.edges[edge_ids[j]]
            a, b = network.position(e.u), network.position(e.v)
            center = Point((a.x + b.x) / 2, (a.y + b.y) / 2)
            out.append(CandidateSite(f"s{i + 1}", center, Disk(center, spacing * float(rng.uniform(0.1, 0.3))),
                                     cost=float(rng.integers(1, 4))))
    else:
        w, h = (cols - 1) * spacing, (rows - 1) * spacing
        for i in range(sites):
            center = Point(float(rng.uniform(0, w)), float(rng.uniform(0, h)))
            out.append(CandidateSite(f"s{i + 1}", center, Disk(center, float(rng.uniform(30, 80))),
                                     cost=float(rng.integers(1, 4))))
    index = partition_edges(network, out)
    movements = generate_paths(network, 2 * spacing, paths, seed)
    # keep only paths some site can reach
    every = list(index.sites)
    keep = [p.id for p in movements if contact_opportunity_distance(index, p, every) > 0]
    return Fixture(index, movements.subset(keep))
