import itertools

import numpy as np
import pytest

from roadcast.errors import NoQualifyingPairError, ParseError
from roadcast.formats import load_paths, read_network
from roadcast.metrics import contact_opportunity_distance
from roadcast.paths import (
    MovementPath,
    MovementSet,
    generate_paths,
    normalize_demands,
    path_subsegments,
    reduce_paths,
    shortest_path,
    sites_touching,
    split_reduction,
)

from conftest import T1_NETWORK, T3_NETWORK, grid_instance

LINE = "node a 0 0\nnode b 10 0\nnode c 20 0\nnode d 30 0\nedge e1 a b\nedge e2 b c\nedge e3 c d\n"


def test_from_nodes_rejects_repeats():
    network = read_network(T1_NETWORK).network
    with pytest.raises(ParseError):
        MovementPath.from_nodes(network, "p", ["a", "m1", "a"])
    with pytest.raises(ParseError):
        MovementPath.from_nodes(network, "p", ["a"])


def test_generated_paths_are_deterministic():
    network = grid_instance(1).network
    first = generate_paths(network, 250.0, 12, seed=4)
    second = generate_paths(network, 250.0, 12, seed=4)
    assert [p.nodes for p in first] == [p.nodes for p in second]
    assert all(p.length >= 250.0 for p in first)
    assert len({p.key() for p in first}) == len(first)


def test_shortest_path_breaks_ties_lexicographically():
    network = grid_instance(1).network
    # two equal routes around the unit square: via n0x1 or via n1x0
    assert shortest_path(network, "n0x0", "n1x1") == ["n0x0", "n0x1", "n1x1"]


def test_no_qualifying_pair():
    network = read_network(T3_NETWORK).network
    with pytest.raises(NoQualifyingPairError):
        generate_paths(network, 1000.0, 5, seed=0)


def test_path_splitting_drops_composed_paths():
    network = read_network(LINE).network
    movements = load_paths("path p1 a b\npath p2 b c\npath p3 a b c\npath p4 c d\npath p5 a b c d\n", network)
    reduction = split_reduction(movements)
    assert [p.id for p in reduction.movements] == ["p1", "p2", "p4"]
    assert sorted(reduction.removed) == ["p3", "p5"]
    assert [p.id for p in reduce_paths(movements)] == ["p1", "p2", "p4"]


def test_path_splitting_reversed_halves():
    network = read_network(LINE).network
    movements = load_paths("path p1 b a\npath p2 c b\npath p3 a b c\n", network)
    assert [p.id for p in reduce_paths(movements)] == ["p1", "p2"]


def test_path_splitting_skipped_for_mixed_demands():
    network = read_network(LINE).network
    movements = load_paths("path p1 a b\npath p2 b c lambda 2\npath p3 a b c\n", network)
    reduction = split_reduction(movements)
    assert len(reduction.movements) == 3
    assert reduction.reason is not None


def with_split_halves(inst, rng) -> MovementSet:
    """The instance paths plus, for each, its two halves around a random inner node."""
    paths = list(inst.movements)
    for p in inst.movements:
        i = int(rng.integers(1, len(p.nodes) - 1))
        paths.append(MovementPath.from_nodes(inst.network, f"{p.id}h", p.nodes[: i + 1]))
        paths.append(MovementPath.from_nodes(inst.network, f"{p.id}t", p.nodes[i:]))
    return MovementSet(paths, {})


def feasible(index, movements, sites, lam) -> bool:
    return all(contact_opportunity_distance(index, p, sites) >= lam for p in movements)


@pytest.mark.slow
def test_path_splitting_keeps_the_feasible_deployments():
    rng = np.random.default_rng(8)
    for seed in range(3):
        inst = grid_instance(seed, sites=8)
        movements = with_split_halves(inst, rng)
        reduced = reduce_paths(movements)
        assert len(reduced) <= len(movements) - len(inst.movements)
        sites = inst.index.site_ids()
        for lam in (0.3, 0.55):
            for r in range(len(sites) + 1):
                for chosen in itertools.combinations(sites, r):
                    assert feasible(inst.index, movements, chosen, lam) == feasible(inst.index, reduced, chosen, lam)


def test_normalize_demands():
    network = read_network(LINE).network
    movements = load_paths("path p1 a b lambda 2\npath p2 b c lambda 4\n", network)
    lam, factors = normalize_demands(movements)
    assert lam == 2
    assert factors == {"p1": 1.0, "p2": 0.5}


def test_projection_follows_direction(t1):
    path = t1.movements.path("p")
    assert path_subsegments(t1.index, path) == ["e1:0", "e2:0", "e3:0"]
    back = MovementPath.from_nodes(t1.network, "q", ["b", "m2", "m1", "a"])
    assert path_subsegments(t1.index, back) == ["e3:0", "e2:0", "e1:0"]
    assert sites_touching(t1.index, path) == frozenset({"a1", "a2", "a3"})


def test_subset_keeps_demands():
    network = read_network(LINE).network
    movements = load_paths("path p1 a b lambda 2\npath p2 b c\n", network)
    sub = movements.subset(["p1"])
    assert isinstance(sub, MovementSet)
    assert sub.demands == {"p1": 2.0}
