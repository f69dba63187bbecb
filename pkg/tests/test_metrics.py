import itertools
from fractions import Fraction

import numpy as np
import pytest

from roadcast.errors import NumericError, UnknownIdError
from roadcast.metrics import (
    Deployment,
    EdgeValueState,
    MetricKind,
    average_throughput,
    average_throughput_subsegments,
    contact_opportunity_distance,
    contact_opportunity_time,
    edge_weights,
    load_profile,
    path_metric,
    truncated_objective,
    weighted_value,
)
from roadcast.geometry import CandidateSite, Disk, Point, RoadEdge, RoadNetwork, RoadNode, partition_edges
from roadcast.scenario import Scenario, UncertaintyModel, mean_scenario, sample_scenarios

from conftest import grid_instance


def t1_scenario(index, speeds=None, density=1.0) -> Scenario:
    scenario = Scenario.uniform(index, 0.5, density, 1.0, label="t1")
    return scenario.with_speeds(speeds or {})


def test_distance_opportunity_exact(t1):
    path = t1.movements.path("p")
    assert contact_opportunity_distance(t1.index, path, {"a1"}, exact=True) == Fraction(1, 3)
    assert contact_opportunity_distance(t1.index, path, set(), exact=True) == 0
    assert contact_opportunity_distance(t1.index, path, {"a1", "a2", "a3"}) == pytest.approx(1.0)


def test_time_opportunity_weights_by_speed(t1):
    path = t1.movements.path("p")
    scenario = t1_scenario(t1.index, {"e1": 1.0})
    # 1 s covered out of 1 + 2 + 2
    value = contact_opportunity_time(t1.index, path, {"a1"}, scenario, exact=True)
    assert value == Fraction(1, 5)


def test_load_floor_keeps_light_sites_at_full_rate(t1):
    scenario = t1_scenario(t1.index, density=0.1)
    profile = load_profile(t1.index, {"a1"}, scenario)
    assert profile.site_users["a1"] == pytest.approx(0.1)
    assert profile.rates["e1:0"] == pytest.approx(1.0)
    assert profile.rates["e2:0"] == 0


def test_shared_subsegment_splits_users():
    # s1 covers [2, 6], s2 covers [4, 8]; [4, 6] is shared
    nodes = [RoadNode("a", Point(0, 0)), RoadNode("b", Point(10, 0))]
    network = RoadNetwork(nodes, [RoadEdge("e1", "a", "b", 10.0)])
    sites = [CandidateSite(s, Point(x, 0), Disk(Point(x, 0), 2.0)) for s, x in (("s1", 4.0), ("s2", 6.0))]
    index = partition_edges(network, sites)
    scenario = Scenario.uniform(index, 10.0, 1.0, 1.0)
    profile = load_profile(index, {"s1", "s2"}, scenario, exact=True)
    assert profile.site_users == {"s1": 3, "s2": 3}
    assert profile.counts["e1:2"] == 2
    assert profile.rates["e1:2"] == Fraction(1, 3)
    assert profile.edge_rates["e1"] == Fraction(6, 10) * Fraction(1, 3)


def test_throughput_forms_agree():
    inst = grid_instance(11, sites=14)
    model = UncertaintyModel.from_index(inst.index)
    rng = np.random.default_rng(0)
    sites = inst.index.site_ids()
    for scenario in sample_scenarios(model, 3, seed=5):
        chosen = [s for s in sites if rng.random() < 0.5]
        profile = load_profile(inst.index, chosen, scenario)
        for path in inst.movements:
            a = average_throughput(inst.index, path, chosen, scenario, profile=profile)
            b = average_throughput_subsegments(inst.index, path, chosen, scenario, profile=profile)
            assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_path_metric_needs_scenario(t1):
    with pytest.raises(NumericError):
        path_metric(t1.index, t1.movements.path("p"), {"a1"}, MetricKind.TIME)


def test_unknown_site_rejected(t1):
    with pytest.raises(UnknownIdError):
        load_profile(t1.index, {"nope"}, t1_scenario(t1.index))


def test_nonpositive_speed_rejected(t1):
    scenario = t1_scenario(t1.index, {"e2": 0.0})
    with pytest.raises(NumericError):
        contact_opportunity_time(t1.index, t1.movements.path("p"), {"a1"}, scenario)


def test_truncated_objective_t3(t3):
    assert truncated_objective(t3.index, t3.movements, {"a", "b"}, 0.6) == pytest.approx(1.1)
    assert truncated_objective(t3.index, t3.movements, {"a"}, 1.0, exact=True) == Fraction(1)


def test_deployment_cost(t3):
    dep = Deployment.of(t3.index, ["b", "a"])
    assert dep.cost == 2.0
    assert dep.sorted() == ["a", "b"]


def _submodular(f, ground, trials, rng, tol=1e-9):
    ground = list(ground)
    for _ in range(trials):
        big = {s for s in ground if rng.random() < 0.5}
        small = {s for s in big if rng.random() < 0.5}
        outside = [s for s in ground if s not in big]
        if not outside:
            continue
        a = outside[int(rng.integers(len(outside)))]
        gain_small = f(small | {a}) - f(small)
        gain_big = f(big | {a}) - f(big)
        assert gain_small >= gain_big - tol, (sorted(small), sorted(big), a)


@pytest.mark.parametrize("kind", [MetricKind.DISTANCE, MetricKind.TIME])
def test_opportunity_objectives_are_submodular(kind):
    rng = np.random.default_rng(42)
    for seed in range(8):
        inst = grid_instance(seed, sites=10)
        scenario = mean_scenario(UncertaintyModel.from_index(inst.index))
        scenarios = [scenario] if kind is not MetricKind.DISTANCE else []

        def f(sites):
            return truncated_objective(inst.index, inst.movements, sites, 0.5, kind, scenarios)

        _submodular(f, inst.index.site_ids(), 250, rng)


def test_throughput_with_disjoint_coverage_is_submodular():
    rng = np.random.default_rng(3)
    for seed in range(8):
        inst = grid_instance(seed, sites=10, disjoint=True)
        scenario = mean_scenario(UncertaintyModel.from_index(inst.index))

        def f(sites):
            return truncated_objective(inst.index, inst.movements, sites, 2.0, MetricKind.THROUGHPUT, [scenario])

        _submodular(f, inst.index.site_ids(), 250, rng)


@pytest.mark.parametrize("kind", list(MetricKind))
def test_incremental_state_matches_direct(kind):
    inst = grid_instance(9, sites=12)
    index = inst.index
    scenario = mean_scenario(UncertaintyModel.from_index(index))
    state = EdgeValueState(index, kind, scenario)
    added = []
    for site_id in index.site_ids()[::2]:
        predicted = state.delta(site_id)
        changed = state.add(site_id)
        assert changed == predicted
        added.append(site_id)
        for path in inst.movements:
            weights = edge_weights(index, path, kind, scenario)
            fast = weighted_value(state, path.edges, weights)
            slow = path_metric(index, path, added, kind, scenario)
            assert fast == pytest.approx(slow, rel=1e-9, abs=1e-12)


def test_incremental_state_exact_t1(t1):
    scenario = t1_scenario(t1.index, {"e1": 1.0})
    state = EdgeValueState(t1.index, MetricKind.THROUGHPUT, scenario, exact=True, sites=["a1", "a3"])
    path = t1.movements.path("p")
    weights = edge_weights(t1.index, path, MetricKind.THROUGHPUT, scenario, exact=True)
    assert weighted_value(state, path.edges, weights) == average_throughput(
        t1.index, path, {"a1", "a3"}, scenario, exact=True)


def test_all_subsets_bounded(t1):
    path = t1.movements.path("p")
    scenario = t1_scenario(t1.index)
    sites = t1.index.site_ids()
    for r in range(len(sites) + 1):
        for chosen in itertools.combinations(sites, r):
            for kind in MetricKind:
                v = path_metric(t1.index, path, chosen, kind, scenario)
                assert 0 <= v <= 1 + 1e-12
