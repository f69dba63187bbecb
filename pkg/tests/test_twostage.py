import pytest

from roadcast.formats import read_network, load_paths
from roadcast.geometry import partition_edges
from roadcast.metrics import MetricKind, average_throughput
from roadcast.planner import (
    PlanProblem,
    twostage_evaluate,
    twostage_expected,
    twostage_saa,
    twostage_secondonly,
)
from roadcast.scenario import UncertaintyModel, sample_scenarios

from conftest import T1_NETWORK, T1_PATHS, Fixture

LAM = 0.5


@pytest.fixture
def staged() -> Fixture:
    """T1 with first-stage cost 1 and second-stage cost 3 on every site."""
    text = T1_NETWORK.replace("cost 1", "cost2 1 3")
    parsed = read_network(text)
    index = partition_edges(parsed.network, parsed.sites)
    return Fixture(index, load_paths(T1_PATHS, parsed.network))


def problem(inst, **kw) -> PlanProblem:
    return PlanProblem(index=inst.index, movements=inst.movements, kind=MetricKind.THROUGHPUT, lam=LAM, **kw)


def tests_for(inst, n=6, seed=99):
    return sample_scenarios(UncertaintyModel.from_index(inst.index), n, seed, prefix="test")


tests_for.__test__ = False  # helper, not a test


def assert_every_scenario_met(inst, result, scenarios):
    by_label = {s.label: s for s in scenarios}
    for label, extra in result.second_stage.items():
        sites = set(result.first_stage) | set(extra)
        for path in inst.movements:
            assert average_throughput(inst.index, path, sites, by_label[label]) >= LAM - 1e-9


def test_saa_without_pruning_charges_copy_cost(staged):
    samples = tests_for(staged, 8, seed=1)
    result = twostage_saa(problem(staged), 8, seed=1, prune=False, samples=samples)
    assert result.method == "saa"
    assert set(result.second_stage) == {s.label for s in samples}
    refund = sum(len(ids) * 3 / 8 for ids in result.extras["overlap"].values())
    assert float(result.total) == pytest.approx(float(result.copy_cost) - refund)
    assert_every_scenario_met(staged, result, samples)


@pytest.mark.parametrize("seed", range(6))
def test_saa_first_and_second_stage_are_disjoint(staged, seed):
    samples = tests_for(staged, 5, seed=seed)
    for prune in (False, True):
        result = twostage_saa(problem(staged), 5, seed=seed, prune=prune, samples=samples)
        for extra in result.second_stage.values():
            assert not (extra & result.first_stage)


def test_saa_pruning_never_duplicates_first_stage(staged):
    samples = tests_for(staged, 8, seed=2)
    result = twostage_saa(problem(staged), 8, seed=2, prune=True, samples=samples)
    for extra in result.second_stage.values():
        assert not (extra & result.first_stage)
    assert float(result.total) <= float(result.copy_cost) + 1e-9
    assert_every_scenario_met(staged, result, samples)


def test_saa_is_seeded(staged):
    first = twostage_saa(problem(staged), 5, seed=4)
    second = twostage_saa(problem(staged), 5, seed=4)
    assert first.first_stage == second.first_stage
    assert first.second_stage == second.second_stage


def test_secondonly_buys_nothing_up_front(staged):
    tests = tests_for(staged)
    result = twostage_secondonly(problem(staged), tests)
    assert result.method == "sec"
    assert result.first_stage == frozenset()
    assert result.first_cost == 0
    # two sites at second-stage cost 3 in every scenario
    assert all(cost == 6.0 for cost in result.second_costs.values())
    assert_every_scenario_met(staged, result, tests)


def test_expected_fixes_first_stage_on_mean_scenario(staged):
    tests = tests_for(staged)
    result = twostage_expected(problem(staged), tests)
    assert result.method == "exp"
    assert len(result.first_stage) == 2
    assert result.first_cost == 2.0
    assert_every_scenario_met(staged, result, tests)
    assert result.total == pytest.approx(result.first_cost + result.expected_second_cost)


def test_evaluate_augments_fixed_first_stage(staged):
    tests = tests_for(staged)
    result = twostage_evaluate(problem(staged), ["a1", "a2", "a3"], tests)
    assert all(extra == frozenset() for extra in result.second_stage.values())
    assert result.expected_second_cost == 0
    assert result.first_cost == 3.0


def test_inflation_scales_second_stage(staged):
    inflated = [s.with_inflation(5.0) for s in staged.index.sites.values()]
    index = partition_edges(staged.network, inflated)
    inst = Fixture(index, staged.movements)
    result = twostage_secondonly(problem(inst), tests_for(inst, 3))
    assert all(cost == 10.0 for cost in result.second_costs.values())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planning_ahead_pays_off(staged, seed):
    inflated = [s.with_inflation(10.0) for s in staged.index.sites.values()]
    inst = Fixture(partition_edges(staged.network, inflated), staged.movements)
    learn = sample_scenarios(UncertaintyModel.from_index(inst.index), 8, seed)
    tests = tests_for(inst, 6, seed=seed + 100)
    saa = twostage_saa(problem(inst), 8, seed=seed, samples=learn)
    saa_on_tests = twostage_evaluate(problem(inst), saa.first_stage, tests)
    exp = twostage_expected(problem(inst), tests)
    sec = twostage_secondonly(problem(inst), tests)
    assert float(saa_on_tests.total) <= float(exp.total) + 1e-9
    assert float(exp.total) <= float(sec.total) + 1e-9
    assert_every_scenario_met(inst, saa_on_tests, tests)
