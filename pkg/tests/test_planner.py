import itertools
import math

import pytest

from roadcast.errors import CapExceededError, InfeasibleTargetError, NumericError
from roadcast.config import DELTA
from roadcast.metrics import MetricKind, average_throughput, contact_opportunity_distance
from roadcast.planner import (
    CoverEngine,
    Element,
    PlanProblem,
    baseline_maxmin_distance,
    baseline_random,
    candidate_pool,
    coverage_mass,
    greedy_mincost,
    maxopp_budget,
    robust_maxopp,
    robust_mincost_enum,
    robust_mincost_meanspeed,
    single_site_mass,
)
from roadcast.planner.greedy import run_greedy
from roadcast.report import plan_summary
from roadcast.scenario import (
    Scenario,
    UncertaintyModel,
    mean_scenario,
    mean_speed_scenario,
    worst_case_overall,
)

from conftest import T3_NETWORK, T3_PATHS, grid_instance, load_fixture


def problem_for(inst, **kw) -> PlanProblem:
    return PlanProblem(index=inst.index, movements=inst.movements, **kw)


# ─── Min-cost ─────────────────────────────────────────────────────────────────

def test_t3_mincost_picks_shared_site(t3):
    result = greedy_mincost(problem_for(t3, lam=0.5))
    assert result.sites == ["a"]
    assert result.cost == 1.0
    assert result.feasible
    assert result.values == {"p1": pytest.approx(0.5), "p2": pytest.approx(0.5)}
    assert [s.element for s in result.trail] == ["a"]


def test_t3_mincost_exact(t3):
    result = greedy_mincost(problem_for(t3, lam=0.75, exact=True))
    assert result.sites == ["a", "b", "c"]
    assert result.min_value == pytest.approx(0.8)


def test_t3_unreachable_target_reports_achievable(t3):
    with pytest.raises(InfeasibleTargetError) as info:
        greedy_mincost(problem_for(t3, lam=0.9))
    assert info.value.achievable == pytest.approx(0.8)
    assert info.value.exit_code == 4


def test_zero_target_needs_nothing(t3):
    result = greedy_mincost(problem_for(t3, lam=0.0))
    assert result.sites == [] and result.cost == 0


def test_pre_deployed_sites_are_free(t3):
    result = greedy_mincost(problem_for(t3, lam=0.8, pre_deployed={"a"}))
    assert result.sites == ["b", "c"]
    assert result.extras["pre_deployed"] == ["a"]


def test_per_path_demands(t3):
    t3.movements.demands.update({"p1": 0.8, "p2": 0.4})
    result = greedy_mincost(problem_for(t3))
    # p1 needs 0.8 of its length, p2 only 0.4
    assert result.sites == ["a", "b"]
    assert result.target == pytest.approx(0.4)


def test_time_metric_uses_scenario(t3):
    scenario = mean_scenario(UncertaintyModel.from_index(t3.index))
    result = greedy_mincost(problem_for(t3, kind=MetricKind.TIME, lam=0.5, scenario=scenario))
    assert result.sites == ["a"]
    with pytest.raises(NumericError):
        greedy_mincost(problem_for(t3, kind=MetricKind.TIME, lam=0.5))


def test_time_metric_reports_site_mass(t3):
    scenario = Scenario.uniform(t3.index, 10.0, 0.02, 5.0)
    result = greedy_mincost(problem_for(t3, kind=MetricKind.TIME, lam=0.5, scenario=scenario))
    # a covers 5 of 10 m on both roads, 1 s of travel time in total
    assert result.extras["max_site_distance"] == pytest.approx(10.0)
    assert result.extras["max_site_mass"] == pytest.approx(1.0)
    assert single_site_mass(problem_for(t3, kind=MetricKind.TIME, scenario=scenario), "b") == pytest.approx(0.3)
    assert plan_summary(result)["bound_factor"] == pytest.approx(1.0)


def reachable_target(inst, share=0.6) -> float:
    every = inst.index.site_ids()
    return share * min(float(contact_opportunity_distance(inst.index, p, every)) for p in inst.movements)


def test_lazy_and_naive_agree():
    lazy_evals = naive_evals = 0
    for seed in range(6):
        inst = grid_instance(seed, sites=25)
        lam = reachable_target(inst)
        lazy = greedy_mincost(problem_for(inst, lam=lam))
        naive = greedy_mincost(problem_for(inst, lam=lam, lazy=False))
        assert [s.element for s in lazy.trail] == [s.element for s in naive.trail]
        assert lazy.cost == naive.cost
        assert lazy.evaluations <= naive.evaluations
        lazy_evals += lazy.evaluations
        naive_evals += naive.evaluations
    assert lazy_evals < naive_evals


def test_greedy_within_log_bound_of_optimum():
    for seed in range(4):
        inst = grid_instance(seed, sites=8)
        lam = reachable_target(inst, 0.7)
        result = greedy_mincost(problem_for(inst, lam=lam))
        sites = inst.index.site_ids()
        best = math.inf
        for r in range(len(sites) + 1):
            for chosen in itertools.combinations(sites, r):
                cost = sum(inst.index.site(s).cost for s in chosen)
                if cost >= best:
                    continue
                if all(contact_opportunity_distance(inst.index, p, chosen) >= lam - 1e-9 for p in inst.movements):
                    best = cost
        d_max = result.extras["max_site_distance"]
        assert d_max == max(coverage_mass(inst.index, inst.movements, s) for s in sites)
        assert result.cost >= best
        assert result.cost <= (1 + math.log(d_max)) * best + 1e-9


def test_engine_gain_matches_objective(t3):
    engine = CoverEngine(t3.index, MetricKind.DISTANCE, 0.6)
    state = engine.add_state()
    for path in t3.movements:
        engine.add_term(path, state)
    a = Element("a", "a", 1.0, (state,))
    b = Element("b", "b", 1.0, (state,))
    assert engine.gain(a) == pytest.approx(1.0)
    engine.add(a)
    assert engine.objective() == pytest.approx(1.0)
    assert engine.gain(b) == pytest.approx(0.1)
    assert engine.unmet() == 2
    run = run_greedy(engine, [b], budget=None)
    assert not run.complete and [el.id for el in run.chosen] == ["b"]


# ─── Budgeted max-min ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("budget,expected", [(0.0, 0.0), (1.0, 0.5), (2.0, 0.5), (3.0, 0.8)])
def test_t3_maxopp(t3, budget, expected):
    result = maxopp_budget(problem_for(t3, budget=budget))
    assert result.min_value == pytest.approx(expected)
    assert result.cost <= budget
    if budget > 0:
        assert 0 <= result.extras["gap"] < 0.0005


def test_maxopp_budget_one_picks_a(t3):
    result = maxopp_budget(problem_for(t3, budget=1.0))
    assert result.sites == ["a"]


def test_maxopp_needs_budget(t3):
    with pytest.raises(NumericError):
        maxopp_budget(problem_for(t3))


def test_t1_budget_sweep_is_monotone(t1):
    budgets = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)
    values = [maxopp_budget(problem_for(t1, budget=b)).min_value for b in budgets]
    assert values == pytest.approx([0.0, 0.0, 1 / 3, 1 / 3, 2 / 3, 1.0])
    assert values == sorted(values)


def test_maxopp_budget_sweep_on_random_instances():
    for seed in range(4):
        inst = grid_instance(seed, sites=10)
        total = sum(site.cost for site in inst.index.sites.values())
        for budget in (1.0, 2.0, 4.0, 6.0, total):
            result = maxopp_budget(problem_for(inst, budget=budget))
            assert result.cost <= budget + 1e-6
            assert 0 <= result.extras["gap"] < DELTA
            assert result.min_value >= result.target - 1e-6
        # the whole pool is affordable, so the search closes on the saturation value
        assert result.target >= result.extras["upper"] - DELTA


# ─── Robust ───────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("planner", [robust_mincost_enum, robust_mincost_meanspeed])
def test_t1_robust_full_target(t1, planner):
    result = planner(problem_for(t1, lam=1.0))
    assert result.sites == ["a1", "a2", "a3"]
    assert result.extras["certificate"]["ok"]


@pytest.mark.parametrize("planner", [robust_mincost_enum, robust_mincost_meanspeed])
def test_t1_robust_half_target(t1, planner):
    result = planner(problem_for(t1, lam=0.5))
    assert result.cost == 2.0
    certificate = result.extras["certificate"]
    assert certificate["ok"] and certificate["value"] >= 0.5 - 1e-9


def test_meanspeed_reports_raised_target(t1):
    result = robust_mincost_meanspeed(problem_for(t1, lam=0.5))
    assert result.extras["method"] == "meanspeed"
    assert 0.5 <= result.extras["lambda0"] <= result.extras["beta"] * 0.5


def test_meanspeed_raised_target_stays_within_beta():
    for seed in range(6):
        inst = grid_instance(seed, sites=10, disjoint=True)
        if not len(inst.movements):
            continue
        model = UncertaintyModel.from_index(inst.index)
        k0 = mean_speed_scenario(model)
        every = inst.index.site_ids()
        best = min(float(average_throughput(inst.index, p, every, k0)) for p in inst.movements)
        lam = 0.9 * best / model.beta
        result = robust_mincost_meanspeed(problem_for(inst, lam=lam))
        assert lam <= result.extras["lambda0"] <= model.beta * lam + 1e-12
        assert result.extras["certificate"]["value"] >= lam - 1e-9


@pytest.mark.slow
def test_robust_certificate_holds_on_random_instances():
    for seed in range(3):
        inst = grid_instance(seed, sites=10)
        model = UncertaintyModel.from_index(inst.index)
        every = inst.index.site_ids()
        _, _, best = worst_case_overall(inst.index, every, inst.movements, model)
        lam = 0.5 * float(best)
        if lam <= 0:
            continue
        result = robust_mincost_meanspeed(problem_for(inst, lam=lam))
        _, _, worst = worst_case_overall(inst.index, result.sites, inst.movements, model)
        assert worst >= lam - 1e-9
        result = robust_mincost_enum(problem_for(inst, lam=lam))
        _, _, worst = worst_case_overall(inst.index, result.sites, inst.movements, model)
        assert result.feasible == (worst >= lam - 1e-9)


def test_enum_cap(t1):
    with pytest.raises(CapExceededError):
        robust_mincost_enum(problem_for(t1, lam=0.5, enum_cap=2))


def test_robust_maxopp_reports_worst(t1):
    result = robust_maxopp(problem_for(t1, budget=2.0))
    assert result.cost <= 2.0
    assert result.extras["worst_value"] <= result.extras["k0_value"] + 1e-12


# ─── Baselines ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("runner", [baseline_random, baseline_maxmin_distance])
def test_baselines_reach_target(t3, runner):
    result = runner(problem_for(t3, lam=0.5), seed=3)
    assert "a" in result.sites
    assert result.feasible
    assert min(result.values.values()) >= 0.5 - 1e-9
    again = runner(problem_for(t3, lam=0.5), seed=3)
    assert again.sites == result.sites


def test_baseline_budget_mode(t3):
    result = baseline_random(problem_for(t3, budget=1.0), seed=0)
    assert len(result.sites) == 1
    assert result.feasible


@pytest.mark.parametrize("runner", [baseline_random, baseline_maxmin_distance])
def test_baseline_budget_skips_sites_that_do_not_fit(runner):
    inst = load_fixture(T3_NETWORK.replace("disk 5", "disk 5 cost 3"), T3_PATHS)
    for seed in range(6):
        result = runner(problem_for(inst, budget=2.0), seed=seed)
        # a never fits; b and c do whichever comes first in the order
        assert result.sites == ["b", "c"]
        assert result.cost == pytest.approx(2.0)
        assert result.extras["over_budget"] is True


def test_greedy_is_cheaper_than_random_sampling():
    for seed in range(4):
        inst = grid_instance(seed, sites=15)
        lam = reachable_target(inst, 0.6)
        greedy = greedy_mincost(problem_for(inst, lam=lam))
        costs = [baseline_random(problem_for(inst, lam=lam), seed=s).cost for s in range(10)]
        assert greedy.cost <= sum(costs) / len(costs)


def test_baseline_robust_stops_at_worst_case(t1):
    result = baseline_random(problem_for(t1, lam=0.5), seed=1, robust=True)
    assert result.extras["worst_value"] >= 0.5 - 1e-9


def test_candidate_pool_ignores_far_sites(t3):
    assert candidate_pool(problem_for(t3, lam=0.5)) == ["a", "b", "c"]
    p1_only = t3.movements.subset(["p1"])
    assert candidate_pool(PlanProblem(index=t3.index, movements=p1_only, lam=0.5)) == ["a", "b"]
