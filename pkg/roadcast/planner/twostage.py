"""
roadcast — Two-stage planners
First-stage sites bought at w1 before the scenario is known, augmented per
scenario at w2. SAA runs the greedy over N+1 copies of every site; the Exp
and Sec heuristics fix the first stage and augment on held-out scenarios.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np

from ..geometry import sorted_ids
from ..metrics import MetricKind, Number
from ..scenario import Scenario, mean_scenario, sample_scenarios
from .greedy import (
    CoverEngine,
    Element,
    PlanProblem,
    Step,
    greedy_mincost,
    require_feasible,
    run_greedy,
)

log = logging.getLogger(__name__)


@dataclass
class TwoStageResult:
    method: str
    first_stage: FrozenSet[str]
    second_stage: Dict[str, FrozenSet[str]]      # scenario label -> S_k
    first_cost: Number
    second_costs: Dict[str, Number]
    copy_cost: Optional[Number] = None
    trail: List[Step] = field(default_factory=list)
    evaluations: int = 0
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def expected_second_cost(self) -> Number:
        if not self.second_costs:
            return 0
        return sum(self.second_costs.values()) / len(self.second_costs)

    @property
    def total(self) -> Number:
        return self.first_cost + self.expected_second_cost

    @property
    def second_cost_std(self) -> float:
        if not self.second_costs:
            return 0.0
        return float(np.std([float(c) for c in self.second_costs.values()]))


def _stage_problem(problem: PlanProblem) -> PlanProblem:
    kind = MetricKind.TIME if problem.kind is MetricKind.TIME else MetricKind.THROUGHPUT
    return problem.with_(kind=kind)


def _meets(problem: PlanProblem, scenario: Scenario, sites: Iterable[str], lam, factors) -> bool:
    engine = CoverEngine(problem.index, problem.kind, lam, problem.exact)
    state = engine.add_state(scenario, set(sites) | problem.pre_deployed)
    for path in problem.movements:
        engine.add_term(path, state, scenario, factor=factors[path.id])
    return engine.unmet() == 0


def twostage_saa(problem: PlanProblem, n: int, seed: int, prune: bool = True,
                 samples: Optional[Sequence[Scenario]] = None) -> TwoStageResult:
    """Greedy over copies a@0 (cost w1, all scenarios) and a@k (cost w2/N, scenario k)."""
    problem = _stage_problem(problem)
    samples = list(samples) if samples is not None else sample_scenarios(problem.model, n, seed)
    n = len(samples)
    lam, factors = problem.targets()

    engine = CoverEngine(problem.index, problem.kind, lam, problem.exact)
    for scenario in samples:
        state = engine.add_state(scenario, problem.pre_deployed)
        for path in problem.movements:
            engine.add_term(path, state, scenario, factor=factors[path.id], label=scenario.label)

    num = engine.num
    every = tuple(range(n))
    elements: List[Element] = []
    for site_id in problem.ground_set():
        site = problem.index.site(site_id)
        elements.append(Element(f"{site_id}@0", site_id, num(site.first_stage_cost), every, 0))
        for k in range(n):
            elements.append(Element(f"{site_id}@{k + 1}", site_id,
                                    num(site.second_stage_cost) / n, (k,), k + 1))

    require_feasible(engine, elements)
    run = run_greedy(engine, elements, None, problem.lazy)
    first = frozenset(el.site for el in run.chosen if el.stage == 0)
    second = {
        samples[k].label: set(el.site for el in run.chosen if el.stage == k + 1)
        for k in range(n)
    }
    copy_cost = sum((el.cost for el in run.chosen), num(0))

    # a@k bought before a@0 is redundant once a is in S0
    overlap: Dict[str, List[str]] = {}
    for label, sites in second.items():
        if sites & first:
            overlap[label] = sorted_ids(sites & first)
            sites -= first

    pruned: Dict[str, List[str]] = {}
    if prune:
        for scenario in samples:
            sites = second[scenario.label]
            dropped: List[str] = []
            order = sorted(sorted_ids(sites), key=lambda a: -problem.index.site(a).second_stage_cost)
            for site_id in order:
                if _meets(problem, scenario, first | (sites - {site_id}), lam, factors):
                    sites.discard(site_id)
                    dropped.append(site_id)
            if dropped:
                pruned[scenario.label] = dropped
        if pruned:
            log.info("pruning removed %d second-stage copies",
                     sum(len(v) for v in pruned.values()))

    first_cost = sum((num(problem.index.site(a).first_stage_cost) for a in sorted_ids(first)), num(0))
    second_costs = {
        label: sum((num(problem.index.site(a).second_stage_cost) for a in sorted_ids(sites)), num(0))
        for label, sites in second.items()
    }
    result = TwoStageResult(
        method="saa",
        first_stage=first,
        second_stage={label: frozenset(s) for label, s in second.items()},
        first_cost=first_cost,
        second_costs=second_costs,
        copy_cost=copy_cost,
        trail=run.trail,
        evaluations=engine.evaluations,
        extras={"samples": n, "seed": seed, "overlap": overlap, "pruned": pruned, "prune": prune},
    )
    log.info("saa: |S0|=%d w1=%.6g expected w2=%.6g over %d samples",
             len(first), float(first_cost), float(result.expected_second_cost), n)
    return result


def twostage_evaluate(problem: PlanProblem, first_stage: Iterable[str],
                      tests: Sequence[Scenario], method: str = "eval") -> TwoStageResult:
    """Augment a fixed first stage on each test scenario at second-stage costs."""
    problem = _stage_problem(problem)
    lam, _ = problem.targets()
    first = frozenset(first_stage)
    second: Dict[str, FrozenSet[str]] = {}
    costs: Dict[str, Number] = {}
    evaluations = 0
    for scenario in tests:
        res = greedy_mincost(problem.with_(
            lam=lam, scenario=scenario, scenarios=(), stage="second",
            pre_deployed=problem.pre_deployed | first,
        ))
        second[scenario.label] = res.deployment.sites
        costs[scenario.label] = res.cost
        evaluations += res.evaluations
    first_cost = sum(problem.index.site(a).first_stage_cost for a in sorted_ids(first))
    return TwoStageResult(
        method=method,
        first_stage=first,
        second_stage=second,
        first_cost=first_cost,
        second_costs=costs,
        evaluations=evaluations,
        extras={"tests": len(tests)},
    )


def twostage_expected(problem: PlanProblem, tests: Sequence[Scenario]) -> TwoStageResult:
    """Exp: first stage solved on the mean scenario, then augmented per test scenario."""
    problem = _stage_problem(problem)
    k_mean = mean_scenario(problem.model)
    base = greedy_mincost(problem.with_(scenario=k_mean, scenarios=(), stage="first"))
    result = twostage_evaluate(problem, base.deployment.sites, tests, method="exp")
    result.evaluations += base.evaluations
    return result


def twostage_secondonly(problem: PlanProblem, tests: Sequence[Scenario]) -> TwoStageResult:
    """Sec: nothing in the first stage; every test scenario solved from scratch."""
    return twostage_evaluate(problem, (), tests, method="sec")
