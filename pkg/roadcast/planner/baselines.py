"""
roadcast — Baselines
Uniform random sampling and max-min graph-distance sampling over the sites
that touch at least one path. Both stop at the target or (robust mode) once
the worst case over the interval model meets lambda; sites that would
exceed the budget are skipped.
"""
import logging
from typing import Dict, List

import networkx as nx
import numpy as np

from ..errors import InfeasibleTargetError, NumericError
from ..geometry import natural_key
from ..metrics import Deployment
from ..paths import sites_touching
from ..scenario import worst_case_overall
from .greedy import GreedyRun, PlanProblem, PlanResult, Step, build_engine, finish, site_elements

log = logging.getLogger(__name__)


def candidate_pool(problem: PlanProblem) -> List[str]:
    """A-hat: candidates whose region touches some path."""
    touching = set()
    for path in problem.movements:
        touching |= sites_touching(problem.index, path)
    return [s for s in problem.ground_set() if s in touching]


def random_order(problem: PlanProblem, seed: int) -> List[str]:
    pool = candidate_pool(problem)
    rng = np.random.default_rng(seed)
    return [pool[int(i)] for i in rng.permutation(len(pool))]


def maxmin_distance_order(problem: PlanProblem, seed: int) -> List[str]:
    """Seeded start, then repeatedly the site farthest (graph distance) from those picked."""
    pool = candidate_pool(problem)
    if not pool:
        return []
    network = problem.index.network
    snapped = {s: network.nearest_node(problem.index.site(s).position) for s in pool}
    rng = np.random.default_rng(seed)
    order = [pool[int(rng.integers(len(pool)))]]
    nearest: Dict[str, float] = {}
    while len(order) < len(pool):
        dist = nx.single_source_dijkstra_path_length(network.graph, snapped[order[-1]], weight="length")
        for s in pool:
            d = dist.get(snapped[s], float("inf"))
            nearest[s] = min(nearest.get(s, d), d)
        rest = [s for s in pool if s not in order]
        order.append(min(rest, key=lambda s: (-nearest[s], natural_key(s))))
    return order


ORDERS = {"rand": random_order, "dist": maxmin_distance_order}


def run_baseline(problem: PlanProblem, method: str, seed: int, robust: bool = False) -> PlanResult:
    """Add sites in the baseline's order until the stopping rule fires."""
    if method not in ORDERS:
        raise NumericError(f"unknown baseline {method}")
    order = ORDERS[method](problem, seed)
    lam, factors = problem.targets()
    engine = build_engine(problem, lam, factors)
    by_site = {el.site: el for el in site_elements(problem, engine)}
    run = GreedyRun([], [], False)
    cost = 0.0
    worst = None

    budget_mode = problem.budget is not None and problem.lam is None

    def certify():
        deployed = {el.site for el in run.chosen} | problem.pre_deployed
        return worst_case_overall(problem.index, deployed, problem.movements,
                                  problem.model, problem.exact)

    def done() -> bool:
        nonlocal worst
        if budget_mode:
            return False
        if robust:
            worst = certify()
            return worst[2] >= lam - engine.tol
        return engine.unmet() == 0

    run.complete = done()
    for site_id in order:
        if run.complete:
            break
        el = by_site[site_id]
        if problem.budget is not None and cost + float(el.cost) > problem.budget + 1e-12:
            run.over_budget = True
            continue
        before = engine.objective()
        engine.add(el)
        cost += float(el.cost)
        run.chosen.append(el)
        gain = float(engine.objective() - before)
        run.trail.append(Step(el.id, gain, gain / float(el.cost) if el.cost else 0.0,
                              cost, float(engine.objective())))
        run.complete = done()

    if robust and worst is None:
        worst = certify()
    if not run.complete and not budget_mode and not run.over_budget:
        path_id, value = engine.weakest()
        if robust and worst is not None:
            path_id, value = worst[1], worst[2]
        raise InfeasibleTargetError(
            f"{method} baseline exhausted {len(order)} sites below target (path {path_id})",
            achievable=float(value),
        )
    deployment = Deployment.of(problem.index, (el.site for el in run.chosen), problem.stage)
    result = finish(problem, engine, run, lam, deployment)
    result.feasible = run.complete or budget_mode
    result.extras.update({"method": method, "seed": seed, "pool": len(order), "robust": robust})
    if robust and worst is not None:
        result.extras["worst_value"] = float(worst[2])
    log.info("%s baseline: %d sites, cost %.6g", method, len(result.sites), result.cost)
    return result


def baseline_random(problem: PlanProblem, seed: int, robust: bool = False) -> PlanResult:
    return run_baseline(problem, "rand", seed, robust)


def baseline_maxmin_distance(problem: PlanProblem, seed: int, robust: bool = False) -> PlanResult:
    return run_baseline(problem, "dist", seed, robust)
