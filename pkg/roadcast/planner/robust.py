"""
roadcast — Robust planners
Throughput targets that must hold in the worst case over the interval
model: explicit enumeration of per-path worst-case scenarios, the
mean-speed scenario with a raised target, and the budgeted variant.
"""
import itertools
import logging
import math
from typing import Dict, List, Tuple

from ..config import ENUM_ROUNDS
from ..errors import CapExceededError, InfeasibleTargetError
from ..geometry import sorted_ids
from ..metrics import MetricKind
from ..paths import sites_touching
from ..scenario import (
    mean_speed_scenario,
    pessimistic_scenario,
    worst_case_for_path,
    worst_case_overall,
)
from .greedy import (
    CoverEngine,
    PlanProblem,
    PlanResult,
    finish,
    greedy_mincost,
    maxopp_budget,
    require_feasible,
    run_greedy,
    site_elements,
)

log = logging.getLogger(__name__)


def _certify(problem: PlanProblem, result: PlanResult, lam: float) -> Tuple[bool, dict]:
    deployed = result.deployment.sites | problem.pre_deployed
    scenario, path_id, value = worst_case_overall(problem.index, deployed, problem.movements,
                                                  problem.model, problem.exact)
    tol = 0 if problem.exact else 1e-9
    ok = value >= lam - tol
    return ok, {"path": path_id, "value": float(value), "scenario": scenario.label, "ok": ok}


def enumerate_worst_speeds(problem: PlanProblem) -> Dict[str, List[Dict[str, float]]]:
    """K' restricted to each path: worst speeds for every subset of A_p."""
    out: Dict[str, List[Dict[str, float]]] = {}
    pool = set(problem.ground_set()) | problem.pre_deployed
    for path in problem.movements:
        touching = sorted_ids(sites_touching(problem.index, path) & pool)
        if len(touching) > problem.enum_cap:
            raise CapExceededError(
                f"path {path.id} touches {len(touching)} sites (cap {problem.enum_cap}); "
                f"use --method meanspeed"
            )
        seen = set()
        cases = []
        for size in range(len(touching) + 1):
            for subset in itertools.combinations(touching, size):
                scenario, _ = worst_case_for_path(problem.index, subset, path, problem.model,
                                                  problem.exact)
                speeds = {e: scenario.speed(e) for e in path.edges}
                key = tuple(speeds[e] for e in path.edges)
                if key not in seen:
                    seen.add(key)
                    cases.append(speeds)
        out[path.id] = cases
    return out


def _enum_engine(problem: PlanProblem, lam, speeds: Dict[str, List[Dict[str, float]]]) -> CoverEngine:
    # every worst case shares h2 and r1, so one load state serves all terms
    engine = CoverEngine(problem.index, MetricKind.THROUGHPUT, lam, problem.exact)
    state = engine.add_state(pessimistic_scenario(problem.model), problem.pre_deployed)
    for path in problem.movements:
        for i, case in enumerate(speeds[path.id]):
            engine.add_term(path, state, speeds=case, label=f"worst#{i + 1}")
    return engine


def robust_mincost_enum(problem: PlanProblem) -> PlanResult:
    """Greedy over all per-path worst cases, re-checked against the true worst case."""
    problem = problem.with_(kind=MetricKind.THROUGHPUT)
    lam, _ = problem.targets()
    speeds = enumerate_worst_speeds(problem)
    total_cases = sum(len(v) for v in speeds.values())
    log.info("enumerated %d worst-case speed assignments over %d paths",
             total_cases, len(problem.movements))

    rounds = 0
    while True:
        engine = _enum_engine(problem, lam, speeds)
        elements = site_elements(problem, engine)
        require_feasible(engine, elements)
        run = run_greedy(engine, elements, problem.budget, problem.lazy)
        result = finish(problem, engine, run, lam)
        ok, certificate = _certify(problem, result, lam)
        if ok or rounds >= ENUM_ROUNDS:
            break
        # load coupling through off-path coverage can hide a worst case
        rounds += 1
        path = problem.movements.path(certificate["path"])
        scenario, _ = worst_case_for_path(problem.index, result.deployment.sites | problem.pre_deployed,
                                          path, problem.model, problem.exact)
        speeds[path.id].append({e: scenario.speed(e) for e in path.edges})
        log.warning("certificate failed on %s (%.6g < %.6g); adding its worst case, round %d",
                    certificate["path"], certificate["value"], lam, rounds)

    result.feasible = run.complete and certificate["ok"]
    result.extras.update({
        "method": "enum",
        "scenarios": total_cases,
        "certificate": certificate,
        "certificate_rounds": rounds,
    })
    return result


def robust_mincost_meanspeed(problem: PlanProblem) -> PlanResult:
    """Raise the target under k0 in steps of tau until the worst case meets lambda."""
    lam, _ = problem.targets()
    beta = problem.model.beta
    k0 = mean_speed_scenario(problem.model)
    steps = max(0, math.ceil((beta - 1) / problem.tau - 1e-12))
    base = problem.with_(kind=MetricKind.THROUGHPUT, scenario=k0, scenarios=())

    for i in range(steps + 1):
        lam0 = min((1 + i * problem.tau) * lam, beta * lam)
        try:
            result = greedy_mincost(base.with_(lam=lam0))
        except InfeasibleTargetError as exc:
            raise InfeasibleTargetError(
                f"raised target {lam0:.6g} under k0 is unreachable with every candidate",
                achievable=exc.achievable,
            ) from exc
        ok, certificate = _certify(problem, result, lam)
        log.debug("meanspeed step %d: lambda0=%.6g worst=%.6g", i, lam0, certificate["value"])
        if ok:
            result.target = lam
            result.extras.update({
                "method": "meanspeed",
                "lambda0": lam0,
                "step": i,
                "beta": beta,
                "certificate": certificate,
            })
            log.info("meanspeed: certified at lambda0=%.6g (beta*lambda=%.6g)", lam0, beta * lam)
            return result
    raise InfeasibleTargetError(
        f"no deployment certified up to lambda0 = beta*lambda = {beta * lam:.6g}",
        achievable=certificate["value"],
    )


def robust_maxopp(problem: PlanProblem) -> PlanResult:
    """Budgeted max-min under k0, reported with its certified worst case."""
    k0 = mean_speed_scenario(problem.model)
    result = maxopp_budget(problem.with_(kind=MetricKind.THROUGHPUT, scenario=k0, scenarios=()))
    _, certificate = _certify(problem, result, 0.0)
    result.extras.update({
        "method": "robust-maxopp",
        "k0_value": result.min_value,
        "worst_value": certificate["value"],
        "certificate": certificate,
    })
    return result
