"""
roadcast — Greedy covering
Cost-effective greedy over a truncated sum of path metrics, with lazy
re-evaluation, an optional pre-deployed set, budget abort, and the binary
search on the target that turns it into a budgeted max-min planner.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from ..config import DELTA, ENUM_CAP, OBJ_TOL, TAU
from ..errors import InfeasibleTargetError, NumericError, ParseError
from ..geometry import PartitionIndex, natural_key, sorted_ids
from ..metrics import (
    Deployment,
    EdgeValueState,
    MetricKind,
    Number,
    edge_weights,
    number_type,
    path_metric,
    weighted_value,
)
from ..paths import MovementPath, MovementSet, normalize_demands, path_subsegments
from ..scenario import Scenario, UncertaintyModel

log = logging.getLogger(__name__)

STAGE_COST = {"single": "cost", "first": "first_stage_cost", "second": "second_stage_cost"}


# ─── Problem / Result ─────────────────────────────────────────────────────────

@dataclass
class PlanProblem:
    index: PartitionIndex
    movements: MovementSet
    kind: MetricKind = MetricKind.DISTANCE
    lam: Optional[float] = None
    budget: Optional[float] = None
    scenario: Optional[Scenario] = None
    scenarios: Sequence[Scenario] = ()
    model: Optional[UncertaintyModel] = None
    delta: float = DELTA
    tau: float = TAU
    pre_deployed: FrozenSet[str] = frozenset()
    candidates: Optional[FrozenSet[str]] = None
    stage: str = "single"
    normalize: bool = True
    exact: bool = False
    lazy: bool = True
    enum_cap: int = ENUM_CAP

    def __post_init__(self):
        self.kind = MetricKind(self.kind)
        if self.lam is not None and self.lam < 0:
            raise NumericError(f"target {self.lam} must be nonnegative")
        if self.budget is not None and self.budget < 0:
            raise NumericError(f"budget {self.budget} must be nonnegative")
        if not (self.delta > 0 and self.tau > 0):
            raise NumericError("delta and tau must be positive")
        if self.stage not in STAGE_COST:
            raise NumericError(f"unknown cost stage {self.stage}")
        if not len(self.movements):
            raise ParseError("movement set is empty")
        self.pre_deployed = frozenset(self.pre_deployed)
        for site_id in self.pre_deployed:
            self.index.site(site_id)
        if self.candidates is not None:
            self.candidates = frozenset(self.candidates)
            for site_id in self.candidates:
                self.index.site(site_id)
        if self.model is None:
            self.model = UncertaintyModel.from_index(self.index)

    def with_(self, **changes) -> "PlanProblem":
        return replace(self, **changes)

    def targets(self) -> Tuple[float, Dict[str, float]]:
        """Target lambda and per-path metric factors.

        An explicit lam applies to every path unchanged; otherwise the
        per-path demands are normalized to their minimum.
        """
        if self.lam is not None:
            return self.lam, {p.id: 1.0 for p in self.movements}
        if not self.normalize:
            return min(self.movements.demands.values()), {p.id: 1.0 for p in self.movements}
        return normalize_demands(self.movements)

    def ground_set(self) -> List[str]:
        pool = self.index.sites if self.candidates is None else self.candidates
        return sorted_ids(s for s in pool if s not in self.pre_deployed)

    def site_cost(self, site_id: str) -> float:
        return getattr(self.index.site(site_id), STAGE_COST[self.stage])

    def objective_scenarios(self) -> List[Optional[Scenario]]:
        if self.kind is MetricKind.DISTANCE:
            return [None]
        cases = list(self.scenarios) or ([self.scenario] if self.scenario is not None else [])
        if not cases:
            raise NumericError(f"metric {self.kind.value} needs a scenario")
        return cases


@dataclass
class Step:
    element: str
    gain: float
    ratio: float
    cost: float          # cumulative after this step
    objective: float


@dataclass
class PlanResult:
    deployment: Deployment
    values: Dict[str, float]
    feasible: bool
    target: Optional[float] = None
    trail: List[Step] = field(default_factory=list)
    evaluations: int = 0
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.deployment.cost

    @property
    def sites(self) -> List[str]:
        return self.deployment.sorted()

    @property
    def min_value(self) -> float:
        return min(self.values.values(), default=0.0)


# ─── Covering engine ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Element:
    """One selectable unit: a site added to one or more scenario states."""
    id: str
    site: str
    cost: Number
    states: Tuple[int, ...]
    stage: int = 0

    def key(self) -> Tuple:
        return natural_key(self.site), self.stage


@dataclass(frozen=True)
class Term:
    path_id: str
    edges: Tuple[str, ...]
    weights: Tuple[Number, ...]
    state: int
    factor: Number
    label: str = ""


class CoverEngine:
    """Truncated objective sum_terms min(m_term(S), lambda) with incremental updates.

    Terms reference a state (the per-edge values under one scenario) and
    carry their own edge weights, so scenarios that share densities and
    rates can share one state.
    """

    def __init__(self, index: PartitionIndex, kind: MetricKind, lam, exact: bool = False):
        self.index = index
        self.kind = MetricKind(kind)
        self.exact = exact
        self.num = number_type(exact)
        self.lam = self.num(lam)
        self.tol = self.num(0) if exact else OBJ_TOL
        self.states: List[EdgeValueState] = []
        self.terms: List[Term] = []
        self.values: List[Number] = []
        self.evaluations = 0
        self._scenarios: List[Optional[Scenario]] = []
        self._initial: List[Tuple[str, ...]] = []
        self._edge_terms: List[Dict[str, List[int]]] = []

    def add_state(self, scenario: Optional[Scenario] = None, sites: Iterable[str] = ()) -> int:
        sites = tuple(sorted_ids(sites))
        self.states.append(EdgeValueState(self.index, self.kind, scenario, self.exact, sites))
        self._scenarios.append(scenario)
        self._initial.append(sites)
        self._edge_terms.append({})
        return len(self.states) - 1

    def add_term(self, path: MovementPath, state: int, scenario: Optional[Scenario] = None,
                 speeds: Optional[Dict[str, float]] = None, factor: float = 1.0,
                 label: str = "") -> int:
        weights = edge_weights(self.index, path, self.kind, scenario, speeds, self.exact)
        return self._attach(Term(path.id, path.edges, weights, state, self.num(factor), label))

    def _attach(self, term: Term) -> int:
        ti = len(self.terms)
        self.terms.append(term)
        for edge_id in set(term.edges):
            self._edge_terms[term.state].setdefault(edge_id, []).append(ti)
        self.values.append(self._value(ti))
        return ti

    def fresh(self) -> "CoverEngine":
        """Same states and terms, reset to the initial sites."""
        other = CoverEngine(self.index, self.kind, self.lam, self.exact)
        for scenario, sites in zip(self._scenarios, self._initial):
            other.add_state(scenario, sites)
        for term in self.terms:
            other._attach(term)
        return other

    def _value(self, ti: int, changed: Optional[Dict[str, Number]] = None) -> Number:
        t = self.terms[ti]
        return t.factor * weighted_value(self.states[t.state], t.edges, t.weights, changed)

    def _affected(self, state: int, changed: Dict[str, Number]) -> List[int]:
        hit = set()
        table = self._edge_terms[state]
        for edge_id in changed:
            hit.update(table.get(edge_id, ()))
        return sorted(hit)

    def objective(self) -> Number:
        return sum((min(v, self.lam) for v in self.values), self.num(0))

    def unmet(self) -> int:
        floor = self.lam - self.tol
        return sum(1 for v in self.values if v < floor)

    def gain(self, element: Element) -> Number:
        self.evaluations += 1
        total = self.num(0)
        for s in element.states:
            changed = self.states[s].delta(element.site)
            for ti in self._affected(s, changed):
                total += min(self._value(ti, changed), self.lam) - min(self.values[ti], self.lam)
        return total

    def add(self, element: Element) -> None:
        for s in element.states:
            changed = self.states[s].add(element.site)
            for ti in self._affected(s, changed):
                self.values[ti] = self._value(ti)

    def path_values(self) -> Dict[str, float]:
        """Per path, the smallest untruncated value over its terms."""
        out: Dict[str, float] = {}
        for term, v in zip(self.terms, self.values):
            v = float(v)
            out[term.path_id] = min(out.get(term.path_id, v), v)
        return {k: out[k] for k in sorted_ids(out)}

    def weakest(self) -> Tuple[str, Number]:
        ti = min(range(len(self.values)), key=lambda i: (self.values[i], i))
        return self.terms[ti].path_id, self.values[ti]


@dataclass
class GreedyRun:
    chosen: List[Element]
    trail: List[Step]
    complete: bool
    over_budget: bool = False
    max_single_gain: float = 0.0


def _ratio(gain: Number, cost: Number):
    if cost > 0:
        return gain / cost
    return math.inf if gain > 0 else 0


def run_greedy(engine: CoverEngine, elements: Sequence[Element],
               budget: Optional[float] = None, lazy: bool = True) -> GreedyRun:
    """Add the most cost-effective element until every term reaches lambda.

    Ties go to the lowest element key. Elements with no positive gain are
    never added; with a budget the run stops before the first element that
    would exceed it.
    """
    run = GreedyRun([], [], engine.unmet() == 0)
    if run.complete:
        return run
    keys = [el.key() for el in elements]
    remaining = set(range(len(elements)))
    cost = engine.num(0)
    tol = engine.tol

    heap: List[Tuple] = []
    gains: Dict[int, Number] = {}
    if lazy:
        for i, el in enumerate(elements):
            gains[i] = engine.gain(el)
            heap.append((-_ratio(gains[i], el.cost), keys[i], i, 0))
        heapq.heapify(heap)
        run.max_single_gain = float(max(gains.values(), default=0))

    while engine.unmet():
        it = len(run.chosen)
        pick = None
        if lazy:
            while heap:
                neg, key, i, stamp = heapq.heappop(heap)
                if stamp == it:
                    if gains[i] > 0:
                        pick = i
                    break
                gains[i] = engine.gain(elements[i])
                heapq.heappush(heap, (-_ratio(gains[i], elements[i].cost), key, i, it))
        else:
            best = None
            for i in sorted(remaining, key=lambda j: keys[j]):
                g = engine.gain(elements[i])
                gains[i] = g
                r = _ratio(g, elements[i].cost)
                if g > 0 and (best is None or r > best):
                    best, pick = r, i
            if it == 0:
                run.max_single_gain = float(max(gains.values(), default=0))

        if pick is None:
            log.debug("greedy stalled after %d picks: no positive gain left", it)
            return run
        el = elements[pick]
        if budget is not None and cost + el.cost > budget + tol:
            log.debug("greedy aborted at %s: cost %.6g would exceed budget %.6g",
                      el.id, float(cost + el.cost), budget)
            run.over_budget = True
            return run
        engine.add(el)
        remaining.discard(pick)
        cost += el.cost
        step = Step(el.id, float(gains[pick]), float(_ratio(gains[pick], el.cost)),
                    float(cost), float(engine.objective()))
        run.trail.append(step)
        run.chosen.append(el)
        log.debug("pick %s gain=%.6g ratio=%.6g cost=%.6g", step.element, step.gain, step.ratio, step.cost)
    run.complete = True
    return run


# ─── Builders ─────────────────────────────────────────────────────────────────

def build_engine(problem: PlanProblem, lam, factors: Dict[str, float]) -> CoverEngine:
    """One term per (path, scenario); throughput needs one state per scenario."""
    engine = CoverEngine(problem.index, problem.kind, lam, problem.exact)
    cases = problem.objective_scenarios()
    shared = None
    for scenario in cases:
        if problem.kind is MetricKind.THROUGHPUT:
            state = engine.add_state(scenario, problem.pre_deployed)
        else:
            if shared is None:
                shared = engine.add_state(None, problem.pre_deployed)
            state = shared
        for path in problem.movements:
            engine.add_term(path, state, scenario, factor=factors[path.id],
                            label=scenario.label if scenario is not None else "")
    return engine


def site_elements(problem: PlanProblem, engine: CoverEngine) -> List[Element]:
    every = tuple(range(len(engine.states)))
    return [
        Element(site_id, site_id, engine.num(problem.site_cost(site_id)), every)
        for site_id in problem.ground_set()
    ]


def saturate(engine: CoverEngine, elements: Sequence[Element]) -> CoverEngine:
    """A fresh copy of engine with every element added."""
    full = engine.fresh()
    for el in elements:
        full.add(el)
    return full


def require_feasible(engine: CoverEngine, elements: Sequence[Element]) -> CoverEngine:
    full = saturate(engine, elements)
    if full.unmet():
        path_id, value = full.weakest()
        raise InfeasibleTargetError(
            f"target {float(engine.lam):.6g} unreachable with all {len(elements)} candidates "
            f"(path {path_id})",
            achievable=float(value),
        )
    return full


def coverage_mass(index: PartitionIndex, movements: MovementSet, site_id: str) -> float:
    """D_a: distance a single site covers summed over all paths."""
    total = 0.0
    for path in movements:
        for sub_id in path_subsegments(index, path):
            sub = index.subsegments[sub_id]
            if site_id in sub.covering_sites:
                total += sub.length
    return total


def single_site_mass(problem: PlanProblem, site_id: str) -> float:
    """D_a for distance; otherwise the metric mass of {a} summed over paths and scenarios (R_a)."""
    if problem.kind is MetricKind.DISTANCE:
        return coverage_mass(problem.index, problem.movements, site_id)
    total = 0.0
    for scenario in problem.objective_scenarios():
        for path in problem.movements:
            weight = sum(edge_weights(problem.index, path, problem.kind, scenario))
            total += float(path_metric(problem.index, path, {site_id}, problem.kind, scenario)) * weight
    return total


def finish(problem: PlanProblem, engine: CoverEngine, run: GreedyRun, lam,
           deployment: Optional[Deployment] = None) -> PlanResult:
    if deployment is None:
        deployment = Deployment.of(problem.index, (el.site for el in run.chosen), problem.stage)
    extras: Dict[str, Any] = {
        "lazy": problem.lazy,
        "max_single_gain": run.max_single_gain,
        "objective": float(engine.objective()),
    }
    if problem.pre_deployed:
        extras["pre_deployed"] = sorted_ids(problem.pre_deployed)
    if run.over_budget:
        extras["over_budget"] = True
    return PlanResult(
        deployment=deployment,
        values=engine.path_values(),
        feasible=run.complete,
        target=float(lam),
        trail=run.trail,
        evaluations=engine.evaluations,
        extras=extras,
    )


# ─── Planners ─────────────────────────────────────────────────────────────────

def greedy_mincost(problem: PlanProblem) -> PlanResult:
    """Cheapest deployment found by greedy with every path at or above lambda."""
    lam, factors = problem.targets()
    engine = build_engine(problem, lam, factors)
    elements = site_elements(problem, engine)
    require_feasible(engine, elements)
    run = run_greedy(engine, elements, problem.budget, problem.lazy)
    if not run.complete and not run.over_budget:
        path_id, value = engine.weakest()
        raise InfeasibleTargetError(f"greedy stalled below target on path {path_id}",
                                    achievable=float(value))
    result = finish(problem, engine, run, lam)
    ground = problem.ground_set()
    result.extras["max_site_distance"] = max(
        (coverage_mass(problem.index, problem.movements, s) for s in ground), default=0.0)
    result.extras["max_site_mass"] = max((single_site_mass(problem, s) for s in ground), default=0.0)
    log.info("mincost: %d sites, cost %.6g, %d evaluations",
             len(result.sites), result.cost, result.evaluations)
    return result


def maxopp_budget(problem: PlanProblem) -> PlanResult:
    """Binary search on lambda; each step runs a budget-aborted greedy."""
    if problem.budget is None:
        raise NumericError("budgeted planning needs a budget")
    _, factors = problem.targets()
    base = build_engine(problem, 0, factors)
    elements = site_elements(problem, base)
    upper = float(min(saturate(base, elements).values))
    lower = 0.0

    best = finish(problem, base, GreedyRun([], [], True), lower)
    steps = 0
    if problem.budget > 0 and elements:
        while upper - lower >= problem.delta:
            mid = (upper + lower) / 2
            engine = build_engine(problem, mid, factors)
            run = run_greedy(engine, elements, problem.budget, problem.lazy)
            steps += 1
            if run.complete:
                lower = mid
                best = finish(problem, engine, run, mid)
            else:
                upper = mid
            log.debug("maxopp lambda %.6g -> %s", mid, "ok" if run.complete else "over")
    best.target = lower
    best.feasible = True
    best.extras.update({"lower": lower, "upper": upper, "gap": upper - lower, "steps": steps})
    log.info("maxopp: budget %.6g -> value %.6g with %d sites",
             problem.budget, best.min_value, len(best.sites))
    return best
