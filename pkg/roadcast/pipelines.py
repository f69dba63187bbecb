"""
roadcast — Pipelines
One function per subcommand: load inputs, run the module operation, write
the artifacts into the run directory and return the report dict. Reports
carry a `headline` number that sweeps aggregate.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import UnknownIdError
from .formats import (
    DeploymentFile,
    dump_scenario,
    dump_trace,
    load_deployment,
    load_paths,
    load_scenarios,
    load_trace,
    read_network,
    read_text,
    write_text,
)
from .geometry import PartitionIndex, partition_edges, sorted_ids
from .metrics import MetricKind, load_profile, path_metric
from .models import ExperimentSpec, RunConfig
from .paths import MovementSet, Reduction, generate_paths, split_reduction
from .planner import (
    PlanProblem,
    baseline_maxmin_distance,
    baseline_random,
    greedy_mincost,
    maxopp_budget,
    robust_maxopp,
    robust_mincost_enum,
    robust_mincost_meanspeed,
    twostage_evaluate,
    twostage_expected,
    twostage_saa,
    twostage_secondonly,
)
from .report import (
    EVALUATE_HEADER,
    PARTITION_HEADER,
    SWEEP_HEADER,
    plan_summary,
    sim_summary,
    twostage_summary,
    write_csv,
    write_deployment,
    write_trail,
)
from .scenario import (
    Scenario,
    UncertaintyModel,
    mean_scenario,
    sample_scenarios,
    worst_case_for_path,
    worst_case_overall,
)
from .simulator import evaluate_throughput, generate_mobility

log = logging.getLogger(__name__)


# ─── Inputs ───────────────────────────────────────────────────────────────────

@dataclass
class Instance:
    index: PartitionIndex
    movements: Optional[MovementSet]
    model: UncertaintyModel
    reduction: Optional[Reduction] = None

    @property
    def network(self):
        return self.index.network


def load_instance(cfg: RunConfig, with_paths: bool = True) -> Instance:
    parsed = read_network(read_text(cfg.network))
    sites = parsed.sites
    if cfg.inflation is not None:
        sites = [s.with_inflation(cfg.inflation) for s in sites]
    index = partition_edges(parsed.network, sites)
    model = UncertaintyModel.from_index(index)

    movements = reduction = None
    if with_paths:
        if cfg.paths:
            movements = load_paths(read_text(cfg.paths), parsed.network)
        else:
            movements = generate_paths(parsed.network, cfg.min_length, cfg.num_paths, cfg.seed, cfg.fastest)
        if cfg.reduce:
            reduction = split_reduction(movements)
            movements = reduction.movements
    return Instance(index, movements, model, reduction)


def complete_scenario(partial: Scenario, base: Scenario) -> Scenario:
    """Fill whatever the file left out from the base scenario."""
    return Scenario(
        {**base.speeds, **partial.speeds},
        {**base.densities, **partial.densities},
        {**base.rates, **partial.rates},
        partial.label,
    )


def resolve_scenarios(cfg: RunConfig, inst: Instance) -> List[Scenario]:
    base = mean_scenario(inst.model)
    if not cfg.scenario:
        return [base]
    return [complete_scenario(s, base) for s in load_scenarios(read_text(cfg.scenario))]


def resolve_deployment(cfg: RunConfig, index: PartitionIndex) -> DeploymentFile:
    dep = load_deployment(read_text(cfg.deployment))
    for site_id in dep.all_sites:
        if site_id not in index.sites:
            raise UnknownIdError(f"deployment names unknown site {site_id}")
    return dep


def build_problem(cfg: RunConfig, inst: Instance, kind: Optional[str] = None) -> PlanProblem:
    kind = MetricKind(kind or cfg.metric)
    scenario = resolve_scenarios(cfg, inst)[0] if kind is not MetricKind.DISTANCE else None
    return PlanProblem(
        index=inst.index,
        movements=inst.movements,
        kind=kind,
        lam=None if cfg.use_demands else cfg.lam,
        budget=cfg.budget,
        scenario=scenario,
        model=inst.model,
        delta=cfg.delta,
        tau=cfg.tau,
        exact=cfg.exact,
        lazy=cfg.lazy,
    )


def _paths_block(inst: Instance) -> dict:
    out = {"count": len(inst.movements)}
    if inst.reduction is not None:
        out.update({
            "removed": len(inst.reduction.removed),
            "long_removed": inst.reduction.long_removed,
            "skipped": inst.reduction.reason,
        })
    return out


def _plan_artifacts(out: Path, result) -> None:
    write_deployment(out / "deployment.txt", result.sites)
    write_trail(out / "trail.csv", result.trail)


# ─── Pipelines ────────────────────────────────────────────────────────────────

def pipeline_partition(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg, with_paths=False)
    index = inst.index
    rows = []
    uncovered = 0.0
    for edge_id in sorted_ids(index.edge_subsegments):
        for sub_id in index.edge_subsegments[edge_id]:
            sub = index.subsegments[sub_id]
            if not sub.covering_sites:
                uncovered += sub.length
            rows.append((sub.id, edge_id, sub.start, sub.end, sub.length,
                         ";".join(sorted_ids(sub.covering_sites))))
    write_csv(out / "partition.csv", PARTITION_HEADER, rows)
    total = sum(e.length for e in index.network.edges.values())
    return {
        "subcommand": "partition",
        "headline": {"name": "subsegments", "value": len(rows)},
        "network": {"nodes": len(index.network.nodes), "edges": len(index.network.edges),
                    "sites": len(index.sites), "length": total},
        "coverage": {"uncovered_length": uncovered, "covered_fraction": 1 - uncovered / total},
    }


def pipeline_evaluate(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    dep = resolve_deployment(cfg, inst.index)
    sites = dep.all_sites
    scenario = resolve_scenarios(cfg, inst)[0]
    profile = load_profile(inst.index, sites, scenario, cfg.exact)
    rows = []
    for path in inst.movements:
        rows.append((
            path.id,
            path_metric(inst.index, path, sites, MetricKind.DISTANCE, exact=cfg.exact),
            path_metric(inst.index, path, sites, MetricKind.TIME, scenario, exact=cfg.exact),
            path_metric(inst.index, path, sites, MetricKind.THROUGHPUT, scenario,
                        exact=cfg.exact, profile=profile),
        ))
    write_csv(out / "evaluate.csv", EVALUATE_HEADER, rows)
    column = {"d": 1, "t": 2, "gamma": 3}[cfg.metric]
    summary = {
        name: {"min": float(min(r[i] for r in rows)), "mean": float(np.mean([float(r[i]) for r in rows]))}
        for i, name in enumerate(EVALUATE_HEADER[1:], start=1)
    }
    return {
        "subcommand": "evaluate",
        "headline": {"name": f"min {EVALUATE_HEADER[column]}", "value": min(r[column] for r in rows)},
        "deployment": {"sites": sites},
        "scenario": scenario.label,
        "paths": _paths_block(inst),
        "metrics": summary,
    }


def pipeline_plan_mincost(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    result = greedy_mincost(build_problem(cfg, inst))
    _plan_artifacts(out, result)
    return {
        "subcommand": "plan-mincost",
        "headline": {"name": "cost", "value": result.cost},
        "metric": cfg.metric,
        "paths": _paths_block(inst),
        "plan": plan_summary(result),
    }


def pipeline_plan_maxopp(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    problem = build_problem(cfg, inst, "gamma" if cfg.robust else None)
    result = robust_maxopp(problem) if cfg.robust else maxopp_budget(problem)
    _plan_artifacts(out, result)
    value = result.extras["worst_value"] if cfg.robust else result.min_value
    return {
        "subcommand": "plan-maxopp",
        "headline": {"name": "min value", "value": value},
        "metric": "gamma" if cfg.robust else cfg.metric,
        "budget": cfg.budget,
        "paths": _paths_block(inst),
        "plan": plan_summary(result),
    }


def pipeline_plan_robust(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    problem = build_problem(cfg, inst, "gamma")
    planner = robust_mincost_enum if cfg.method == "enum" else robust_mincost_meanspeed
    result = planner(problem)
    _plan_artifacts(out, result)
    return {
        "subcommand": "plan-robust",
        "headline": {"name": "cost", "value": result.cost},
        "method": cfg.method,
        "beta": inst.model.beta,
        "paths": _paths_block(inst),
        "plan": plan_summary(result),
    }


def held_out_seed(seed: int) -> int:
    """Seed of the held-out scenario stream, independent of the learning stream."""
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def pipeline_plan_twostage(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    metric = "t" if cfg.metric == "t" else "gamma"
    problem = build_problem(cfg, inst, metric)
    tests = sample_scenarios(inst.model, cfg.test_samples, held_out_seed(cfg.seed), prefix="test")

    learned = None
    if cfg.method == "saa":
        learned = twostage_saa(problem, cfg.samples, cfg.seed, prune=cfg.prune)
        result = twostage_evaluate(problem, learned.first_stage, tests, method="saa")
        result.evaluations += learned.evaluations
    elif cfg.method == "exp":
        result = twostage_expected(problem, tests)
    else:
        result = twostage_secondonly(problem, tests)

    write_deployment(out / "deployment.txt", first_stage=result.first_stage,
                     second_stage=result.second_stage)
    write_csv(out / "second_stage.csv", ("scenario", "cost", "sites"), (
        (label, result.second_costs[label], ";".join(sorted_ids(sites)))
        for label, sites in result.second_stage.items()
    ))
    report = {
        "subcommand": "plan-twostage",
        "headline": {"name": "total cost", "value": result.total},
        "method": cfg.method,
        "metric": metric,
        "inflation": cfg.inflation or 1.0,
        "paths": _paths_block(inst),
        "test": twostage_summary(result),
    }
    if learned is not None:
        report["learning"] = twostage_summary(learned)
    return report


def pipeline_worst_case(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    sites = resolve_deployment(cfg, inst.index).all_sites
    scenario, path_id, value = worst_case_overall(inst.index, sites, inst.movements, inst.model, cfg.exact)
    rows = []
    for path in inst.movements:
        _, v = worst_case_for_path(inst.index, sites, path, inst.model, cfg.exact)
        rows.append((path.id, v))
    write_csv(out / "worst_case.csv", ("path_id", "gamma_worst"), rows)
    write_text(out / "scenario.txt", dump_scenario(scenario, header=True))
    return {
        "subcommand": "worst-case",
        "headline": {"name": "worst value", "value": value},
        "path": path_id,
        "deployment": {"sites": sites},
        "paths": _paths_block(inst),
    }


def pipeline_baseline(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg)
    problem = build_problem(cfg, inst, "gamma" if cfg.robust else None)
    runner = baseline_random if cfg.method == "rand" else baseline_maxmin_distance
    result = runner(problem, cfg.seed, robust=cfg.robust)
    _plan_artifacts(out, result)
    budget_mode = cfg.budget is not None and cfg.lam is None
    headline = ({"name": "min value", "value": result.min_value} if budget_mode
                else {"name": "cost", "value": result.cost})
    return {
        "subcommand": "baseline",
        "headline": headline,
        "method": cfg.method,
        "paths": _paths_block(inst),
        "plan": plan_summary(result),
    }


def pipeline_simulate(cfg: RunConfig, out: Path) -> dict:
    inst = load_instance(cfg, with_paths=False)
    sites = resolve_deployment(cfg, inst.index).all_sites
    if cfg.trace:
        trace = load_trace(read_text(cfg.trace))
    else:
        min_leg = cfg.min_leg if cfg.min_leg is not None else cfg.min_length
        trace = generate_mobility(inst.network, cfg.users, cfg.duration, min_leg, cfg.seed)
        write_text(out / "trace.txt", dump_trace(trace))
    rates = resolve_scenarios(cfg, inst)[0].rates
    sim = evaluate_throughput(trace, inst.index, sites, rates, cfg.policy, cfg.timestep, cfg.seed)
    write_csv(out / "simulate.csv", ("leg", "throughput"), sim.leg_means.items())
    write_csv(out / "ccdf.csv", ("throughput", "ccdf"), sim.ccdf)
    write_csv(out / "density.csv", ("edge", "density"), sim.densities.items())
    return {
        "subcommand": "simulate",
        "headline": {"name": "mean throughput", "value": sim.mean},
        "policy": cfg.policy,
        "deployment": {"sites": sites},
        "simulation": sim_summary(sim),
    }


PIPELINES: Dict[str, Callable[[RunConfig, Path], dict]] = {
    "partition": pipeline_partition,
    "evaluate": pipeline_evaluate,
    "plan-mincost": pipeline_plan_mincost,
    "plan-maxopp": pipeline_plan_maxopp,
    "plan-robust": pipeline_plan_robust,
    "plan-twostage": pipeline_plan_twostage,
    "worst-case": pipeline_worst_case,
    "baseline": pipeline_baseline,
    "simulate": pipeline_simulate,
}


def run_pipeline(cfg: RunConfig, out: Path) -> dict:
    return PIPELINES[cfg.subcommand](cfg, Path(out))


# ─── Sweeps ───────────────────────────────────────────────────────────────────

def run_sweep(spec: ExperimentSpec, out: Path) -> dict:
    """Every (value, seed) point in its own directory; rows in value order."""
    from .runs import execute

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    points = [(i, value, seed) for i, value in enumerate(spec.values) for seed in spec.seeds]

    def one(point):
        i, value, seed = point
        try:
            cfg = spec.point(value, seed)
        except ValueError as exc:
            return point, None, f"invalid point: {exc}"
        record = execute(cfg, run_dir=out / f"p{i:03d}-s{seed}")
        if not record.ok:
            return point, None, record.error
        return point, float(record.report["headline"]["value"]), None

    with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
        results = list(pool.map(one, points))

    rows = []
    failures = []
    for i, value in enumerate(spec.values):
        got = [v for (j, _, _), v, err in results if j == i and err is None]
        for (j, _, seed), _, err in results:
            if j == i and err is not None:
                failures.append({"x": value, "seed": seed, "error": err})
        mean = float(np.mean(got)) if got else float("nan")
        std = float(np.std(got)) if got else float("nan")
        rows.append((value, mean, std, len(got)))
    write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    if failures:
        log.warning("sweep: %d of %d points failed", len(failures), len(points))
    return {
        "subcommand": "sweep",
        "status": "success" if not failures else "partial",
        "flag": spec.flag,
        "points": len(points),
        "rows": [dict(zip(SWEEP_HEADER, r)) for r in rows],
        "failures": failures,
    }
