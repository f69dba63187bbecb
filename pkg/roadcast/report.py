"""
roadcast — Reports
Summaries of planner and simulator results as JSON-ready dicts, the CSV
writers behind every plot-ready table, and the boxed text report.
"""
import csv
import dataclasses
import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence

import numpy as np

from .formats import dump_deployment, write_text
from .geometry import sorted_ids
from .planner import PlanResult, TwoStageResult
from .simulator import SimReport

EVALUATE_HEADER = ("path_id", "eta_d", "eta_t", "gamma")
SWEEP_HEADER = ("x", "mean", "std", "n")
TRAIL_HEADER = ("step", "element", "gain", "ratio", "cost", "objective")
PARTITION_HEADER = ("subsegment", "edge", "start", "end", "length", "sites")


def jsonable(obj: Any) -> Any:
    """Plain JSON types; Fractions and numpy scalars become floats, sets sorted lists."""
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, Fraction, np.floating)):
        return float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [jsonable(x) for x in sorted_ids(str(v) for v in obj)]
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    return str(obj)


# ─── Summaries ────────────────────────────────────────────────────────────────

def plan_summary(result: PlanResult) -> dict:
    out = {
        "sites": result.sites,
        "cost": float(result.cost),
        "feasible": result.feasible,
        "target": result.target,
        "min_value": float(result.min_value),
        "values": result.values,
        "iterations": len(result.trail),
        "evaluations": result.evaluations,
        "extras": jsonable(result.extras),
    }
    mass = result.extras.get("max_site_mass")
    if mass and mass >= 1:
        out["bound_factor"] = 1 + math.log(mass)
    return jsonable(out)


def twostage_summary(result: TwoStageResult) -> dict:
    return jsonable({
        "method": result.method,
        "first_stage": sorted_ids(result.first_stage),
        "first_cost": result.first_cost,
        "expected_second_cost": result.expected_second_cost,
        "second_cost_std": result.second_cost_std,
        "total": result.total,
        "copy_cost": result.copy_cost,
        "second_stage": {k: sorted_ids(v) for k, v in result.second_stage.items()},
        "second_costs": result.second_costs,
        "evaluations": result.evaluations,
        "extras": result.extras,
    })


def sim_summary(report: SimReport) -> dict:
    return jsonable({
        "mean": report.mean,
        "percentiles": report.percentiles,
        "legs": len(report.leg_means),
        "users": len(report.user_means),
        "capacity": report.capacity,
        "analytic": report.analytic,
    })


# ─── Writers ──────────────────────────────────────────────────────────────────

def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([float(x) if isinstance(x, (Fraction, np.floating)) else x for x in row])
    return path


def write_trail(path: Path, trail) -> Path:
    return write_csv(path, TRAIL_HEADER, (
        (i + 1, s.element, s.gain, s.ratio, s.cost, s.objective) for i, s in enumerate(trail)
    ))


def write_deployment(path: Path, sites=(), first_stage=(), second_stage=None) -> Path:
    write_text(path, dump_deployment(sites, first_stage, second_stage))
    return path


def write_report(run_dir: Path, report: dict) -> None:
    from .runs import write_json

    report = jsonable(report)
    write_json(run_dir / "report.json", report)
    write_text(run_dir / "report.txt", render_text(report))


# ─── Text report ──────────────────────────────────────────────────────────────

def _rule(title: str) -> str:
    return f"── {title} " + "─" * max(4, 64 - len(title))


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v) if v else "(none)"
    return str(v)


def _section(lines: List[str], data: Mapping[str, Any], indent: int = 2) -> None:
    pad = " " * indent
    for key in sorted(data):
        value = data[key]
        if isinstance(value, Mapping):
            if not value:
                lines.append(f"{pad}{key}: (none)")
                continue
            lines.append(f"{pad}{key}:")
            _section(lines, value, indent + 2)
        else:
            lines.append(f"{pad}{key}: {_fmt(value)}")


def render_text(report: Mapping[str, Any]) -> str:
    head = f"ROADCAST  {report.get('subcommand', '?')}  [{report.get('status', '?')}]"
    lines = [
        "╔" + "═" * 66 + "╗",
        f"║  {head:<64}║",
        "╚" + "═" * 66 + "╝",
    ]
    if report.get("status") == "error":
        lines.append(f"ERROR {report.get('code')}: {report.get('message')}")
        if "achievable" in report:
            lines.append(f"  max achievable: {_fmt(report['achievable'])}")
        return "\n".join(lines) + "\n"

    headline = report.get("headline")
    if headline:
        lines.append(f"  {headline['name']}: {_fmt(headline['value'])}")
    for key in sorted(report):
        if key in ("subcommand", "status", "headline"):
            continue
        value = report[key]
        lines.append("")
        lines.append(_rule(key.upper()))
        if isinstance(value, Mapping):
            _section(lines, value)
        else:
            lines.append(f"  {_fmt(value)}")
    return "\n".join(lines) + "\n"
