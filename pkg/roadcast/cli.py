"""
roadcast — Command line

Usage:
    python -m roadcast partition     --network net.txt
    python -m roadcast evaluate      --network net.txt --paths paths.txt --deployment dep.txt
    python -m roadcast plan-mincost  --network net.txt --lambda 0.4 [--metric d|t|gamma]
    python -m roadcast plan-maxopp   --network net.txt --budget 10 [--robust]
    python -m roadcast plan-robust   --network net.txt --lambda 2 --method enum|meanspeed
    python -m roadcast plan-twostage --network net.txt --lambda 2 --method saa|exp|sec --samples 20 --inflation 5
    python -m roadcast worst-case    --network net.txt --deployment dep.txt
    python -m roadcast baseline      --network net.txt --method rand|dist --lambda 0.4
    python -m roadcast simulate      --network net.txt --deployment dep.txt --users 50 --duration 600
    python -m roadcast sweep --flag lambda --values 0.2,0.4 --seeds 0,1,2 -- plan-mincost --network net.txt --lambda 0.2
    python -m roadcast replay runs/3fa9c01b2e
    python -m roadcast serve --port 8000

Units: meters, m/s, users/m, Mbps, seconds. Without --paths, paths are
generated from --min-length/--num-paths/--seed. ROADCAST_SEED sets the
default seed. Each run writes into --out (default $ROADCAST_RUNS_DIR/<id>)
and prints that directory; failures print `ERROR <CODE>: <message>`.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from . import config
from .errors import EXIT_CODES, USAGE, RoadcastError, UsageError
from .models import METHODS, ExperimentSpec, RunConfig

log = logging.getLogger(__name__)


# ─── Parser ───────────────────────────────────────────────────────────────────

def _inputs(p: argparse.ArgumentParser, paths: bool = True, deployment: bool = False,
            scenario: bool = False) -> None:
    p.add_argument("--network", help="network + candidate sites file")
    if paths:
        p.add_argument("--paths", help="paths file; generated when omitted")
        p.add_argument("--min-length", type=float, help="minimum generated path length, m")
        p.add_argument("--num-paths", type=int, help="number of generated paths")
        p.add_argument("--fastest", action="store_true", help="generate fastest (not shortest) paths")
        p.add_argument("--reduce", action="store_true", help="drop paths that split into two others")
    if deployment:
        p.add_argument("--deployment", help="deployment file (deploy <site> lines)")
    if scenario:
        p.add_argument("--scenario", help="scenario file; missing values fall back to interval midpoints")
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="random seed (ROADCAST_SEED)")
    p.add_argument("--out", help="run directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _metric(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=("d", "t", "gamma"),
                   help="d: distance opportunity, t: time opportunity, gamma: throughput (Mbps)")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.add_argument("--naive", dest="lazy", action="store_false", default=None,
                   help="plain greedy instead of lazy evaluation")


def _method(p: argparse.ArgumentParser, sub: str) -> None:
    p.add_argument("--method", choices=METHODS[sub], help=f"default {METHODS[sub][0]}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadcast", description="Roadside AP deployment planner")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("partition", help="split edges into coverage subsegments")
    _inputs(p, paths=False)

    p = subs.add_parser("evaluate", help="per-path eta_d, eta_t, gamma of a deployment")
    _inputs(p, deployment=True, scenario=True)
    _metric(p)

    p = subs.add_parser("plan-mincost", help="cheapest deployment meeting lambda on every path")
    _inputs(p, scenario=True)
    _metric(p)
    p.add_argument("--lambda", dest="lam", type=float, help="target per path (unit of the metric)")
    p.add_argument("--use-demands", action="store_true", help="per-path lambda from the paths file")

    p = subs.add_parser("plan-maxopp", help="maximize the minimum path value under a budget")
    _inputs(p, scenario=True)
    _metric(p)
    p.add_argument("--budget", type=float, help="total deployment cost")
    p.add_argument("--delta", type=float, help="binary search stop gap")
    p.add_argument("--robust", action="store_true", help="plan under k0, report the worst case")

    p = subs.add_parser("plan-robust", help="min-cost deployment robust to interval uncertainty")
    _inputs(p)
    _method(p, "plan-robust")
    p.add_argument("--lambda", dest="lam", type=float, help="worst-case throughput target, Mbps")
    p.add_argument("--tau", type=float, help="meanspeed target step")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")

    p = subs.add_parser("plan-twostage", help="first-stage deployment plus per-scenario augmentation")
    _inputs(p)
    _method(p, "plan-twostage")
    p.add_argument("--metric", choices=("t", "gamma"), help="default gamma")
    p.add_argument("--lambda", dest="lam", type=float, help="target per path and scenario")
    p.add_argument("--samples", type=int, help="learning scenarios N")
    p.add_argument("--test-samples", type=int, help="held-out test scenarios")
    p.add_argument("--inflation", type=float, help="second-stage cost = inflation * first-stage cost")
    p.add_argument("--no-prune", dest="prune", action="store_false", default=None)

    p = subs.add_parser("worst-case", help="worst-case scenario and throughput of a deployment")
    _inputs(p, deployment=True)
    p.add_argument("--exact", action="store_true", help="rational arithmetic")

    p = subs.add_parser("baseline", help="random or max-min distance sampling")
    _inputs(p, scenario=True)
    _method(p, "baseline")
    p.add_argument("--metric", choices=("d", "t", "gamma"))
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--robust", action="store_true", help="stop once the worst case meets lambda")

    p = subs.add_parser("simulate", help="flow-level throughput simulation")
    _inputs(p, paths=False, deployment=True, scenario=True)
    p.add_argument("--trace", help="mobility trace file; generated when omitted")
    p.add_argument("--users", type=int)
    p.add_argument("--duration", type=float, help="seconds")
    p.add_argument("--timestep", type=float, help="seconds")
    p.add_argument("--min-leg", type=float, help="minimum trip length, m")
    p.add_argument("--min-length", type=float, help=argparse.SUPPRESS)
    p.add_argument("--policy", choices=("least", "random"))

    p = subs.add_parser("sweep", help="run a subcommand over flag values and seeds")
    p.add_argument("--flag", required=True, help="numeric flag to vary, e.g. lambda or budget")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", help="comma-separated seeds (default ROADCAST_SEED)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="sweep directory")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("base", nargs=argparse.REMAINDER, help="-- <subcommand> <flags>")

    p = subs.add_parser("replay", help="re-run a stored run and compare artifacts")
    p.add_argument("run_dir")
    p.add_argument("-v", "--verbose", action="store_true")

    p = subs.add_parser("serve", help="HTTP run submission")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=config.PORT)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# ─── Dispatch ─────────────────────────────────────────────────────────────────

RUN_ONLY = {"out", "verbose"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = RunConfig.model_fields
    data = {
        k: v for k, v in vars(args).items()
        if k in fields and k not in RUN_ONLY and v is not None
    }
    return RunConfig.model_validate(data)


def _usage(exc: ValidationError) -> str:
    msgs = []
    for err in exc.errors():
        msg = err["msg"].removeprefix("Value error, ")
        where = ".".join(str(x) for x in err.get("loc", ()))
        msgs.append(f"{where}: {msg}" if where else msg)
    return "; ".join(msgs)


def _fail(code: str, message: str) -> int:
    print(f"ERROR {code}: {message}", file=sys.stderr)
    return EXIT_CODES[code]


def _csv_list(text: Optional[str], cast) -> Optional[list]:
    if text is None:
        return None
    return [cast(x) for x in text.split(",") if x.strip()]


def _sweep(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    from .pipelines import run_sweep
    from .report import write_report
    from .runs import ensure_run_dir, new_run_id

    base_argv = args.base[1:] if args.base[:1] == ["--"] else args.base
    if not base_argv or base_argv[0] in ("sweep", "replay", "serve"):
        raise UsageError("sweep needs a run subcommand after --")
    base = config_from_args(parser.parse_args(base_argv))
    spec = ExperimentSpec(
        base=base,
        flag=args.flag,
        values=_csv_list(args.values, float),
        seeds=_csv_list(args.seeds, int) or [config.DEFAULT_SEED],
        jobs=args.jobs,
    )
    out = Path(args.out).resolve() if args.out else ensure_run_dir(config.RUNS_DIR, new_run_id())
    report = run_sweep(spec, out)
    write_report(out, report)
    print(out)
    for failure in report["failures"]:
        print(f"FAILED x={failure['x']} seed={failure['seed']}: {failure['error']}", file=sys.stderr)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config.setup_logging("DEBUG" if getattr(args, "verbose", False) else config.LOG_LEVEL)

    try:
        if args.subcommand == "serve":
            import uvicorn
            from .router import create_app
            uvicorn.run(create_app(), host=args.host, port=args.port)
            return 0

        if args.subcommand == "replay":
            from .runs import replay
            result = replay(Path(args.run_dir))
            print(f"{'IDENTICAL' if result['identical'] else 'DIFFERS'} {result['replay_dir']}")
            for name in result["mismatched"]:
                print(f"  artifact differs: {name}")
            for name in result["inputs_changed"]:
                print(f"  input changed: {name}")
            return 0 if result["identical"] else 1

        if args.subcommand == "sweep":
            return _sweep(parser, args)

        from .runs import execute
        cfg = config_from_args(args)
        record = execute(cfg, run_dir=Path(args.out) if args.out else None,
                         argv=list(argv) if argv is not None else sys.argv[1:])
    except ValidationError as exc:
        return _fail(USAGE, _usage(exc))
    except RoadcastError as exc:
        return _fail(exc.code, str(exc))

    if not record.ok:
        print(f"ERROR {record.error}", file=sys.stderr)
        return record.exit_code
    if cfg.subcommand == "worst-case":
        print(f"worst {record.report['headline']['value']!r} path {record.report['path']}")
        print((Path(record.run_dir) / "scenario.txt").read_text(encoding="utf-8"), end="")
    print(record.run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
