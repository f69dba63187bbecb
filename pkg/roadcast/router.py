"""
roadcast — FastAPI router.
Mount with:
    from roadcast.router import mount_roadcast
    mount_roadcast(app)

Endpoints:
    GET  /roadcast/health
    POST /roadcast/runs
    GET  /roadcast/runs
    GET  /roadcast/runs/{run_id}
    POST /roadcast/runs/{run_id}/replay
    POST /roadcast/sweeps
"""
import json
import logging
import re
from typing import Optional

from fastapi import APIRouter, FastAPI, Header, HTTPException

from . import __version__, config
from .errors import RoadcastError
from .models import ExperimentSpec, RunConfig, RunRecord
from .runs import ensure_run_dir, execute, list_runs, new_run_id, replay

log = logging.getLogger(__name__)

router = APIRouter()

_RUN_ID = re.compile(r"^[A-Za-z0-9_-]+$")


def _auth(authorization: Optional[str]):
    if authorization != f"Bearer {config.API_TOKEN}":
        raise HTTPException(status_code=401, detail="Unauthorized")


def _run_dir(run_id: str):
    if not _RUN_ID.match(run_id):
        raise HTTPException(status_code=400, detail="Malformed run id")
    return (config.RUNS_DIR / run_id).resolve()


@router.get("/health")
def roadcast_health():
    return {
        "status": "ready",
        "version": __version__,
        "runs_dir": str(config.RUNS_DIR),
    }


@router.post("/runs", response_model=RunRecord)
def submit_run(cfg: RunConfig, authorization: Optional[str] = Header(None)):
    """Execute one batch run; a planner failure comes back as ok=false with its error code."""
    _auth(authorization)
    try:
        return execute(cfg, runs_dir=config.RUNS_DIR)
    except RoadcastError as e:
        raise HTTPException(status_code=400, detail=f"{e.code}: {e}")
    except Exception as e:
        log.exception("run failed")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/runs")
def get_runs(authorization: Optional[str] = Header(None)):
    _auth(authorization)
    runs = list_runs(config.RUNS_DIR)
    return {"count": len(runs), "runs": runs}


@router.get("/runs/{run_id}")
def get_run(run_id: str, authorization: Optional[str] = Header(None)):
    """Stored report and manifest of a finished run."""
    _auth(authorization)
    run_dir = _run_dir(run_id)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise HTTPException(status_code=404, detail="Run not found")
    manifest_path = run_dir / "manifest.json"
    return {
        "run_id": run_id,
        "report": json.loads(report_path.read_text(encoding="utf-8")),
        "manifest": json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else None,
    }


@router.post("/runs/{run_id}/replay")
def replay_run(run_id: str, authorization: Optional[str] = Header(None)):
    _auth(authorization)
    run_dir = _run_dir(run_id)
    if not (run_dir / "config.json").exists():
        raise HTTPException(status_code=404, detail="Run not found")
    try:
        return {"replayed": True, **replay(run_dir)}
    except RoadcastError as e:
        raise HTTPException(status_code=422, detail=f"{e.code}: {e}")


@router.post("/sweeps")
def submit_sweep(spec: ExperimentSpec, authorization: Optional[str] = Header(None)):
    from .pipelines import run_sweep
    from .report import write_report

    _auth(authorization)
    sweep_id = new_run_id()
    out = ensure_run_dir(config.RUNS_DIR, sweep_id)
    report = run_sweep(spec, out)
    write_report(out, report)
    return {"run_id": sweep_id, **report}


def mount_roadcast(app: FastAPI) -> None:
    app.include_router(router, prefix="/roadcast")
    log.info("[OK] roadcast runs mounted at /roadcast")


def create_app() -> FastAPI:
    app = FastAPI(title="roadcast", description="Roadside AP deployment planner", version=__version__)
    mount_roadcast(app)

    @app.get("/health")
    def health_check():
        return {"status": "ready", "version": __version__, "modules": {"roadcast": "active"}}

    return app
