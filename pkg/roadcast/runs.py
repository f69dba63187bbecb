"""
roadcast — Run directories.
Every run gets a 10-hex-char id and its own directory holding config.json,
manifest.json, the pipeline's artifacts, report.json/report.txt and run.log.
Replay re-executes config.json into <run>/replay/ and compares artifact hashes.
"""
import hashlib
import json
import logging
import platform
import shutil
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .config import RUNS_DIR
from .errors import InputError, RoadcastError
from .models import RunConfig, RunRecord

log = logging.getLogger(__name__)

PACKAGES = ("numpy", "networkx", "shapely", "pydantic", "fastapi")
NOT_ARTIFACTS = {"manifest.json", "run.log"}


def new_run_id() -> str:
    return uuid.uuid4().hex[:10]


def ensure_run_dir(runs_dir: Path, run_id: str) -> Path:
    d = (Path(runs_dir) / run_id).resolve()
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def package_versions() -> Dict[str, str]:
    out = {"python": platform.python_version(), "roadcast": __version__}
    for name in PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "missing"
    return out


def input_hashes(config: RunConfig) -> Dict[str, Dict[str, str]]:
    out = {}
    for name, path in config.inputs().items():
        p = Path(path)
        if not p.is_file():
            raise InputError(f"{name} file not found: {path}")
        out[name] = {"path": str(p.resolve()), "sha256": sha256_file(p)}
    return out


def build_manifest(config: RunConfig, run_id: str, argv: Optional[Sequence[str]] = None) -> dict:
    return {
        "run_id": run_id,
        "subcommand": config.subcommand,
        "seed": config.seed,
        "inputs": input_hashes(config),
        "versions": package_versions(),
        "argv": list(argv) if argv is not None else None,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def artifact_hashes(run_dir: Path) -> Dict[str, str]:
    """sha256 of every top-level file except the manifest and the log."""
    return {
        p.name: sha256_file(p)
        for p in sorted(Path(run_dir).iterdir())
        if p.is_file() and p.name not in NOT_ARTIFACTS
    }


class _ThreadFilter(logging.Filter):
    def __init__(self):
        super().__init__()
        self.thread = threading.get_ident()

    def filter(self, record: logging.LogRecord) -> bool:
        return record.thread == self.thread


@contextmanager
def run_log(run_dir: Path):
    """Copy this thread's roadcast log records into run.log."""
    handler = logging.FileHandler(run_dir / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s"))
    handler.addFilter(_ThreadFilter())
    root = logging.getLogger("roadcast")
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        handler.close()


def execute(config: RunConfig, runs_dir: Optional[Path] = None, run_dir: Optional[Path] = None,
            argv: Optional[Sequence[str]] = None) -> RunRecord:
    """Run one pipeline into its own directory; failures become a RunRecord, not an exception."""
    from .pipelines import run_pipeline
    from .report import jsonable, write_report

    if run_dir is None:
        run_dir = ensure_run_dir(runs_dir or RUNS_DIR, new_run_id())
    else:
        run_dir = Path(run_dir).resolve()
        run_dir.mkdir(parents=True, exist_ok=True)
    run_id = run_dir.name
    config = config.model_copy(update={n: str(Path(p).resolve()) for n, p in config.inputs().items()})
    write_json(run_dir / "config.json", config.model_dump(mode="json"))

    with run_log(run_dir):
        log.info("run %s: %s", run_id, config.subcommand)
        try:
            write_json(run_dir / "manifest.json", build_manifest(config, run_id, argv))
            report = run_pipeline(config, run_dir)
            report["status"] = "success"
            error, exit_code = None, 0
        except RoadcastError as exc:
            log.error("run %s failed: %s %s", run_id, exc.code, exc)
            error, exit_code = f"{exc.code}: {exc}", exc.exit_code
            report = {"subcommand": config.subcommand, "status": "error",
                      "code": exc.code, "message": str(exc)}
            if getattr(exc, "achievable", None) is not None:
                report["achievable"] = float(exc.achievable)
        write_report(run_dir, report)

    return RunRecord(
        run_id=run_id,
        ok=exit_code == 0,
        exit_code=exit_code,
        run_dir=str(run_dir),
        report=jsonable(report),
        error=error,
    )


def load_config(run_dir: Path) -> RunConfig:
    path = Path(run_dir) / "config.json"
    if not path.exists():
        raise InputError(f"no config.json in {run_dir}")
    return RunConfig.model_validate(read_json(path))


def replay(run_dir: Path) -> dict:
    """Re-run a stored config and compare every artifact byte for byte."""
    run_dir = Path(run_dir).resolve()
    config = load_config(run_dir)
    manifest = read_json(run_dir / "manifest.json") if (run_dir / "manifest.json").exists() else {}

    changed: List[str] = []
    for name, entry in manifest.get("inputs", {}).items():
        p = Path(entry["path"])
        if not p.is_file() or sha256_file(p) != entry["sha256"]:
            changed.append(name)

    target = run_dir / "replay"
    if target.exists():
        shutil.rmtree(target)
    record = execute(config, run_dir=target, argv=manifest.get("argv"))

    before = artifact_hashes(run_dir)
    after = artifact_hashes(target)
    mismatched = sorted(n for n in set(before) | set(after) if before.get(n) != after.get(n))
    identical = not mismatched and not changed
    log.info("replay %s: %s", run_dir.name, "identical" if identical else f"differs in {mismatched or changed}")
    return {
        "run_id": run_dir.name,
        "identical": identical,
        "mismatched": mismatched,
        "inputs_changed": changed,
        "exit_code": record.exit_code,
        "replay_dir": str(target),
    }


def list_runs(runs_dir: Optional[Path] = None) -> List[dict]:
    runs_dir = Path(runs_dir or RUNS_DIR)
    runs_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    for report_file in runs_dir.glob("*/report.json"):
        try:
            data = json.loads(report_file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        manifest_file = report_file.parent / "manifest.json"
        created = None
        if manifest_file.exists():
            try:
                created = json.loads(manifest_file.read_text(encoding="utf-8")).get("created_at")
            except (OSError, json.JSONDecodeError):
                pass
        runs.append({
            "run_id": report_file.parent.name,
            "subcommand": data.get("subcommand"),
            "status": data.get("status", "unknown"),
            "created_at": created,
        })
    runs.sort(key=lambda r: r.get("created_at") or "", reverse=True)
    return runs
