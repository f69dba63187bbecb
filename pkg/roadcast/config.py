"""
roadcast — Configuration
Every tunable is read once from the environment, with the defaults used
by the planning experiments.
"""
import logging
import os
from pathlib import Path


def _env_float(name: str, default: float) -> float:
    return float(os.environ.get(name, default))


def _env_int(name: str, default: int) -> int:
    return int(os.environ.get(name, default))


# ─── Geometry ─────────────────────────────────────────────────────────────────
EPS_GEO = _env_float("ROADCAST_EPS_GEO", 1e-9)      # meters

# ─── Interval defaults (applied when a file omits them) ───────────────────────
DEFAULT_SPEED_INTERVAL = (10.0, 20.0)               # m/s
DEFAULT_DENSITY_INTERVAL = (
    _env_float("ROADCAST_DENSITY_LOW", 0.01),
    _env_float("ROADCAST_DENSITY_HIGH", 0.03),
)                                                   # users/m
DEFAULT_RATE_INTERVAL = (5.0, 10.0)                 # Mbps
DEFAULT_COST = 1.0

# ─── Planner ──────────────────────────────────────────────────────────────────
DELTA = _env_float("ROADCAST_DELTA", 0.0005)        # binary search stop gap
TAU = _env_float("ROADCAST_TAU", 0.01)              # mean-speed target step
ENUM_CAP = _env_int("ROADCAST_ENUM_CAP", 12)        # max |A_p| for K' enumeration
ENUM_ROUNDS = _env_int("ROADCAST_ENUM_ROUNDS", 10)  # certificate retries
OBJ_TOL = 1e-9                                      # float-mode feasibility slack

# ─── Paths / mobility ─────────────────────────────────────────────────────────
MIN_PATH_LENGTH = 2000.0                            # meters
NUM_PATHS = 100
START_RETRIES = 100

# ─── Runs ─────────────────────────────────────────────────────────────────────
DEFAULT_SEED = _env_int("ROADCAST_SEED", 0)
RUNS_DIR = Path(os.environ.get("ROADCAST_RUNS_DIR", "runs")).resolve()

# ─── API ──────────────────────────────────────────────────────────────────────
API_TOKEN = os.environ.get("ROADCAST_API_TOKEN", "roadcast-dev")
PORT = int(os.environ.get("ROADCAST_PORT", os.environ.get("PORT", 8000)))

LOG_LEVEL = os.environ.get("ROADCAST_LOG_LEVEL", "INFO")


def setup_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="[%(levelname)s] %(name)s: %(message)s",
    )
