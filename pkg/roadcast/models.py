"""
roadcast — Pydantic models.
"""
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .config import DEFAULT_SEED, DELTA, MIN_PATH_LENGTH, NUM_PATHS, TAU

Subcommand = Literal[
    "partition", "evaluate", "plan-mincost", "plan-maxopp", "plan-robust",
    "plan-twostage", "worst-case", "baseline", "simulate",
]

# first entry is the default
METHODS: Dict[str, tuple] = {
    "plan-robust": ("meanspeed", "enum"),
    "plan-twostage": ("saa", "exp", "sec"),
    "baseline": ("rand", "dist"),
}

REQUIRED: Dict[str, tuple] = {
    "partition": ("network",),
    "evaluate": ("network", "deployment"),
    "plan-mincost": ("network",),
    "plan-maxopp": ("network", "budget"),
    "plan-robust": ("network", "lam"),
    "plan-twostage": ("network", "lam"),
    "worst-case": ("network", "deployment"),
    "baseline": ("network",),
    "simulate": ("network", "deployment"),
}

FLAG_ALIASES = {"lambda": "lam"}


class RunConfig(BaseModel):
    subcommand: Subcommand
    network: Optional[str] = None
    paths: Optional[str] = None
    deployment: Optional[str] = None
    scenario: Optional[str] = None
    trace: Optional[str] = None

    metric: Literal["d", "t", "gamma"] = "d"
    method: Optional[str] = None
    lam: Optional[float] = None
    use_demands: bool = False
    budget: Optional[float] = None
    delta: float = DELTA
    tau: float = TAU
    samples: int = 20
    test_samples: int = 20
    inflation: Optional[float] = None
    seed: int = DEFAULT_SEED

    min_length: float = MIN_PATH_LENGTH
    num_paths: int = NUM_PATHS
    fastest: bool = False
    reduce: bool = False

    users: int = 50
    duration: float = 600.0
    timestep: float = 1.0
    min_leg: Optional[float] = None
    policy: Literal["least", "random"] = "least"

    robust: bool = False
    exact: bool = False
    lazy: bool = True
    prune: bool = True

    @field_validator("lam", "delta", "tau", "duration", "timestep", "min_length")
    @classmethod
    def _positive(cls, v, info):
        if v is not None and not v > 0:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("budget", "min_leg")
    @classmethod
    def _nonnegative(cls, v, info):
        if v is not None and v < 0:
            raise ValueError(f"{info.field_name} must be nonnegative")
        return v

    @field_validator("samples", "test_samples", "num_paths", "users")
    @classmethod
    def _count(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return v

    @field_validator("inflation")
    @classmethod
    def _inflation(cls, v):
        if v is not None and v < 1:
            raise ValueError("inflation must be at least 1 (second stage never cheaper)")
        return v

    @model_validator(mode="after")
    def _required(self):
        for name in REQUIRED[self.subcommand]:
            if getattr(self, name) is None:
                flag = "lambda" if name == "lam" else name.replace("_", "-")
                raise ValueError(f"{self.subcommand} requires --{flag}")
        if self.subcommand == "plan-mincost" and self.lam is None and not self.use_demands:
            raise ValueError("plan-mincost requires --lambda (or --use-demands)")
        if self.subcommand == "baseline" and self.lam is None and self.budget is None and not self.use_demands:
            raise ValueError("baseline requires --lambda or --budget")
        if self.subcommand in METHODS:
            allowed = METHODS[self.subcommand]
            if self.method is None:
                self.method = allowed[0]
            elif self.method not in allowed:
                raise ValueError(f"{self.subcommand} --method must be one of {', '.join(allowed)}")
        elif self.method is not None:
            raise ValueError(f"{self.subcommand} takes no --method")
        return self

    def inputs(self) -> Dict[str, str]:
        names = ("network", "paths", "deployment", "scenario", "trace")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


class ExperimentSpec(BaseModel):
    base: RunConfig
    flag: str
    values: List[float] = Field(min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [DEFAULT_SEED], min_length=1)
    jobs: int = 1

    @field_validator("flag")
    @classmethod
    def _known_flag(cls, v):
        name = FLAG_ALIASES.get(v, v.replace("-", "_"))
        field = RunConfig.model_fields.get(name)
        if field is None or field.annotation not in (int, float, Optional[int], Optional[float]):
            raise ValueError(f"cannot sweep {v!r}: not a numeric run flag")
        return name

    @field_validator("jobs")
    @classmethod
    def _jobs(cls, v):
        if v < 1:
            raise ValueError("jobs must be at least 1")
        return v

    def point(self, value: float, seed: int) -> RunConfig:
        data = self.base.model_dump()
        data.update({self.flag: value, "seed": seed})
        return RunConfig.model_validate(data)


class RunRecord(BaseModel):
    run_id: str
    ok: bool
    exit_code: int
    run_dir: str
    report: dict
    error: Optional[str] = None
