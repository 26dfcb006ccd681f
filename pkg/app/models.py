"""
Pydantic models for solver configuration, run reports and experiment rows. Plain shapes with validation.
"""
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator, model_validator


class Variant(str, Enum):
    SYNC_1L = "sync-1l"
    ASYNC_1L = "async-1l"
    SYNC_2L = "sync-2l"
    ASYNC_2L_BASIC = "async-2l-basic"
    ASYNC_2L_ACCURATE = "async-2l-accurate"

    @property
    def two_level(self) -> bool:
        return self in (Variant.SYNC_2L, Variant.ASYNC_2L_BASIC, Variant.ASYNC_2L_ACCURATE)

    @property
    def asynchronous(self) -> bool:
        return self in (Variant.ASYNC_1L, Variant.ASYNC_2L_BASIC, Variant.ASYNC_2L_ACCURATE)


class CoarseRankMode(str, Enum):
    INLINE = "inline"
    DEDICATED = "dedicated"


class CappedUpdate(str, Enum):
    """Update applied once the current coarse solution has been used max_corr times."""

    PLAIN = "plain"
    DAMPED = "damped"


# --- Solvers ---
class SolverConfig(BaseModel):
    variant: Variant
    eps: float = Field(1e-6, gt=0)
    k_max: int = Field(2000, ge=1)
    max_corr: int = Field(5, ge=1)
    i0: int = Field(0, ge=0)
    # ||b||; filled from the problem when omitted
    norm_b: float | None = None
    coarse_weight: float = Field(0.5, gt=0, lt=1)
    coarse_rank_mode: CoarseRankMode = CoarseRankMode.INLINE
    # accurate variant: halve each reuse of x0 and scale it by the norm drop since its snapshot
    reuse_decay: bool = False
    capped_update: CappedUpdate = CappedUpdate.PLAIN
    # keep (x̄, r̄) owned slices per snapshot round for the consistency check
    record_snapshots: bool = False
    watchdog_factor: int = Field(4, ge=1)


class RunReport(BaseModel):
    variant: Variant
    config: SolverConfig
    k_local: list[int] = Field(default_factory=list)
    rounds: int = 0
    wall_ms: float = 0.0
    final_relres: float = 1.0
    coarse_solves: int = 0
    corrections_applied: int = 0
    corrections: list[int] = Field(default_factory=list)
    coarse_solves_seen: list[int] = Field(default_factory=list)
    max_corrections_per_version: int = 0
    converged: bool = False
    timed_out: bool = False
    snapshot_error: float | None = None
    snapshot_rounds_checked: int = 0
    diagnostics: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _converged_needs_residual(self) -> "RunReport":
        if self.converged and not self.final_relres < self.config.eps:
            raise ValueError("converged report must have final_relres < eps")
        return self


# --- Harness ---
class ExperimentConfig(BaseModel):
    grid: tuple[int, int, int]
    proc: tuple[int, int, int] = (1, 1, 1)
    overlap: int = Field(2, ge=0)
    variant: Variant = Variant.SYNC_1L
    eps: float = Field(1e-6, gt=0)
    k_max: int = Field(2000, ge=1)
    max_corr: int = Field(5, ge=1)
    i0: int = Field(0, ge=0)
    coarse_rank_mode: CoarseRankMode = CoarseRankMode.INLINE
    coarse_weight: float = Field(0.5, gt=0, lt=1)
    reuse_decay: bool = False
    capped_update: CappedUpdate = CappedUpdate.PLAIN
    delay: str = "immediate"
    coarse_delay: str | None = None
    mode: str = "free"
    seed: int = 0
    repetitions: int = Field(1, ge=1)
    csv_path: Path | None = None
    trace_path: Path | None = None
    allow_nonconverged: bool = False

    @field_validator("grid", "proc")
    @classmethod
    def _positive(cls, v: tuple[int, int, int]) -> tuple[int, int, int]:
        if min(v) < 1:
            raise ValueError(f"every axis must be >= 1, got {v}")
        return v

    @field_validator("mode")
    @classmethod
    def _mode(cls, v: str) -> str:
        if v not in ("free", "lockstep"):
            raise ValueError(f"mode must be free or lockstep, got {v!r}")
        return v

    @model_validator(mode="after")
    def _proc_fits_grid(self) -> "ExperimentConfig":
        for n, q in zip(self.grid, self.proc):
            if q > n:
                raise ValueError(f"processor grid {self.proc} exceeds grid {self.grid}")
        p = self.proc[0] * self.proc[1] * self.proc[2]
        if self.coarse_rank_mode == CoarseRankMode.INLINE and self.i0 >= p:
            raise ValueError(f"i0={self.i0} is not a subdomain rank (p={p})")
        return self

    @property
    def p(self) -> int:
        return self.proc[0] * self.proc[1] * self.proc[2]


CSV_COLUMNS = (
    "run_id",
    "variant",
    "p",
    "px",
    "py",
    "pz",
    "local_n",
    "overlap",
    "eps",
    "seed",
    "rank",
    "k_rounds",
    "k_local",
    "coarse_solves",
    "corrections",
    "wall_ms",
    "final_relres",
    "converged",
)


class CsvRow(BaseModel):
    run_id: str
    variant: Variant
    p: int
    px: int
    py: int
    pz: int
    local_n: float
    overlap: int
    eps: float
    seed: int
    rank: int
    k_rounds: int
    k_local: int
    coarse_solves: int
    corrections: int
    wall_ms: float
    final_relres: float
    converged: bool
