"""
Shared solver plumbing: the solver interface, runtime construction and report assembly.
Each variant has one solver class; the registry maps variant names to them.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, Callable, Sequence

from app.errors import ConfigurationError
from app.logging_config import get_logger
from app.models import CoarseRankMode, RunReport, SolverConfig, Variant
from app.problem import ProblemSet
from app.runtime import DelayModel, Runtime, SchedulerMode
from app.solvers.kernels import final_residual_check
from app.solvers.state import RankState

logger = get_logger(__name__)

# called with a rank's state right after each of its updates
Observer = Callable[[RankState], None]

TAG_X = "x"
TAG_SNAPSHOT = "snapshot"
TAG_CHECK = "check"


class BaseSolver(ABC):
    """Run one variant on a prepared problem set. Asynchronous variants need a runtime."""

    variant: Variant
    asynchronous: bool = False

    @abstractmethod
    def run(
        self,
        problem: ProblemSet,
        config: SolverConfig,
        runtime: Runtime | None = None,
        observer: Observer | None = None,
    ) -> RunReport:
        ...


def resolve_config(problem: ProblemSet, config: SolverConfig) -> SolverConfig:
    """Fill ||b|| from the problem and check the coarse root against the rank count."""
    if config.variant.two_level and problem.coarse is None:
        raise ConfigurationError(f"{config.variant.value} needs a coarse operator")
    if config.variant.two_level and config.coarse_rank_mode == CoarseRankMode.INLINE and config.i0 >= problem.p:
        raise ConfigurationError(f"i0={config.i0} is not a subdomain rank (p={problem.p})")
    if config.norm_b is None:
        return config.model_copy(update={"norm_b": problem.norm_b})
    return config


def coarse_root(problem: ProblemSet, config: SolverConfig) -> int:
    return problem.p if config.coarse_rank_mode == CoarseRankMode.DEDICATED else config.i0


def watchdog_ticks(config: SolverConfig, delay: DelayModel, coarse_delay: DelayModel | None = None) -> int:
    max_delay = max(delay.max_delay, coarse_delay.max_delay if coarse_delay else 0)
    return config.k_max * (max_delay + 2) * config.watchdog_factor


def build_runtime(
    problem: ProblemSet,
    config: SolverConfig,
    delay: DelayModel,
    mode: SchedulerMode = SchedulerMode.FREE,
    *,
    coarse_delay: DelayModel | None = None,
    trace: bool = False,
    record_allreduce: bool = False,
) -> Runtime:
    dedicated = config.variant.two_level and config.coarse_rank_mode == CoarseRankMode.DEDICATED
    return Runtime(
        problem.p,
        delay,
        mode,
        coarse_delay=coarse_delay,
        extra_ranks=1 if dedicated else 0,
        trace=trace,
        record_allreduce=record_allreduce,
        watchdog_ticks=watchdog_ticks(config, delay, coarse_delay),
    )


def keep_iterating(state: RankState, config: SolverConfig) -> bool:
    assert config.norm_b is not None
    return state.norm >= config.eps * config.norm_b and state.k < config.k_max and not state.diverged


def check_norm(state: RankState, squared: float) -> None:
    """Store sqrt(squared) as the current norm, flagging divergence on a non-finite value."""
    if not math.isfinite(squared):
        state.diverged = True
        state.norm = float("nan")
        logger.error("norm_not_finite", extra={"rank": state.rank, "rounds": state.k})
        return
    state.norm = math.sqrt(max(squared, 0.0))


def make_report(
    problem: ProblemSet,
    config: SolverConfig,
    states: Sequence[RankState],
    wall_ms: float,
    *,
    coarse_solves: int = 0,
    diagnostics: dict[str, Any] | None = None,
    snapshot_error: float | None = None,
    snapshot_rounds_checked: int = 0,
) -> RunReport:
    relres = final_residual_check(states, problem)
    diverged = any(s.diverged for s in states)
    timed_out = any(s.timed_out for s in states)
    converged = math.isfinite(relres) and relres < config.eps and not diverged
    diag = dict(diagnostics or {})
    if diverged:
        diag["diverged"] = True
    assert config.norm_b is not None
    diag.setdefault("approx_relres", [s.norm / config.norm_b for s in states])
    diag.setdefault("convergence_checks", max((s.convergence_checks for s in states), default=0))
    report = RunReport(
        variant=config.variant,
        config=config,
        k_local=[s.k_local for s in states],
        rounds=max((s.k for s in states), default=0),
        wall_ms=wall_ms,
        final_relres=relres,
        coarse_solves=coarse_solves,
        corrections_applied=max((s.corrections for s in states), default=0),
        corrections=[s.corrections for s in states],
        coarse_solves_seen=[s.coarse_solves_seen for s in states],
        max_corrections_per_version=max((s.max_corr_seen for s in states), default=0),
        converged=converged,
        timed_out=timed_out,
        snapshot_error=snapshot_error,
        snapshot_rounds_checked=snapshot_rounds_checked,
        diagnostics=diag,
    )
    log = logger.info if converged else logger.warning
    log(
        "run_finished",
        extra={
            "variant": config.variant.value,
            "p": problem.p,
            "rounds": report.rounds,
            "k_local": max(report.k_local, default=0),
            "coarse_solves": report.coarse_solves,
            "corrections": report.corrections_applied,
            "relres": f"{relres:.3e}",
            "duration_ms": round(wall_ms, 2),
        },
    )
    return report


def runtime_diagnostics(runtime: Runtime) -> dict[str, Any]:
    return {
        "mode": runtime.mode.value,
        "delay": runtime.delay.label(),
        "coarse_delay": runtime.coarse_delay.label(),
        "ticks": runtime.tick,
        "fifo_violations": runtime.fifo_violations,
        "live_requests": runtime.live_requests,
        "pending_messages": runtime.pending_messages(),
        "allreduce_backlog": runtime.allreduce_backlog,
    }
