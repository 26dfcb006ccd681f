"""
Synchronous RAS and two-level RAS: every sweep sees the owners' current values in all ghost slots
and stops on the exact global residual norm.
"""
from __future__ import annotations

import time

import numpy as np

from app.errors import ConfigurationError
from app.logging_config import get_logger
from app.models import RunReport, SolverConfig, Variant
from app.problem import CoarseOperator, ProblemSet
from app.runtime import Runtime
from app.solvers.base import BaseSolver, Observer, check_norm, keep_iterating, make_report, resolve_config
from app.solvers.kernels import corrected_update, local_update, owned_square, residual
from app.solvers.state import RankState

logger = get_logger(__name__)


def _send_slots(problem: ProblemSet) -> list[dict[int, np.ndarray]]:
    return [dict(sub.send_layout) for sub in problem.subdomains]


def exchange_ghosts(states: list[RankState], sends: list[dict[int, np.ndarray]]) -> None:
    """Copy owners' values into every ghost slot."""
    for s in states:
        for j, slots in s.sub.halo_layout:
            s.x[slots] = states[j].x[sends[j][s.rank]]


def _global_norm_squared(states: list[RankState]) -> float:
    total = 0.0
    for s in states:
        total += owned_square(s)
    return total


def _run_sync(
    problem: ProblemSet,
    config: SolverConfig,
    coarse: CoarseOperator | None,
    observer: Observer | None,
) -> RunReport:
    config = resolve_config(problem, config)
    logger.info("run_started", extra={"variant": config.variant.value, "p": problem.p})
    states = [RankState.initial(sub, problem.p) for sub in problem.subdomains]
    sends = _send_slots(problem)

    t0 = time.perf_counter()
    for s in states:
        residual(s)
    squared = _global_norm_squared(states)
    for s in states:
        check_norm(s, squared)
    coarse_solves = 0

    while keep_iterating(states[0], config):
        if coarse is not None:
            r0 = np.array([coarse.restrict(s.rank, s.r) for s in states])
            x0 = coarse.solve(r0)
            coarse_solves += 1
        for s in states:
            if coarse is not None:
                s.x0[:] = x0
                s.bump_x0_version()
                corrected_update(s, coarse, config.coarse_weight)
            else:
                local_update(s)
            s.k_local += 1
            s.k += 1
            if observer is not None:
                observer(s)
        exchange_ghosts(states, sends)
        for s in states:
            residual(s)
        squared = _global_norm_squared(states)
        for s in states:
            check_norm(s, squared)
    wall_ms = (time.perf_counter() - t0) * 1000

    return make_report(
        problem,
        config,
        states,
        wall_ms,
        coarse_solves=coarse_solves,
        diagnostics={"mode": "synchronous"},
    )


def run_sync_ras(problem: ProblemSet, config: SolverConfig, observer: Observer | None = None) -> RunReport:
    return _run_sync(problem, config, None, observer)


def run_sync_two_level(problem: ProblemSet, config: SolverConfig, observer: Observer | None = None) -> RunReport:
    if problem.coarse is None:
        raise ConfigurationError("sync-2l needs a coarse operator")
    return _run_sync(problem, config, problem.coarse, observer)


class SyncRasSolver(BaseSolver):
    variant = Variant.SYNC_1L

    def run(self, problem, config, runtime: Runtime | None = None, observer=None) -> RunReport:
        return run_sync_ras(problem, config, observer)


class SyncTwoLevelSolver(BaseSolver):
    variant = Variant.SYNC_2L

    def run(self, problem, config, runtime: Runtime | None = None, observer=None) -> RunReport:
        return run_sync_two_level(problem, config, observer)
