"""
Two-level asynchronous RAS with non-blocking collectives.

basic:    gather R0 R_i^T B_i r_i from the current (inconsistent) residuals, solve at the root,
          broadcast, and apply each coarse solution in exactly one corrected update.
accurate: gather from a snapshot residual built on a synchronized copy of x, so the coarse
          residual is the restriction of one global residual; apply the latest coarse solution
          in every update until it has been used max_corr times.

The coarse root is subdomain rank i0 (inline) or an extra rank p that only gathers, solves and
broadcasts (dedicated).
"""
from __future__ import annotations

import asyncio
import time

import numpy as np

from app.errors import ConfigurationError, WatchdogExpired
from app.logging_config import get_logger
from app.models import CappedUpdate, CoarseRankMode, RunReport, SolverConfig, Variant
from app.problem import CoarseOperator, ProblemSet
from app.runtime import Comm, Runtime
from app.solvers.async_one_level import check_runtime, iterate
from app.solvers.base import (
    TAG_SNAPSHOT,
    BaseSolver,
    Observer,
    coarse_root,
    make_report,
    resolve_config,
    runtime_diagnostics,
)
from app.solvers.kernels import corrected_update, local_update, reuse_scale, snapshot_residual
from app.solvers.state import RankState, SnapshotRecord
from app.verification import snapshot_consistency

logger = get_logger(__name__)


def _solve_and_broadcast(comm: Comm, state: RankState, coarse: CoarseOperator, root: int) -> None:
    if comm.rank == root:
        state.x0[:] = coarse.solve(state.req_r0.result)
        state.coarse_solves += 1
    state.req_x0 = comm.i_bcast(state.x0, root)


def basic_step(comm: Comm, state: RankState, coarse: CoarseOperator, root: int, config: SolverConfig) -> None:
    """One pass of the three-state coarse machine followed by the update."""
    if state.state0 == 0:
        state.req_r0 = comm.i_reduce_to_root(coarse.restrict(state.rank, state.r), root)
        state.state0 = 1
    if state.state0 == 1 and comm.test(state.req_r0):
        _solve_and_broadcast(comm, state, coarse, root)
        state.state0 = 2
    if state.state0 == 2 and comm.test(state.req_x0):
        state.bump_x0_version()
        corrected_update(state, coarse, config.coarse_weight)
        state.state0 = 0
    else:
        local_update(state)


def accurate_step(comm: Comm, state: RankState, coarse: CoarseOperator, root: int, config: SolverConfig) -> None:
    """One pass of the four-state coarse machine followed by the (capped) corrected update."""
    sub = state.sub
    if state.state0 == 0:
        owned = sub.owned_slots
        state.xbar[owned] = state.x[owned]
        state.norm_at_snapshot = state.norm
        state.reqs_xbar = comm.post_halo_exchange(TAG_SNAPSHOT)
        state.state0 = 1
    if state.state0 == 1 and comm.test_all(state.reqs_xbar):
        snapshot_residual(state)
        if config.record_snapshots:
            owned = sub.owned_slots
            state.snapshots.append(
                SnapshotRecord(
                    round=state.snapshot_rounds,
                    xbar_owned=state.xbar[owned].copy(),
                    rbar_owned=state.rbar[owned].copy(),
                )
            )
        state.snapshot_rounds += 1
        state.req_r0 = comm.i_reduce_to_root(coarse.restrict(state.rank, state.rbar), root)
        state.state0 = 2
    if state.state0 == 2 and comm.test(state.req_r0):
        _solve_and_broadcast(comm, state, coarse, root)
        state.state0 = 3
    if state.state0 == 3 and comm.test(state.req_x0):
        state.bump_x0_version()
        state.state0 = 0
    if state.corr_used < config.max_corr:
        scale = reuse_scale(state) if config.reuse_decay else 1.0
        corrected_update(state, coarse, config.coarse_weight, scale)
    elif config.capped_update == CappedUpdate.DAMPED:
        local_update(state, 1.0 - config.coarse_weight)
    else:
        local_update(state)


async def coarse_rank_worker(comm: Comm, coarse: CoarseOperator) -> int:
    """Dedicated root: gather, solve, broadcast until every subdomain rank has stopped."""
    x0 = np.zeros(comm.size)
    solves = 0
    try:
        while True:
            req = comm.i_reduce_to_root(None, comm.rank)
            while not comm.test(req):
                if not comm.others_active():
                    return solves
                await comm.step()
            x0[:] = coarse.solve(req.result)
            solves += 1
            comm.test(comm.i_bcast(x0, comm.rank))
            await comm.step()
    except WatchdogExpired:
        return solves


async def _run_two_level(
    runtime: Runtime,
    problem: ProblemSet,
    config: SolverConfig,
    accurate: bool,
    observer: Observer | None,
) -> RunReport:
    config = resolve_config(problem, config)
    coarse = problem.coarse
    if coarse is None:
        raise ConfigurationError(f"{config.variant.value} needs a coarse operator")
    dedicated = config.coarse_rank_mode == CoarseRankMode.DEDICATED
    check_runtime(runtime, problem, extra_ranks=1 if dedicated else 0)
    root = coarse_root(problem, config)
    step = accurate_step if accurate else basic_step
    states = [RankState.initial(sub, problem.p) for sub in problem.subdomains]
    logger.info("run_started", extra={"variant": config.variant.value, "p": problem.p})

    async def worker(comm: Comm) -> RankState:
        state = states[comm.rank]
        try:
            if accurate:
                comm.register_halo(TAG_SNAPSHOT, state.xbar, state.sub.send_layout, state.sub.halo_layout)
            await iterate(comm, state, config, lambda s: step(comm, s, coarse, root, config), observer)
        except WatchdogExpired:
            state.timed_out = True
        logger.debug(
            "rank_finished",
            extra={"rank": comm.rank, "tick": comm.tick, "rounds": state.k, "corrections": state.corrections},
        )
        return state

    async def coarse_worker(comm: Comm) -> int:
        return await coarse_rank_worker(comm, coarse)

    workers = [worker] * problem.p + ([coarse_worker] if dedicated else [])
    t0 = time.perf_counter()
    results = await runtime.run(workers)
    wall_ms = (time.perf_counter() - t0) * 1000

    coarse_solves = results[-1] if dedicated else states[root].coarse_solves
    snapshot_error, checked = None, 0
    if config.record_snapshots and accurate:
        snapshot_error, checked = snapshot_consistency(problem, states)
    return make_report(
        problem,
        config,
        states,
        wall_ms,
        coarse_solves=coarse_solves,
        diagnostics=runtime_diagnostics(runtime),
        snapshot_error=snapshot_error,
        snapshot_rounds_checked=checked,
    )


async def run_async_two_level_basic(
    runtime: Runtime,
    problem: ProblemSet,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunReport:
    return await _run_two_level(runtime, problem, config, False, observer)


async def run_async_two_level_accurate(
    runtime: Runtime,
    problem: ProblemSet,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunReport:
    return await _run_two_level(runtime, problem, config, True, observer)


class AsyncTwoLevelBasicSolver(BaseSolver):
    variant = Variant.ASYNC_2L_BASIC
    asynchronous = True

    def run(self, problem, config, runtime: Runtime | None = None, observer=None) -> RunReport:
        if runtime is None:
            raise ConfigurationError("async-2l-basic needs a runtime")
        return asyncio.run(run_async_two_level_basic(runtime, problem, config, observer))


class AsyncTwoLevelAccurateSolver(BaseSolver):
    variant = Variant.ASYNC_2L_ACCURATE
    asynchronous = True

    def run(self, problem, config, runtime: Runtime | None = None, observer=None) -> RunReport:
        if runtime is None:
            raise ConfigurationError("async-2l-accurate needs a runtime")
        return asyncio.run(run_async_two_level_accurate(runtime, problem, config, observer))
