"""
Asynchronous RAS over the simulated runtime.

Each rank updates from whatever halo values have arrived, posts its interface values without
waiting, and polls a non-blocking all-reduce of r_i^T B_i r_i for an approximate global norm.
Every rank reads the same all-reduce results, so all ranks stop at the same round.
"""
from __future__ import annotations

import asyncio
import time
from typing import Callable

from app.errors import ConfigurationError, WatchdogExpired
from app.logging_config import get_logger
from app.models import RunReport, SolverConfig, Variant
from app.problem import ProblemSet
from app.runtime import Comm, Request, Runtime
from app.solvers.base import (
    TAG_CHECK,
    TAG_X,
    BaseSolver,
    Observer,
    check_norm,
    keep_iterating,
    make_report,
    resolve_config,
    runtime_diagnostics,
)
from app.solvers.kernels import local_update, owned_square, residual, residual_of
from app.solvers.state import RankState

logger = get_logger(__name__)


async def start_rank(comm: Comm, state: RankState) -> None:
    """Register the halo buffers, compute r_i and the exact initial norm (blocking all-reduce)."""
    sub = state.sub
    comm.register_halo(TAG_X, state.x, sub.send_layout, sub.halo_layout)
    comm.register_halo(TAG_CHECK, state.xcheck, sub.send_layout, sub.halo_layout)
    residual(state)
    check_norm(state, await comm.allreduce_sum(owned_square(state)))


def poll_norm(comm: Comm, state: RankState, config: SolverConfig) -> None:
    """Read a completed norm round; while the rank keeps iterating, post the next one."""
    if not comm.test(state.req_r):
        return
    # a null request completes at once and carries no new sum
    if state.req_r.result is not None:
        check_norm(state, float(state.req_r.result))
        state.req_r = Request.null()
    if not keep_iterating(state, config):
        return
    state.req_r = comm.i_allreduce_sum(owned_square(state))
    state.k += 1
    # a single-rank group completes at post
    if comm.test(state.req_r):
        check_norm(state, float(state.req_r.result))
        state.req_r = Request.null()


async def exchange_and_poll(comm: Comm, state: RankState, config: SolverConfig) -> None:
    """Post x_i to the neighbors, end the tick, recompute r_i and poll the norm all-reduce."""
    comm.free_on_complete(comm.post_halo_exchange(TAG_X))
    await comm.step()
    residual(state)
    poll_norm(comm, state, config)


async def confirm_convergence(comm: Comm, state: RankState, config: SolverConfig) -> bool:
    """Synchronous check of the true residual once the approximate norm is below eps.

    Every rank stops on the same round, so all of them enter the check together and read the
    same sum. On failure the rank resumes from the consistent copy with the checked norm.
    """
    assert config.norm_b is not None
    state.convergence_checks += 1
    state.xcheck[:] = state.x
    await comm.wait_all(comm.post_halo_exchange(TAG_CHECK))
    r = residual_of(state, state.xcheck)
    check_norm(state, await comm.allreduce_sum(owned_square(state, r)))
    if state.diverged or state.norm < config.eps * config.norm_b:
        return True
    state.x[:] = state.xcheck
    state.r[:] = r
    logger.info(
        "convergence_check_failed",
        extra={"rank": state.rank, "rounds": state.k, "relres": f"{state.norm / config.norm_b:.3e}"},
    )
    return False


async def iterate(
    comm: Comm,
    state: RankState,
    config: SolverConfig,
    step: Callable[[RankState], object],
    observer: Observer | None,
) -> None:
    """Run `step` until the norm test stops the rank, then confirm; k_max caps the whole run."""
    await start_rank(comm, state)
    while True:
        while keep_iterating(state, config):
            step(state)
            state.k_local += 1
            if observer is not None:
                observer(state)
            await exchange_and_poll(comm, state, config)
        assert config.norm_b is not None
        if state.diverged or state.norm >= config.eps * config.norm_b:
            return
        if await confirm_convergence(comm, state, config) or state.k >= config.k_max:
            return


def check_runtime(runtime: Runtime, problem: ProblemSet, extra_ranks: int = 0) -> None:
    if runtime.p != problem.p or runtime.n_ranks != problem.p + extra_ranks:
        raise ConfigurationError(
            f"runtime hosts {runtime.n_ranks} ranks ({runtime.p} subdomain ranks); "
            f"problem needs {problem.p} + {extra_ranks}"
        )


async def run_async_ras(
    runtime: Runtime,
    problem: ProblemSet,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunReport:
    config = resolve_config(problem, config)
    check_runtime(runtime, problem)
    states = [RankState.initial(sub, problem.p) for sub in problem.subdomains]
    logger.info("run_started", extra={"variant": config.variant.value, "p": problem.p})

    async def worker(comm: Comm) -> RankState:
        state = states[comm.rank]
        try:
            await iterate(comm, state, config, local_update, observer)
        except WatchdogExpired:
            state.timed_out = True
        logger.debug("rank_finished", extra={"rank": comm.rank, "tick": comm.tick, "rounds": state.k})
        return state

    t0 = time.perf_counter()
    await runtime.run([worker] * runtime.n_ranks)
    wall_ms = (time.perf_counter() - t0) * 1000
    return make_report(problem, config, states, wall_ms, diagnostics=runtime_diagnostics(runtime))


class AsyncRasSolver(BaseSolver):
    variant = Variant.ASYNC_1L
    asynchronous = True

    def run(self, problem, config, runtime: Runtime | None = None, observer=None) -> RunReport:
        if runtime is None:
            raise ConfigurationError("async-1l needs a runtime")
        return asyncio.run(run_async_ras(runtime, problem, config, observer))
