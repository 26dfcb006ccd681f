"""
Local kernels shared by every variant: residual, plain and coarse-corrected updates, final check.
"""
from __future__ import annotations

from typing import Sequence

from app.problem import CoarseOperator, ProblemSet
from app.solvers.state import RankState
from app.sparse import Vector, dot, norm2, spd_solve, spmv


def residual_of(state: RankState, extended: Vector) -> Vector:
    """b_i - A_i v_i - C_i v_halo for an extended-layout vector v."""
    sub = state.sub
    n = sub.n_local
    return sub.b_local - spmv(sub.a_local, extended[:n]) - spmv(sub.coupling, extended[n:])


def residual(state: RankState) -> Vector:
    """r_i = b_i - A_i x_i - C_i x_halo, stored in state.r."""
    state.r[:] = residual_of(state, state.x)
    return state.r


def snapshot_residual(state: RankState) -> Vector:
    state.rbar[:] = residual_of(state, state.xbar)
    return state.rbar


def owned_square(state: RankState, r: Vector | None = None) -> float:
    """r_i^T B_i r_i."""
    r = state.r if r is None else r
    owned = r[state.sub.owned_slots]
    return dot(owned, owned)


def local_update(state: RankState, weight: float = 1.0) -> Vector:
    """x_i <- x_i + w A_i^{-1} r_i."""
    state.x_i[:] += weight * spd_solve(state.sub.factor, state.r)
    return state.x_i


def corrected_update(
    state: RankState,
    coarse: CoarseOperator,
    weight: float = 0.5,
    coarse_scale: float = 1.0,
) -> Vector:
    """x_i <- x_i + (1 - w) A_i^{-1} r_i + w s R_i R0^T x0; w = 1/2, s = 1 gives the additive two-level step."""
    fine = spd_solve(state.sub.factor, state.r)
    state.x_i[:] += (1.0 - weight) * fine + (weight * coarse_scale) * coarse.prolong(state.rank, state.x0)
    if state.x0_version > 0:
        state.corr_used += 1
        state.corrections += 1
        state.max_corr_seen = max(state.max_corr_seen, state.corr_used)
    return state.x_i


def reuse_scale(state: RankState) -> float:
    """Scale for the next use of the current x0 when reuse decays.

    Use m (from 0) of a coarse solution gets 2^-m, times the drop of the approximate norm since
    the snapshot it was computed from. The first use with no progress since the snapshot is the
    unscaled step.
    """
    if state.x0_version == 0:
        return 1.0
    theta = min(1.0, state.norm / state.norm_ref) if state.norm_ref > 0 else 1.0
    return theta * 0.5**state.corr_used


def final_residual_check(states: Sequence[RankState], problem: ProblemSet) -> float:
    """||b - Ax|| / ||b|| for x assembled from owned components."""
    x = problem.assemble([s.x for s in states])
    return norm2(problem.b - spmv(problem.a, x)) / problem.norm_b
