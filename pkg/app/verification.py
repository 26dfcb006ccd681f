"""
Dense reference operators and instrumented checks for small problems.

Everything here builds explicit matrices from the definitions (restrictions, masks, local
inverses), independently of the distributed code paths it is used to check.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

import numpy as np
import numpy.typing as npt

from app.problem import ProblemSet, aggregation_matrix
from app.problem.decomposition import Decomposition
from app.sparse import CsrMatrix

if TYPE_CHECKING:
    from app.solvers.state import RankState

Dense = npt.NDArray[np.float64]


def restriction(indices: npt.NDArray[np.int64], n: int) -> Dense:
    r = np.zeros((len(indices), n))
    r[np.arange(len(indices)), indices] = 1.0
    return r


def dense_ras_operator(a: CsrMatrix, dec: Decomposition) -> Dense:
    """M = sum_i R_i^T B_i A_i^{-1} R_i."""
    dense = a.to_dense()
    n = dense.shape[0]
    m = np.zeros((n, n))
    for i, idx in enumerate(dec.indices):
        r_i = restriction(idx, n)
        b_i = np.diag((dec.owner[idx] == i).astype(np.float64))
        a_i = r_i @ dense @ r_i.T
        m += r_i.T @ b_i @ np.linalg.inv(a_i) @ r_i
    return m


def dense_coarse_matrix(a: CsrMatrix, dec: Decomposition) -> Dense:
    """A0 = R0 A R0^T with R0 the dense aggregation matrix."""
    r0 = aggregation_matrix(dec).toarray()
    return r0 @ a.to_dense() @ r0.T


def dense_two_level_operator(a: CsrMatrix, dec: Decomposition, weight: float = 0.5) -> Dense:
    """(1 - w) M + w R0^T A0^{-1} R0."""
    r0 = aggregation_matrix(dec).toarray()
    a0 = dense_coarse_matrix(a, dec)
    coarse = r0.T @ np.linalg.inv(a0) @ r0
    return (1.0 - weight) * dense_ras_operator(a, dec) + weight * coarse


def richardson(a: CsrMatrix, b: Dense, m: Dense, sweeps: int, x0: Dense | None = None) -> list[Dense]:
    """[x^1, ..., x^sweeps] for x^{k+1} = x^k + M (b - A x^k)."""
    dense = a.to_dense()
    x = np.zeros(len(b)) if x0 is None else np.array(x0, dtype=np.float64)
    out = []
    for _ in range(sweeps):
        x = x + m @ (b - dense @ x)
        out.append(x.copy())
    return out


def partition_of_unity_matrix(dec: Decomposition) -> Dense:
    """sum_i R_i^T B_i R_i as a dense matrix (the identity for a valid decomposition)."""
    n = dec.grid.n
    total = np.zeros((n, n))
    for i, idx in enumerate(dec.indices):
        r_i = restriction(idx, n)
        total += r_i.T @ np.diag((dec.owner[idx] == i).astype(np.float64)) @ r_i
    return total


def snapshot_consistency(problem: ProblemSet, states: Sequence[RankState]) -> tuple[float, int]:
    """Max over snapshot rounds completed on every rank of ||rbar - (b - A xbar)|| / ||b||.

    Returns (error, rounds checked); error is 0.0 when no round completed everywhere.
    """
    rounds = min((len(s.snapshots) for s in states), default=0)
    worst = 0.0
    a = problem.a.to_scipy()
    for m in range(rounds):
        xbar = np.zeros(problem.grid.n)
        rbar = np.zeros(problem.grid.n)
        for s in states:
            rec = s.snapshots[m]
            nodes = s.sub.global_indices[s.sub.owned_slots]
            xbar[nodes] = rec.xbar_owned
            rbar[nodes] = rec.rbar_owned
        exact = problem.b - a @ xbar
        worst = max(worst, float(np.linalg.norm(rbar - exact)) / problem.norm_b)
    return worst, rounds
