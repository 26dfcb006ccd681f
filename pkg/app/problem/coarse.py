"""
Aggregation coarse space: one coarse unknown per subdomain, R0[j, g] = 1 iff subdomain j owns g.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.sparse as sps

from app.problem.decomposition import Decomposition
from app.sparse import CsrMatrix, SpdFactor, Vector, spd_factor, spd_solve


@dataclass(frozen=True)
class CoarseOperator:
    p: int
    a0: CsrMatrix
    a0_factor: SpdFactor
    # restrict_slots[i]: owned local slots of subdomain i (R0 R_i^T B_i collapses them to one scalar)
    restrict_slots: list[npt.NDArray[np.int64]]
    # prolong_map[i][s]: owner of local slot s of subdomain i (R_i R0^T)
    prolong_map: list[npt.NDArray[np.int64]]

    def restrict(self, i: int, r_local: Vector) -> float:
        """Entry i of R0 R_i^T B_i r_i; every other entry is zero."""
        return float(np.sum(r_local[self.restrict_slots[i]]))

    def prolong(self, i: int, x0: Vector) -> Vector:
        return x0[self.prolong_map[i]]

    def solve(self, r0: Vector) -> Vector:
        return spd_solve(self.a0_factor, r0)


def aggregation_matrix(dec: Decomposition) -> sps.csr_matrix:
    n = dec.grid.n
    return sps.csr_matrix((np.ones(n), (dec.owner, np.arange(n))), shape=(dec.p, n))


def build_coarse(a: CsrMatrix, dec: Decomposition) -> CoarseOperator:
    r0 = aggregation_matrix(dec)
    a0 = CsrMatrix.from_scipy(r0 @ a.to_scipy() @ r0.T)
    factor = spd_factor(a0)
    restrict_slots = [np.flatnonzero(dec.owner[idx] == i) for i, idx in enumerate(dec.indices)]
    prolong_map = [dec.owner[idx].copy() for idx in dec.indices]
    return CoarseOperator(
        p=dec.p,
        a0=a0,
        a0_factor=factor,
        restrict_slots=restrict_slots,
        prolong_map=prolong_map,
    )
