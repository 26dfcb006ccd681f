"""
Banded (envelope) Cholesky factorization for the subdomain and coarse solves.

The structured-grid matrices are banded under natural ordering, so no fill-reducing permutation
is applied: the lower band is packed in LAPACK layout ``ab[k, j] = A[j + k, j]`` and factored
in place with dpbtrf; solves go through dpbtrs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.linalg import lapack

from app.errors import ContractViolation, NotSpdError
from app.sparse.csr import CsrMatrix, Vector, _check_finite


@dataclass(frozen=True)
class SpdFactor:
    n: int
    bandwidth: int
    band: npt.NDArray[np.float64]  # (bandwidth + 1, n), lower factor L in LAPACK band layout

    def lower(self) -> npt.NDArray[np.float64]:
        """Dense lower-triangular factor L."""
        out = np.zeros((self.n, self.n))
        for k in range(self.bandwidth + 1):
            j = np.arange(self.n - k)
            out[j + k, j] = self.band[k, : self.n - k]
        return out

    def reconstruct(self) -> npt.NDArray[np.float64]:
        low = self.lower()
        return low @ low.T


def _lower_bandwidth(a: CsrMatrix) -> int:
    if a.nnz == 0:
        return 0
    rows = np.repeat(np.arange(a.n_rows), np.diff(a.row_ptr))
    return int(max(0, np.max(rows - a.col_idx)))


def spd_factor(a: CsrMatrix) -> SpdFactor:
    if a.n_rows != a.n_cols:
        raise ContractViolation(f"spd_factor: matrix is {a.n_rows}x{a.n_cols}, expected square")
    if not a.is_symmetric(rtol=1e-12):
        raise ContractViolation("spd_factor: matrix is not symmetric")
    n = a.n_rows
    kd = _lower_bandwidth(a)
    ab = np.zeros((kd + 1, n))
    rows = np.repeat(np.arange(n), np.diff(a.row_ptr))
    lower = rows >= a.col_idx
    ab[rows[lower] - a.col_idx[lower], a.col_idx[lower]] = a.values[lower]
    if n == 0:
        return SpdFactor(n=0, bandwidth=0, band=ab)

    c, info = lapack.dpbtrf(ab, lower=1)
    if info > 0:
        # leading minor of order `info` is not positive definite
        raise NotSpdError(row=int(info) - 1)
    if info < 0:
        raise ContractViolation(f"dpbtrf: illegal argument {-info}")
    return SpdFactor(n=n, bandwidth=kd, band=c)


def spd_solve(factor: SpdFactor, rhs: Vector) -> Vector:
    if factor.n != len(rhs):
        raise ContractViolation(f"spd_solve: factor order {factor.n}, rhs length {len(rhs)}")
    if factor.n == 0:
        return np.zeros(0)
    x, info = lapack.dpbtrs(factor.band, rhs, lower=1)
    if info != 0:
        raise ContractViolation(f"dpbtrs: illegal argument {-info}")
    return _check_finite(np.asarray(x, dtype=np.float64), "spd_solve")
