"""
Compressed-row storage and the vector kernels built on it.

CsrMatrix wraps a canonical scipy CSR matrix (sorted columns, no duplicates) and keeps the raw
arrays visible. Vectors are plain 1-D float64 numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.sparse as sps

from app.errors import ContractViolation

Vector = npt.NDArray[np.float64]


def as_vector(values: Sequence[float] | npt.ArrayLike) -> Vector:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ContractViolation(f"expected a 1-D vector, got shape {v.shape}")
    return v


def _check_finite(v: Vector, op: str) -> Vector:
    if not np.all(np.isfinite(v)):
        raise ContractViolation(f"{op}: non-finite entries in result")
    return v


@dataclass(frozen=True)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: npt.NDArray[np.int64]
    col_idx: npt.NDArray[np.int64]
    values: npt.NDArray[np.float64]
    _csr: sps.csr_matrix = field(repr=False, compare=False)

    @classmethod
    def from_scipy(cls, mat: sps.spmatrix) -> CsrMatrix:
        csr = sps.csr_matrix(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        out = cls(
            n_rows=csr.shape[0],
            n_cols=csr.shape[1],
            row_ptr=csr.indptr.astype(np.int64),
            col_idx=csr.indices.astype(np.int64),
            values=csr.data,
            _csr=csr,
        )
        out.validate()
        return out

    @classmethod
    def from_coo(
        cls,
        rows: npt.ArrayLike,
        cols: npt.ArrayLike,
        vals: npt.ArrayLike,
        shape: tuple[int, int],
    ) -> CsrMatrix:
        """Assemble from triplets; repeated (row, col) pairs are summed."""
        coo = sps.coo_matrix((np.asarray(vals, dtype=np.float64), (np.asarray(rows), np.asarray(cols))), shape=shape)
        return cls.from_scipy(coo.tocsr())

    @classmethod
    def from_dense(cls, dense: npt.ArrayLike) -> CsrMatrix:
        return cls.from_scipy(sps.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> CsrMatrix:
        return cls.from_scipy(sps.csr_matrix((n_rows, n_cols), dtype=np.float64))

    def validate(self) -> None:
        if len(self.row_ptr) != self.n_rows + 1:
            raise ContractViolation("row_ptr must have n_rows + 1 entries")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.col_idx):
            raise ContractViolation("row_ptr must start at 0 and end at nnz")
        if len(self.values) != len(self.col_idx):
            raise ContractViolation("values and col_idx lengths differ")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ContractViolation("row_ptr must be non-decreasing")
        if len(self.col_idx) and (self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols):
            raise ContractViolation("column index out of range")
        # strictly increasing within rows <=> every in-row step is positive
        steps = np.diff(self.col_idx)
        row_starts = self.row_ptr[1:-1]
        in_row = np.ones(len(steps), dtype=bool)
        in_row[row_starts[(row_starts > 0) & (row_starts < len(self.col_idx))] - 1] = False
        if np.any(steps[in_row] <= 0):
            raise ContractViolation("column indices must be strictly increasing within each row")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sps.csr_matrix:
        return self._csr

    def to_dense(self) -> npt.NDArray[np.float64]:
        return self._csr.toarray()

    def transpose(self) -> CsrMatrix:
        return CsrMatrix.from_scipy(self._csr.T)

    def submatrix(self, rows: npt.ArrayLike, cols: npt.ArrayLike) -> CsrMatrix:
        """Rows and columns picked in the given order."""
        return CsrMatrix.from_scipy(self._csr[np.asarray(rows)][:, np.asarray(cols)])

    def is_symmetric(self, rtol: float = 0.0) -> bool:
        if self.n_rows != self.n_cols:
            return False
        diff = abs(self._csr - self._csr.T)
        if diff.nnz == 0:
            return True
        scale = abs(self._csr).max() if self.nnz else 0.0
        return bool(diff.max() <= rtol * scale)


def spmv(a: CsrMatrix, v: Vector) -> Vector:
    """a @ v; each row accumulated left to right over its stored columns."""
    if a.n_cols != len(v):
        raise ContractViolation(f"spmv: matrix has {a.n_cols} columns, vector has length {len(v)}")
    return _check_finite(a.to_scipy() @ v, "spmv")


def dot(u: Vector, v: Vector) -> float:
    if len(u) != len(v):
        raise ContractViolation(f"dot: lengths {len(u)} and {len(v)} differ")
    out = float(np.dot(u, v))
    if not math.isfinite(out):
        raise ContractViolation("dot: non-finite result")
    return out


def axpy(alpha: float, u: Vector, v: Vector) -> Vector:
    """alpha * u + v as a new vector."""
    if len(u) != len(v):
        raise ContractViolation(f"axpy: lengths {len(u)} and {len(v)} differ")
    return _check_finite(alpha * u + v, "axpy")


def norm2(v: Vector) -> float:
    return math.sqrt(dot(v, v))
