"""
3D Poisson model problem on the unit cube: -Δu = g, u = 0 on the boundary.

Discretized with the 7-point stencil on a uniform grid of interior nodes; node numbering is
lexicographic with x fastest: g = ix + nx * (iy + ny * iz).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sps
from pydantic import BaseModel, ConfigDict, Field

from app.sparse import CsrMatrix, Vector

# -Δu = g with a uniform source
DEFAULT_SOURCE = 4590.0


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    nx: int = Field(..., ge=1)
    ny: int = Field(..., ge=1)
    nz: int = Field(..., ge=1)
    g: float = DEFAULT_SOURCE

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def inv_h2(self) -> float:
        # h = 1 / (n + 1) on the longest axis, so 1/h^2 is an exact integer
        return float((max(self.shape) + 1) ** 2)

    @property
    def h(self) -> float:
        return 1.0 / (max(self.shape) + 1)

    def node_ids(self) -> np.ndarray:
        """Global node numbers laid out as [iz, iy, ix]."""
        return np.arange(self.n).reshape(self.nz, self.ny, self.nx)

    def coords(self, g: np.ndarray | int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = np.asarray(g)
        return g % self.nx, (g // self.nx) % self.ny, g // (self.nx * self.ny)

    @classmethod
    def parse(cls, text: str, g: float = DEFAULT_SOURCE) -> GridSpec:
        nx, ny, nz = parse_triple(text)
        return cls(nx=nx, ny=ny, nz=nz, g=g)


def parse_triple(text: str) -> tuple[int, int, int]:
    """'8x8x8' -> (8, 8, 8)."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"expected AxBxC, got {text!r}")
    a, b, c = (int(p) for p in parts)
    return a, b, c


def _second_difference(n: int) -> sps.csr_matrix:
    if n == 1:
        return sps.csr_matrix(np.array([[2.0]]))
    return sps.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def assemble_poisson(grid: GridSpec) -> tuple[CsrMatrix, Vector]:
    """7-point Laplacian (diagonal 6/h^2, axis neighbours -1/h^2, Dirichlet nodes eliminated) and b = g h^2."""
    ix, iy, iz = (sps.identity(n, format="csr") for n in grid.shape)
    tx, ty, tz = (_second_difference(n) for n in grid.shape)
    lap = (
        sps.kron(iz, sps.kron(iy, tx, format="csr"), format="csr")
        + sps.kron(iz, sps.kron(ty, ix, format="csr"), format="csr")
        + sps.kron(tz, sps.kron(iy, ix, format="csr"), format="csr")
    )
    a = CsrMatrix.from_scipy(grid.inv_h2 * lap)
    b = np.full(grid.n, grid.g / grid.inv_h2)
    return a, b
