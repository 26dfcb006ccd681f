"""
Everything a run needs, built once: global system, decomposition, subdomain operators, coarse space.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from app.logging_config import get_logger
from app.problem.coarse import CoarseOperator, build_coarse
from app.problem.decomposition import Decomposition, build_decomposition
from app.problem.grid import GridSpec, assemble_poisson
from app.problem.subdomain import SubdomainProblem, extract_subdomain
from app.sparse import CsrMatrix, Vector, norm2

logger = get_logger(__name__)


@dataclass(frozen=True)
class ProblemSet:
    grid: GridSpec
    a: CsrMatrix
    b: Vector
    norm_b: float
    dec: Decomposition
    subdomains: list[SubdomainProblem]
    coarse: CoarseOperator | None

    @property
    def p(self) -> int:
        return self.dec.p

    def local_n(self) -> float:
        """Mean owned unknowns per subdomain."""
        return self.grid.n / self.p

    def assemble(self, locals_: list[Vector]) -> Vector:
        """Global vector from the owned slots of per-subdomain vectors."""
        x = np.zeros(self.grid.n)
        for sub, xi in zip(self.subdomains, locals_):
            x[sub.global_indices[sub.owned_mask]] = xi[: sub.n_local][sub.owned_mask]
        return x


def build_problem_set(
    grid: GridSpec,
    proc_grid: tuple[int, int, int],
    overlap: int,
    with_coarse: bool = True,
) -> ProblemSet:
    t0 = time.perf_counter()
    a, b = assemble_poisson(grid)
    dec = build_decomposition(grid, proc_grid, overlap)
    subdomains = [extract_subdomain(a, b, dec, i) for i in range(dec.p)]
    coarse = build_coarse(a, dec) if with_coarse else None
    logger.info(
        "problem_built",
        extra={"p": dec.p, "duration_ms": round((time.perf_counter() - t0) * 1000, 2)},
    )
    return ProblemSet(
        grid=grid,
        a=a,
        b=b,
        norm_b=norm2(b),
        dec=dec,
        subdomains=subdomains,
        coarse=coarse,
    )


def weak_scaled_grid(local_shape: tuple[int, int, int], proc_grid: tuple[int, int, int]) -> GridSpec:
    """Grid keeping `local_shape` owned nodes per subdomain on `proc_grid`."""
    nx, ny, nz = (n * q for n, q in zip(local_shape, proc_grid))
    return GridSpec(nx=nx, ny=ny, nz=nz)
