"""
Per-subdomain operators extracted from the global system.

Local vectors use an extended layout: slots [0, n_local) hold R_i x in global order, slots
[n_local, n_local + n_halo) hold the exterior nodes x_¬i coupled through C_i = R_i A R_¬i^T.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from app.errors import ContractViolation
from app.problem.decomposition import Decomposition, IndexArray
from app.sparse import CsrMatrix, SpdFactor, Vector, spd_factor


@dataclass(frozen=True)
class SubdomainProblem:
    rank: int
    global_indices: IndexArray
    halo_indices: IndexArray
    a_local: CsrMatrix
    coupling: CsrMatrix
    b_local: Vector
    owned_mask: npt.NDArray[np.bool_]
    factor: SpdFactor
    # (neighbor, extended slots written by that neighbor's messages)
    halo_layout: list[tuple[int, npt.NDArray[np.int64]]]
    # (neighbor, local slots sent to that neighbor)
    send_layout: list[tuple[int, npt.NDArray[np.int64]]]

    @property
    def n_local(self) -> int:
        return len(self.global_indices)

    @property
    def n_halo(self) -> int:
        return len(self.halo_indices)

    @property
    def owned_slots(self) -> npt.NDArray[np.int64]:
        return np.flatnonzero(self.owned_mask)

    def slots_of(self, nodes: IndexArray) -> npt.NDArray[np.int64]:
        """Extended-layout slots of global nodes held by this subdomain."""
        in_local = np.isin(nodes, self.global_indices)
        local = np.searchsorted(self.global_indices, nodes)
        halo = self.n_local + np.searchsorted(self.halo_indices, nodes)
        check = np.concatenate([self.global_indices, self.halo_indices])
        slots = np.minimum(np.where(in_local, local, halo), max(len(check) - 1, 0))
        if len(nodes) and not np.array_equal(check[slots], nodes):
            raise ContractViolation(f"subdomain {self.rank} does not hold every requested node")
        return slots.astype(np.int64)


def extract_subdomain(a: CsrMatrix, b: Vector, dec: Decomposition, i: int) -> SubdomainProblem:
    if not 0 <= i < dec.p:
        raise ContractViolation(f"subdomain id {i} out of range [0, {dec.p})")
    if a.n_rows != dec.grid.n or len(b) != dec.grid.n:
        raise ContractViolation("decomposition does not match the system size")

    rows = dec.indices[i]
    ext = dec.exterior[i]
    a_local = a.submatrix(rows, rows)
    coupling = a.submatrix(rows, ext)
    # every coefficient of the local rows must land in A_i or C_i
    row_block = a.to_scipy()[rows]
    if row_block.count_nonzero() != a_local.to_scipy().count_nonzero() + coupling.to_scipy().count_nonzero():
        raise ContractViolation(f"subdomain {i}: rows couple to nodes outside the index set and its exterior")

    owned_mask = dec.owner[rows] == i
    factor = spd_factor(a_local)

    partial = SubdomainProblem(
        rank=i,
        global_indices=rows,
        halo_indices=ext,
        a_local=a_local,
        coupling=coupling,
        b_local=np.array(b[rows], dtype=np.float64),
        owned_mask=owned_mask,
        factor=factor,
        halo_layout=[],
        send_layout=[],
    )
    halo_layout = []
    send_layout = []
    for j, lists in dec.halo_map[i].items():
        if len(lists.recv):
            halo_layout.append((j, partial.slots_of(lists.recv)))
        if len(lists.send):
            send_layout.append((j, partial.slots_of(lists.send)))
    return replace(partial, halo_layout=halo_layout, send_layout=send_layout)
