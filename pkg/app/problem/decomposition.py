"""
Overlapping box decomposition of the structured grid.

Each subdomain owns a contiguous box (near-equal slabs per axis, remainder to the lowest slabs);
its index set R_i is that box dilated by `overlap` layers and clipped. Ownership (B_i) stays with
the original box. Ghosts of subdomain i are the non-owned slots of its index set plus the
exterior nodes coupled to it by the 7-point stencil; each ghost is received from its owner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.errors import ConfigurationError
from app.logging_config import get_logger
from app.problem.grid import GridSpec

logger = get_logger(__name__)

IndexArray = npt.NDArray[np.int64]
Box = tuple[tuple[int, int], tuple[int, int], tuple[int, int]]  # half-open (lo, hi) per axis x, y, z


@dataclass(frozen=True)
class HaloLists:
    """Global indices exchanged with one neighbor. send: our owned nodes it needs; recv: its owned nodes we need."""

    send: IndexArray
    recv: IndexArray


@dataclass(frozen=True)
class Decomposition:
    grid: GridSpec
    proc_grid: tuple[int, int, int]
    overlap: int
    owned_boxes: list[Box]
    indices: list[IndexArray]
    owned: list[IndexArray]
    owner: IndexArray
    exterior: list[IndexArray]
    neighbors: list[tuple[int, ...]]
    halo_map: list[dict[int, HaloLists]]

    @property
    def p(self) -> int:
        return len(self.indices)


def slab_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    """Split range(n) into `parts` contiguous slabs; the first n % parts slabs get one extra node."""
    base, rem = divmod(n, parts)
    bounds = []
    lo = 0
    for s in range(parts):
        hi = lo + base + (1 if s < rem else 0)
        bounds.append((lo, hi))
        lo = hi
    return bounds


def subdomain_id(proc_grid: tuple[int, int, int], sx: int, sy: int, sz: int) -> int:
    px, py, _ = proc_grid
    return sx + px * (sy + py * sz)


def _box_nodes(ids: np.ndarray, box: Box) -> IndexArray:
    (x0, x1), (y0, y1), (z0, z1) = box
    return np.sort(ids[z0:z1, y0:y1, x0:x1].ravel()).astype(np.int64)


def _dilate(box: Box, layers: int, shape: tuple[int, int, int]) -> Box:
    return tuple((max(0, lo - layers), min(n, hi + layers)) for (lo, hi), n in zip(box, shape))  # type: ignore[return-value]


def _exterior_faces(ids: np.ndarray, box: Box, shape: tuple[int, int, int]) -> IndexArray:
    """Nodes outside `box` sharing a 7-point stencil edge with it."""
    faces = []
    for axis in range(3):
        lo, hi = box[axis]
        for coord in (lo - 1, hi):
            if 0 <= coord < shape[axis]:
                face = list(box)
                face[axis] = (coord, coord + 1)
                faces.append(_box_nodes(ids, tuple(face)))  # type: ignore[arg-type]
    if not faces:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(faces))


def build_decomposition(grid: GridSpec, proc_grid: tuple[int, int, int], overlap: int) -> Decomposition:
    px, py, pz = proc_grid
    if min(proc_grid) < 1:
        raise ConfigurationError(f"processor grid {proc_grid} must be positive on every axis")
    if overlap < 0:
        raise ConfigurationError(f"overlap must be >= 0, got {overlap}")
    for axis, (n, parts) in enumerate(zip(grid.shape, proc_grid)):
        if parts > n:
            raise ConfigurationError(
                f"processor grid {proc_grid} infeasible for grid {grid.shape}: axis {'xyz'[axis]} has {n} nodes for {parts} slabs"
            )

    ids = grid.node_ids()
    xs, ys, zs = (slab_bounds(n, parts) for n, parts in zip(grid.shape, proc_grid))
    p = px * py * pz
    owned_boxes: list[Box] = [None] * p  # type: ignore[list-item]
    for sz in range(pz):
        for sy in range(py):
            for sx in range(px):
                owned_boxes[subdomain_id(proc_grid, sx, sy, sz)] = (xs[sx], ys[sy], zs[sz])

    owner = np.full(grid.n, -1, dtype=np.int64)
    owned: list[IndexArray] = []
    indices: list[IndexArray] = []
    exterior: list[IndexArray] = []
    for i, box in enumerate(owned_boxes):
        nodes = _box_nodes(ids, box)
        owner[nodes] = i
        owned.append(nodes)
        ext_box = _dilate(box, overlap, grid.shape)
        indices.append(_box_nodes(ids, ext_box))
        exterior.append(_exterior_faces(ids, ext_box, grid.shape))

    # recv[i][j]: ghosts of i owned by j
    recv: list[dict[int, IndexArray]] = []
    for i in range(p):
        ghosts = np.concatenate([indices[i][owner[indices[i]] != i], exterior[i]])
        ghosts.sort()
        by_owner: dict[int, IndexArray] = {}
        for j in np.unique(owner[ghosts]):
            by_owner[int(j)] = ghosts[owner[ghosts] == j]
        recv.append(by_owner)

    empty = np.zeros(0, dtype=np.int64)
    neighbors: list[tuple[int, ...]] = []
    halo_map: list[dict[int, HaloLists]] = []
    for i in range(p):
        nbrs = set(recv[i]) | {j for j in range(p) if i in recv[j]}
        nbrs.discard(i)
        neighbors.append(tuple(sorted(nbrs)))
        halo_map.append(
            {j: HaloLists(send=recv[j].get(i, empty), recv=recv[i].get(j, empty)) for j in sorted(nbrs)}
        )

    dec = Decomposition(
        grid=grid,
        proc_grid=(px, py, pz),
        overlap=overlap,
        owned_boxes=owned_boxes,
        indices=indices,
        owned=owned,
        owner=owner,
        exterior=exterior,
        neighbors=neighbors,
        halo_map=halo_map,
    )
    logger.debug("decomposition_built", extra={"p": p})
    return dec


def verify_partition_of_unity(dec: Decomposition) -> bool:
    """Sum_i R_i^T B_i R_i = I: every node owned exactly once, by a subdomain that contains it."""
    n = dec.grid.n
    counts = np.zeros(n, dtype=np.int64)
    for i, nodes in enumerate(dec.owned):
        if len(nodes) and (nodes.min() < 0 or nodes.max() >= n):
            return False
        np.add.at(counts, nodes, 1)
        if not np.all(np.isin(nodes, dec.indices[i])):
            return False
        if not np.all(dec.owner[nodes] == i):
            return False
    return bool(np.all(counts == 1))
