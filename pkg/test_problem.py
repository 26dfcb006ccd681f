from dataclasses import replace

import numpy as np
import pytest

from app.errors import ConfigurationError, ContractViolation
from app.problem import (
    GridSpec,
    aggregation_matrix,
    assemble_poisson,
    build_coarse,
    build_decomposition,
    build_problem_set,
    extract_subdomain,
    slab_bounds,
    verify_partition_of_unity,
    weak_scaled_grid,
)
from app.sparse import spmv
from app.verification import dense_coarse_matrix, partition_of_unity_matrix


def test_single_node_grid():
    a, b = assemble_poisson(GridSpec(nx=1, ny=1, nz=1))
    assert a.to_dense().tolist() == [[24.0]]
    assert b.tolist() == [1147.5]


def test_two_node_grid():
    a, b = assemble_poisson(GridSpec(nx=2, ny=1, nz=1))
    assert a.to_dense().tolist() == [[54.0, -9.0], [-9.0, 54.0]]
    assert b.tolist() == [510.0, 510.0]


@pytest.mark.parametrize("shape", [(3, 3, 3), (4, 2, 5), (6, 6, 6)])
def test_stencil_is_symmetric_with_seven_points(shape):
    grid = GridSpec(nx=shape[0], ny=shape[1], nz=shape[2])
    a, _ = assemble_poisson(grid)
    assert a.is_symmetric()
    row_nnz = np.diff(a.row_ptr)
    assert row_nnz.max() <= 7
    assert np.all(a.to_dense().diagonal() == 6 * grid.inv_h2)


def test_grid_parse_and_lexicographic_numbering():
    grid = GridSpec.parse("4x3x2")
    assert grid.shape == (4, 3, 2)
    ix, iy, iz = grid.coords(np.array([0, 5, 13]))
    assert ix.tolist() == [0, 1, 1]
    assert iy.tolist() == [0, 1, 0]
    assert iz.tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        GridSpec.parse("4x3")


def test_slab_bounds_remainder_goes_low():
    assert slab_bounds(7, 3) == [(0, 3), (3, 5), (5, 7)]
    assert slab_bounds(4, 4) == [(0, 1), (1, 2), (2, 3), (3, 4)]


def test_single_subdomain_covers_everything():
    dec = build_decomposition(GridSpec(nx=3, ny=3, nz=3), (1, 1, 1), 2)
    assert dec.indices[0].tolist() == list(range(27))
    assert np.all(dec.owner == 0)
    assert dec.neighbors[0] == ()
    assert len(dec.exterior[0]) == 0


def test_chain_decomposition():
    dec = build_decomposition(GridSpec(nx=4, ny=1, nz=1), (2, 1, 1), 1)
    assert dec.indices[0].tolist() == [0, 1, 2]
    assert dec.indices[1].tolist() == [1, 2, 3]
    assert dec.owned[0].tolist() == [0, 1]
    assert dec.owned[1].tolist() == [2, 3]
    assert dec.neighbors == [(1,), (0,)]
    assert dec.exterior[0].tolist() == [3]
    assert dec.exterior[1].tolist() == [0]
    # ghosts of 0: slot 2 (in overlap) and exterior node 3, both owned by 1
    assert dec.halo_map[0][1].recv.tolist() == [2, 3]
    assert dec.halo_map[1][0].send.tolist() == [2, 3]


def test_halo_lists_are_symmetric_and_contain_overlap(cube6_p8):
    dec = cube6_p8.dec
    for i in range(dec.p):
        for j, lists in dec.halo_map[i].items():
            assert i in dec.neighbors[j]
            np.testing.assert_array_equal(lists.send, dec.halo_map[j][i].recv)
            overlap = np.intersect1d(dec.indices[i], dec.owned[j])
            assert np.all(np.isin(overlap, lists.recv))
            assert np.all(dec.owner[lists.recv] == j)


@pytest.mark.parametrize("proc", [(1, 1, 1), (2, 1, 1), (2, 2, 2), (3, 3, 3), (4, 4, 4)])
@pytest.mark.parametrize("overlap", [1, 2, 3])
def test_partition_of_unity(proc, overlap):
    dec = build_decomposition(GridSpec(nx=8, ny=8, nz=8), proc, overlap)
    assert verify_partition_of_unity(dec)


def test_partition_of_unity_dense_identity():
    dec = build_decomposition(GridSpec(nx=5, ny=4, nz=3), (2, 2, 1), 2)
    np.testing.assert_array_equal(partition_of_unity_matrix(dec), np.eye(60))


def test_partition_of_unity_detects_corruption():
    dec = build_decomposition(GridSpec(nx=4, ny=1, nz=1), (2, 1, 1), 1)
    twice = replace(dec, owned=[np.array([0, 1, 2]), np.array([2, 3])])
    assert not verify_partition_of_unity(twice)
    missing = replace(dec, owned=[np.array([0]), np.array([2, 3])])
    assert not verify_partition_of_unity(missing)


def test_infeasible_decompositions():
    grid = GridSpec(nx=2, ny=2, nz=2)
    with pytest.raises(ConfigurationError):
        build_decomposition(grid, (3, 1, 1), 1)
    with pytest.raises(ConfigurationError):
        build_decomposition(grid, (0, 1, 1), 1)
    with pytest.raises(ConfigurationError):
        build_decomposition(grid, (1, 1, 1), -1)


def test_extract_single_subdomain_is_global_system(cube4_p1):
    sub = cube4_p1.subdomains[0]
    np.testing.assert_array_equal(sub.a_local.to_dense(), cube4_p1.a.to_dense())
    assert sub.coupling.shape == (64, 0)
    np.testing.assert_array_equal(sub.b_local, cube4_p1.b)
    assert sub.halo_layout == [] and sub.send_layout == []


def test_extract_chain_subdomain(chain4):
    a, b = chain4.a, chain4.b
    dense = a.to_dense()
    sub = chain4.subdomains[0]
    np.testing.assert_array_equal(sub.a_local.to_dense(), dense[np.ix_([0, 1, 2], [0, 1, 2])])
    assert sub.a_local.to_dense()[0].tolist() == [150.0, -25.0, 0.0]
    coupling = sub.coupling.to_dense()
    assert coupling.shape == (3, 1)
    assert coupling[:, 0].tolist() == [0.0, 0.0, -25.0]
    np.testing.assert_array_equal(sub.b_local, b[:3])
    assert sub.owned_mask.tolist() == [True, True, False]


def test_row_sum_identity(cube6_p8):
    ones_global = cube6_p8.a.to_scipy() @ np.ones(cube6_p8.grid.n)
    for sub in cube6_p8.subdomains:
        local = sub.a_local.to_scipy() @ np.ones(sub.n_local) + sub.coupling.to_scipy() @ np.ones(sub.n_halo)
        np.testing.assert_allclose(local, ones_global[sub.global_indices], rtol=0, atol=1e-9)


def test_extract_rejects_bad_id(chain4):
    with pytest.raises(ContractViolation):
        extract_subdomain(chain4.a, chain4.b, chain4.dec, 2)


def test_coarse_single_subdomain():
    problem = build_problem_set(GridSpec(nx=2, ny=1, nz=1), (1, 1, 1), 1)
    assert problem.coarse.a0.to_dense().tolist() == [[90.0]]


def test_coarse_chain_galerkin(chain4):
    r0 = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
    np.testing.assert_array_equal(aggregation_matrix(chain4.dec).toarray(), r0)
    expected = r0 @ chain4.a.to_dense() @ r0.T
    np.testing.assert_array_equal(chain4.coarse.a0.to_dense(), expected)


@pytest.mark.parametrize("proc", [(2, 1, 1), (2, 2, 2), (3, 3, 3)])
def test_coarse_matches_dense_galerkin(proc):
    grid = GridSpec(nx=6, ny=6, nz=6)
    a, _ = assemble_poisson(grid)
    dec = build_decomposition(grid, proc, 2)
    coarse = build_coarse(a, dec)
    np.testing.assert_allclose(coarse.a0.to_dense(), dense_coarse_matrix(a, dec), rtol=0, atol=1e-9)


def test_prolong_map_marks_owned_slots(cube6_p8):
    coarse = cube6_p8.coarse
    for sub in cube6_p8.subdomains:
        assert np.all(coarse.prolong_map[sub.rank][sub.owned_slots] == sub.rank)
        np.testing.assert_array_equal(coarse.restrict_slots[sub.rank], sub.owned_slots)


def test_weak_scaled_grid():
    assert weak_scaled_grid((10, 10, 10), (2, 2, 2)).shape == (20, 20, 20)
    assert weak_scaled_grid((10, 10, 10), (3, 3, 3)).shape == (30, 30, 30)
    assert weak_scaled_grid((10, 10, 10), (4, 4, 4)).shape == (40, 40, 40)


def test_problem_set_assemble_uses_owned_slots(chain4):
    locals_ = [np.array([1.0, 2.0, 99.0, 99.0]), np.array([99.0, 3.0, 4.0, 99.0])]
    assert chain4.assemble(locals_).tolist() == [1.0, 2.0, 3.0, 4.0]


@pytest.mark.parametrize("shape", [(3, 3, 3), (6, 6, 6)])
def test_stencil_stores_no_explicit_zeros(shape):
    a, _ = assemble_poisson(GridSpec(nx=shape[0], ny=shape[1], nz=shape[2]))
    row_nnz = np.diff(a.row_ptr)
    assert np.all(a.values != 0.0)
    # corner nodes keep three neighbours, interior nodes all six
    assert row_nnz.min() == 4
    assert row_nnz.max() == 7


@pytest.mark.parametrize("overlap", [0, 1, 2])
def test_local_and_coupling_reproduce_global_rows(overlap):
    problem = build_problem_set(GridSpec(nx=6, ny=5, nz=4), (2, 2, 1), overlap, with_coarse=False)
    x = np.random.default_rng(overlap).standard_normal(problem.grid.n)
    ax = spmv(problem.a, x)
    for sub in problem.subdomains:
        local = spmv(sub.a_local, x[sub.global_indices]) + spmv(sub.coupling, x[sub.halo_indices])
        owned = sub.owned_slots
        np.testing.assert_allclose(local[owned], ax[sub.global_indices[owned]], rtol=1e-13, atol=1e-10)


@pytest.mark.parametrize("proc", [(2, 1, 1), (2, 2, 2), (3, 3, 3)])
def test_coarse_equals_dense_oracle_exactly(proc):
    grid = GridSpec(nx=8, ny=8, nz=8)
    a, _ = assemble_poisson(grid)
    dec = build_decomposition(grid, proc, 2)
    np.testing.assert_array_equal(build_coarse(a, dec).a0.to_dense(), dense_coarse_matrix(a, dec))


@pytest.mark.parametrize("overlap", [0, 1, 2])
def test_receive_lists_cover_overlap_and_exterior_ghosts(overlap):
    dec = build_decomposition(GridSpec(nx=6, ny=5, nz=4), (2, 2, 1), overlap)
    for i in range(dec.p):
        reachable = np.union1d(dec.indices[i], dec.exterior[i])
        for j in range(dec.p):
            expected = np.intersect1d(reachable, dec.owned[j]) if j != i else np.zeros(0, dtype=np.int64)
            lists = dec.halo_map[i].get(j)
            got = lists.recv if lists is not None else np.zeros(0, dtype=np.int64)
            np.testing.assert_array_equal(got, expected)
