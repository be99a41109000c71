"""
Operator Tests - Toeplitz-FFT body operator, pFFT near operator, compressed coupling and the hybrid system
"""
import sys
from pathlib import Path
import logging

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from dotenv import load_dotenv

from VSIE.errors import ArgumentError, AssemblyError, GeometryError
from VSIE.kernels.coupling import FAR_POLICY, coupling_fields, coupling_matrix
from VSIE.kernels.geometry import FAR, VoxelGrid, concatenate_meshes
from VSIE.kernels.surface import surface_pair_entries
from VSIE.kernels.vie_kernels import assemble_vie_kernels
from VSIE.operators.hybrid import SurfaceScaling, build_hybrid_system, surface_matrix, surface_scaling
from VSIE.operators.near_dense import DenseNearOperator
from VSIE.operators.pfft import PfftNearOperator, lagrange_weights, margin_violations
from VSIE.operators.toeplitz import ToeplitzFFTOperator, body_matrix
from VSIE.operators.tt_coupling import build_tt_coupling
from VSIE.scene.generators import loop_mesh, shell_mesh, sphere_phantom
from VSIE.solvers.dense_reference import active_voxels, assemble_dense_system

# Load environment variables
load_dotenv()

# Configure logging for tests
logging.basicConfig(level=logging.INFO)


def _random_vector(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _near_scene():
    """10^3 body with a 32-patch loop clear of the pFFT margins"""
    grid = sphere_phantom((10, 10, 10), 1.0, (0.0, 0.0, 0.0), (4.5, 4.5, 3.5), 2.5, 10.0 - 5.0j)
    loop = loop_mesh((4.5, 4.5, 6.7), 2.5, 0.3, 32)
    return grid, loop


def test_toeplitz_vacuum_is_identity():
    print("🔄 Testing Toeplitz operator on a vacuum grid...")
    grid = VoxelGrid.vacuum((4, 4, 4), 1.0)
    op = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, 0.3))
    j = _random_vector(op.n)
    np.testing.assert_allclose(op.apply(j), j, rtol=1e-14, atol=0)
    print("  ✅ Z_bb = I without contrast")


def test_toeplitz_matches_dense_body_matrix():
    """FFT apply agrees with the explicitly assembled body block"""
    print("🔄 Testing Toeplitz-FFT against the dense body matrix...")
    grid = sphere_phantom((6, 6, 6), 1.0, (0.0, 0.0, 0.0), (2.5, 2.5, 2.5), 2.6, 4.0 - 1.0j)
    kernels = assemble_vie_kernels(grid, 0.3)
    op = ToeplitzFFTOperator(grid, kernels)
    j = _random_vector(op.n, seed=1)
    dense = body_matrix(kernels, grid) @ j
    assert _rel(op.apply(j), dense) < 1e-10
    print("  ✅ relative difference below 1e-10")


def test_toeplitz_tucker_kernels():
    grid = sphere_phantom((8, 8, 8), 1.0, (0.0, 0.0, 0.0), (3.5, 3.5, 3.5), 3.0, 4.0 - 1.0j)
    kernels = assemble_vie_kernels(grid, 0.2)
    exact = ToeplitzFFTOperator(grid, kernels)
    compressed = ToeplitzFFTOperator(grid, kernels.compress(1e-5))
    j = _random_vector(exact.n, seed=2)
    assert _rel(compressed.apply(j), exact.apply(j)) < 1e-4


def test_toeplitz_rejects_bad_input():
    grid = VoxelGrid.vacuum((3, 3, 3), 1.0)
    op = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, 0.3))
    with pytest.raises(ArgumentError):
        op.apply(np.zeros(10))
    with pytest.raises(ArgumentError):
        ToeplitzFFTOperator(VoxelGrid.vacuum((4, 3, 3), 1.0), op.kernels)


def test_lagrange_weights_cardinal_and_exact():
    """Weights are one-hot on nodes and reproduce linear functions"""
    base, w = lagrange_weights(np.array([3.0, 7.0]))
    np.testing.assert_array_equal(base, [1, 5])
    np.testing.assert_allclose(w, np.tile([0.0, 0.0, 1.0, 0.0, 0.0], (2, 1)), atol=1e-15)

    x = np.array([2.3, 4.49, 5.51, 0.0])
    base, w = lagrange_weights(x)
    nodes = base[:, None] + np.arange(5)[None, :]
    np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=1e-13)
    np.testing.assert_allclose(np.sum(w * nodes, axis=1), x, rtol=1e-13)
    np.testing.assert_allclose(np.sum(w * nodes ** 4, axis=1), x ** 4, rtol=1e-10)
    with pytest.raises(ArgumentError):
        lagrange_weights(x, stencil=4)


def test_pfft_rejects_patches_at_the_boundary():
    grid = VoxelGrid.vacuum((8, 8, 8), 1.0)
    toeplitz = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, 0.2))
    edge = loop_mesh((3.5, 3.5, 6.6), 2.0, 0.3, 12)
    assert len(margin_violations(grid, edge)) > 0
    with pytest.raises(GeometryError):
        PfftNearOperator(edge, grid, 0.2, toeplitz)
    extended = PfftNearOperator(edge, grid, 0.2, toeplitz, extend=True)
    assert extended.stats['extended']
    assert extended.ext_dims[2] > grid.dims[2]


def test_pfft_projected_field_matches_point_dipole():
    """Grid-projected patch radiates like its centroid dipole away from the stencil"""
    print("📡 Testing pFFT projection at 10 voxels...")
    grid = VoxelGrid.vacuum((20, 9, 9), 1.0)
    toeplitz = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, 0.2))
    loop = loop_mesh((4.3, 4.2, 3.8), 0.4, 0.1, 4)
    op = PfftNearOperator(loop, grid, 0.2, toeplitz, precorrection_radius=0)
    voxels = np.array([[14, 4, 4], [15, 6, 2], [14, 1, 7]])
    for p in range(loop.m):
        patches = np.full(len(voxels), p)
        projected = op.grid_voxel_fields(voxels, patches)
        direct = coupling_fields(grid, loop, voxels, patches, 0.2, *FAR_POLICY)
        assert _rel(projected, direct) < 1e-2
    print("  ✅ within 1% of the direct field")


def test_pfft_zero_and_vacuum_body():
    grid = VoxelGrid.vacuum((10, 10, 10), 1.0)
    toeplitz = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, 0.2))
    op = PfftNearOperator(loop_mesh((4.5, 4.5, 5.0), 2.0, 0.3, 16), grid, 0.2, toeplitz)
    assert not np.any(op.apply(np.zeros(op.n, dtype=np.complex128)))

    x = np.concatenate([np.zeros(op.m), _random_vector(op.n_body, seed=3)])
    y = op.apply(x)
    np.testing.assert_allclose(y[op.m:], x[op.m:], rtol=1e-13)


def test_pfft_matches_dense_near_operator():
    """Precorrected FFT apply reproduces the directly assembled near row and body row"""
    print("📡 Testing pFFT against the dense near operator...")
    grid, loop = _near_scene()
    k0 = 0.2
    toeplitz = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, k0))
    pfft = PfftNearOperator(loop, grid, k0, toeplitz)
    dense = DenseNearOperator(loop, grid, k0, toeplitz)
    assert pfft.stats['precorrection_pairs_nn'] > 0
    assert pfft.stats['precorrection_pairs_nb'] > 0
    x = _random_vector(pfft.n, seed=4)
    assert _rel(pfft.apply(x), dense.apply(x)) < 1e-2
    x_n = x[:pfft.m]
    assert _rel(pfft.near_field_on_body(x_n), dense.near_field_on_body(x_n)) < 5e-2
    print("  ✅ pFFT within 1% of the dense near operator")


def test_pfft_precorrected_pairs_equal_direct_entries():
    """Grid interaction plus precorrection restores the direct entry on every near pair"""
    grid, loop = _near_scene()
    k0 = 0.2
    toeplitz = ToeplitzFFTOperator(grid, assemble_vie_kernels(grid, k0))
    op = PfftNearOperator(loop, grid, k0, toeplitz)
    rows, cols = op.corr_nn.nonzero()
    corrected = op.grid_patch_entries(rows, cols) + np.asarray(op.corr_nn[rows, cols]).ravel()
    direct = surface_pair_entries(loop, rows, loop, cols, k0)
    assert np.max(np.abs(corrected - direct)) <= 1e-12 * np.max(np.abs(direct))

    q = int(cols[0])
    x = np.zeros(op.n, dtype=np.complex128)
    x[q] = 1.0
    column = op.apply(x)[:op.m]
    near = rows[cols == q]
    assert _rel(column[near], surface_pair_entries(loop, near, loop, np.full(len(near), q), k0)) < 1e-10


def test_tt_coupling_matches_dense_coupling():
    """TT-compressed far coupling applied both ways"""
    print("✂️ Testing TT coupling on an 8^3 grid with a 64-patch shell...")
    grid = VoxelGrid.vacuum((8, 8, 8), 1.0)
    shell = shell_mesh((3.5, 3.5, 3.5), 30.0, 40.0, 4, 16, tag=FAR)
    k0 = 0.1
    tol = 1e-3
    op = build_tt_coupling(grid, shell, k0, tol=tol, seed=0)
    C = coupling_matrix(grid, shell, k0, policy=FAR_POLICY)
    x_f = _random_vector(shell.m, seed=5)
    y_b = _random_vector(3 * grid.n_v, seed=6)
    assert _rel(op.apply(x_f), C @ x_f) < 10 * tol
    assert _rel(op.apply_transpose(y_b), C.T @ y_b) < 10 * tol
    assert op.compression_factor() > 1
    assert 0 < op.evaluations
    print(f"  ✅ compression factor {float(op.compression_factor()):.1f}")


def test_tt_coupling_small_grid_reaches_full_bond_rank():
    """6^3 sphere and a 24-patch shell: bonds may need the full unfolding rank"""
    print("✂️ Testing TT coupling on a 6^3 grid with a 24-patch shell...")
    k0 = 0.1
    tol = 1e-3
    grid = sphere_phantom((6, 6, 6), 1.0, (0.0, 0.0, 0.0), (2.5, 2.5, 2.5), 2.2, 4.0 - 1.0j)
    far = shell_mesh((2.5, 2.5, 2.5), 30.0, 40.0, 3, 8, tag=FAR)
    op = build_tt_coupling(grid, far, k0, tol=tol, seed=0)
    assert all(r.converged for r in op.results)
    for tt in op.tensors:
        assert tt.ranks[0] <= 6 and tt.ranks[2] <= 24
    C = coupling_matrix(grid, far, k0, policy=FAR_POLICY)
    x_f = _random_vector(far.m, seed=12)
    assert _rel(op.apply(x_f), C @ x_f) < 10 * tol
    print(f"  ✅ ranks {[tt.ranks for tt in op.tensors]}")


def test_aca_coupling_mode():
    grid = VoxelGrid.vacuum((6, 6, 6), 1.0)
    shell = shell_mesh((2.5, 2.5, 2.5), 30.0, 40.0, 4, 16, tag=FAR)
    op = build_tt_coupling(grid, shell, 0.1, tol=1e-3, mode="aca")
    C = coupling_matrix(grid, shell, 0.1, policy=FAR_POLICY)
    x_f = _random_vector(shell.m, seed=7)
    assert _rel(op.apply(x_f), C @ x_f) < 1e-2
    with pytest.raises(ArgumentError):
        build_tt_coupling(grid, shell, 0.1, mode="svd")


def test_hybrid_without_far_surface_is_the_near_operator():
    grid, loop = _near_scene()
    far = concatenate_meshes([], FAR)
    system = build_hybrid_system(grid, far, loop, 0.2, tol_tucker=None)
    assert system.m_f == 0
    x = _random_vector(system.n, seed=8)
    np.testing.assert_allclose(system.apply(x), system.near_op.apply(x), rtol=1e-14)


def test_hybrid_matches_dense_assembly():
    """Compressed block operator against the fully assembled coupled matrix"""
    print("🔗 Testing hybrid operator against dense assembly...")
    k0 = 0.1
    grid = sphere_phantom((6, 6, 6), 1.0, (0.0, 0.0, 0.0), (2.5, 2.5, 2.5), 2.2, 4.0 - 1.0j)
    near = loop_mesh((2.5, 2.5, 6.5), 1.5, 0.3, 24)
    far = shell_mesh((2.5, 2.5, 2.5), 30.0, 40.0, 3, 8, tag=FAR)
    system = build_hybrid_system(grid, far, near, k0, tol_tucker=None, near_mode="dense")

    A, voxels = assemble_dense_system(grid, far, near, k0)
    m = far.m + near.m
    rows = (np.arange(3)[:, None] * grid.n_v + voxels[None, :]).reshape(-1)

    x_active = _random_vector(A.shape[0], seed=9)
    x = np.zeros(system.n, dtype=np.complex128)
    x[:m] = x_active[:m]
    x[m + rows] = x_active[m:]

    y = system.apply(x)
    expected = A @ x_active
    assert _rel(np.concatenate([y[:m], y[m + rows]]), expected) < 1e-2
    vacuum = np.setdiff1d(np.arange(3 * grid.n_v), rows)
    assert np.linalg.norm(y[m + vacuum]) <= 1e-12 * np.linalg.norm(y)
    assert system.stats['cf_fn'] is not None
    assert system.stats['entry_evals'] > 0
    print("  ✅ hybrid apply within 1% of the dense matrix")


def test_surface_scaling_inverts_the_surface_block():
    """Block normalisation maps surface unknowns through S^-1 and leaves body unknowns alone"""
    print("⚖️ Testing surface normalisation...")
    k0 = 0.1
    grid = sphere_phantom((6, 6, 6), 1.0, (0.0, 0.0, 0.0), (2.5, 2.5, 2.5), 2.2, 4.0 - 1.0j)
    near = loop_mesh((2.5, 2.5, 6.5), 1.5, 0.3, 24)
    far = shell_mesh((2.5, 2.5, 2.5), 30.0, 40.0, 3, 8, tag=FAR)
    system = build_hybrid_system(grid, far, near, k0, tol_tucker=None, near_mode="dense")
    assert system.stats['surface_scaling'] == "block"
    m = system.m_f + system.m_n

    S = surface_matrix(system.Z_ff, system.fn_block, near, k0)
    A, _ = assemble_dense_system(grid, far, near, k0)
    assert _rel(S, A[:m, :m]) < 1e-2

    y = _random_vector(system.n, seed=12)
    x = system.scaling(y)
    assert _rel(S @ x[:m], y[:m]) < 1e-10
    np.testing.assert_array_equal(x[m:], y[m:])

    diagonal = surface_scaling(S, "diagonal")
    np.testing.assert_allclose(diagonal(y)[:m] * np.diag(S), y[:m], rtol=1e-13)
    assert surface_scaling(S, "none") is None
    assert surface_scaling(np.zeros((0, 0)), "block") is None
    assert build_hybrid_system(grid, far, near, k0, tol_tucker=None, near_mode="dense",
                               scaling="none").scaling is None
    with pytest.raises(ArgumentError):
        surface_scaling(S, "jacobi")
    with pytest.raises(AssemblyError):
        SurfaceScaling(np.zeros((3, 3)), "block")
    with pytest.raises(AssemblyError):
        SurfaceScaling(np.zeros((3, 3)), "diagonal")
    print("  ✅ surface block normalised to the identity")


def test_hybrid_is_linear():
    k0 = 0.1
    grid = sphere_phantom((6, 6, 6), 1.0, (0.0, 0.0, 0.0), (2.5, 2.5, 2.5), 2.2, 4.0 - 1.0j)
    near = loop_mesh((2.5, 2.5, 6.5), 1.5, 0.3, 24)
    far = shell_mesh((2.5, 2.5, 2.5), 30.0, 40.0, 3, 8, tag=FAR)
    system = build_hybrid_system(grid, far, near, k0, near_mode="dense")
    x, z = _random_vector(system.n, seed=10), _random_vector(system.n, seed=11)
    a, b = 2.0 - 1.0j, 0.5j
    combined = system.apply(a * x + b * z)
    assert _rel(combined, a * system.apply(x) + b * system.apply(z)) < 1e-12
    assert active_voxels(grid).size == int(grid.mask.sum())


def run_all_tests():
    """Run all operator tests"""
    print("🧪 Running Operator Tests")
    print("=" * 50)
    tests = [fn for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for test in tests:
        test()
    print(f"\n🎉 All {len(tests)} operator tests passed!")


if __name__ == "__main__":
    run_all_tests()
