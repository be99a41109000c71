"""
Tensor Kit Tests - unfolding, TT-SVD, TT-cross, Tucker, ACA and TT matvecs
"""
import sys
from fractions import Fraction
from pathlib import Path
import logging

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from dotenv import load_dotenv

from VSIE.errors import ArgumentError
from VSIE.tensors.aca import ZERO_ROW_LIMIT
from VSIE.tensors import (DenseTensor, TTTensor, aca, fold, sampled_error, tt_apply,
                          tt_apply_transpose, tt_cross, tt_round, tt_svd, tucker_hosvd, unfold)

# Load environment variables
load_dotenv()

# Configure logging for tests
logging.basicConfig(level=logging.INFO)


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _random_tt(rng, dims, rank):
    ranks = [1] + [rank] * (len(dims) - 1) + [1]
    return TTTensor(tuple(_random_complex(rng, (ranks[k], n, ranks[k + 1])) for k, n in enumerate(dims)))


def _relative_error(approx, exact):
    return np.linalg.norm(approx - exact) / np.linalg.norm(exact)


def test_unfold_matrix_is_identity():
    """Mode-1 unfolding of a matrix is the matrix itself"""
    print("🔄 Testing unfold on a 2x2 matrix...")
    t = DenseTensor(np.array([[1, 2], [3, 4]]))
    np.testing.assert_array_equal(unfold(t, 1), np.array([[1, 2], [3, 4]]))
    print("  ✅ unfold(t, 1) == t")


def test_unfold_zero_tensor_shape():
    zeros = DenseTensor(np.zeros((3, 4, 5)))
    mat = unfold(zeros, 2)
    assert mat.shape == (4, 15)
    assert not np.any(mat)


def test_fold_inverts_unfold():
    rng = np.random.default_rng(0)
    t = DenseTensor(_random_complex(rng, (2, 3, 4)))
    for mode in (1, 2, 3):
        np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.dims).data, t.data)


def test_unfold_rejects_bad_mode():
    t = DenseTensor(np.ones((2, 2)))
    with pytest.raises(ArgumentError):
        unfold(t, 3)
    with pytest.raises(ArgumentError):
        unfold(t, 0)


def test_from_flat_is_column_major():
    t = DenseTensor.from_flat((2, 3), np.arange(6))
    assert t.data[1, 0] == 1
    assert t.data[0, 1] == 2
    with pytest.raises(ArgumentError):
        DenseTensor.from_flat((2, 2), np.arange(6))


def test_tt_svd_rank_one():
    """Separable tensor compresses to ranks 1"""
    print("🧮 Testing TT-SVD on a rank-1 tensor...")
    rng = np.random.default_rng(1)
    a, b, c, d = (_random_complex(rng, n) for n in (4, 5, 6, 7))
    full = np.einsum("i,j,k,l->ijkl", a, b, c, d)
    tt = tt_svd(DenseTensor(full), 1e-10)
    assert tt.ranks == (1, 1, 1)
    assert _relative_error(tt.full().data, full) < 1e-13
    print(f"  ✅ ranks {tt.ranks}")


def test_tt_svd_zero_tensor():
    tt = tt_svd(DenseTensor(np.zeros((3, 4, 5))), 1e-6)
    assert tt.ranks == (1, 1)
    assert all(not np.any(core) for core in tt.cores)


def test_tt_svd_hilbert_tensor():
    """Hilbert-type tensor meets tolerance with ranks bounded by the unfolding ranks"""
    print("🧮 Testing TT-SVD on a 10^4 Hilbert tensor...")
    idx = np.indices((10, 10, 10, 10)) + 1
    full = 1.0 / (idx.sum(axis=0) - 3.0)
    tol = 1e-6
    tt = tt_svd(DenseTensor(full), tol)
    assert _relative_error(tt.full().data, full) <= tol
    flat = full.reshape(-1, order="F")
    for k, r in enumerate(tt.ranks, start=1):
        unfolding = flat.reshape(10 ** k, -1, order="F")
        assert r <= np.linalg.matrix_rank(unfolding)
    print(f"  ✅ ranks {tt.ranks}, max rank {tt.max_rank()}")


def test_tt_compression_factor_is_exact():
    rng = np.random.default_rng(2)
    tt = _random_tt(rng, (4, 5, 6), 2)
    assert tt.compression_factor() == Fraction(4 * 5 * 6, 4 * 2 + 2 * 5 * 2 + 2 * 6)


def test_tt_elements_match_full():
    rng = np.random.default_rng(3)
    tt = _random_tt(rng, (3, 4, 5), 3)
    full = tt.full().data
    indices = np.array([[0, 0, 0], [2, 3, 4], [1, 2, 3]])
    np.testing.assert_allclose(tt.elements(indices), full[tuple(indices.T)], rtol=1e-12)
    assert tt.element((2, 1, 0)) == pytest.approx(full[2, 1, 0], rel=1e-12)


def test_tt_elements_match_full_on_random_indices():
    """Core contraction at 100 random multi-indices equals the assembled tensor"""
    rng = np.random.default_rng(15)
    dims = (5, 6, 7, 8)
    tt = _random_tt(rng, dims, 3)
    full = tt.full().data
    indices = rng.integers(0, dims, size=(100, 4))
    values = tt.elements(indices)
    expected = full[tuple(indices.T)]
    assert np.max(np.abs(values - expected)) <= 1e-13 * np.max(np.abs(full))


def test_tt_round_keeps_accuracy():
    rng = np.random.default_rng(4)
    tt = _random_tt(rng, (5, 6, 7, 8), 4)
    tol = 1e-8
    rounded = tt_round(tt, tol)
    assert all(r1 <= r0 for r0, r1 in zip(tt.ranks, rounded.ranks))
    assert _relative_error(rounded.full().data, tt.full().data) <= 10 * tol


def test_tt_round_removes_redundant_rank():
    """A rank-1 tensor padded to rank 3 rounds back to rank 1"""
    rng = np.random.default_rng(5)
    vecs = [_random_complex(rng, n) for n in (4, 5, 6)]
    cores = (
        np.repeat(vecs[0][None, :, None], 3, axis=2),
        np.tile(np.eye(3)[:, None, :], (1, 5, 1)) * vecs[1][None, :, None],
        np.repeat(vecs[2][None, :, None], 3, axis=0) / 3.0,
    )
    padded = TTTensor(cores)
    assert padded.ranks == (3, 3)
    rounded = tt_round(padded, 1e-10)
    assert rounded.ranks == (1, 1)
    expected = np.einsum("i,j,k->ijk", *vecs)
    assert _relative_error(rounded.full().data, expected) < 1e-10


def test_tt_cross_constant():
    """Constant entry function needs rank 1 and few evaluations"""
    print("✂️ Testing TT-cross on a constant tensor...")

    def entry(indices):
        return np.full(len(indices), 2.5 - 1.0j)

    result = tt_cross(entry, (8, 8, 8, 8), tol=1e-3, seed=0)
    assert result.tt.ranks == (1, 1, 1)
    assert result.converged
    assert result.evaluations < 8 ** 4
    print(f"  ✅ {result.evaluations} evaluations for 4096 entries")


def test_tt_cross_separable():
    rng = np.random.default_rng(6)
    factors = [_random_complex(rng, 6) + 3.0 for _ in range(4)]

    def entry(indices):
        out = np.ones(len(indices), dtype=np.complex128)
        for k, f in enumerate(factors):
            out *= f[indices[:, k]]
        return out

    result = tt_cross(entry, (6, 6, 6, 6), tol=1e-6, seed=1)
    assert result.tt.ranks == (1, 1, 1)
    full = np.einsum("i,j,k,l->ijkl", *factors)
    assert _relative_error(result.tt.full().data, full) < 1e-10
    assert result.validation_evaluations == 1000


def test_tt_cross_smooth_function():
    """Function of exact TT rank 3 is recovered on fresh samples"""
    dims = (10, 10, 10, 10)

    def entry(indices):
        x = indices / 9.0
        return np.sin(x.sum(axis=1)) + 0.5j * np.cos(x[:, 0] - x[:, 3])

    result = tt_cross(entry, dims, tol=1e-6, seed=2, max_sweeps=6)
    rng = np.random.default_rng(99)
    fresh = rng.integers(0, 10, size=(500, 4))
    assert _relative_error(result.tt.elements(fresh), entry(fresh)) < 1e-2
    assert result.converged
    assert result.rank_history


def test_tt_cross_hilbert_tensor():
    """1/(i1+i2+i3+i4+1) at tol 1e-3 within the default bond caps"""
    print("✂️ Testing TT-cross on a 10^4 Hilbert tensor...")
    dims = (10, 10, 10, 10)
    tol = 1e-3

    def entry(indices):
        return 1.0 / (indices.sum(axis=1) + 1.0)

    result = tt_cross(entry, dims, tol=tol, seed=3)
    assert result.converged
    assert result.error <= 10 * tol
    for r, cap in zip(result.tt.ranks, (5, 50, 5)):
        assert r <= cap
    full = 1.0 / (np.indices(dims).sum(axis=0) + 1.0)
    assert _relative_error(result.tt.full().data, full) <= 10 * tol
    print(f"  ✅ ranks {result.tt.ranks}, held-out error {result.error:.2e}")


def test_tt_cross_stops_growing_behind_capped_bond():
    """A bond held at its cap ends the sweeps before the free bonds inflate"""
    rng = np.random.default_rng(13)
    dims = (4, 8, 8, 8)
    ranks = [1, 4, 2, 2, 1]
    tt = TTTensor(tuple(_random_complex(rng, (ranks[k], n, ranks[k + 1])) for k, n in enumerate(dims)))

    result = tt_cross(tt.elements, dims, tol=1e-6, seed=4)
    assert not result.converged
    assert result.tt.ranks[0] == 2
    assert result.sweeps <= 3
    assert result.rank_history[-1][1] <= 4
    assert result.rank_history[-1][2] <= 4


def test_tt_cross_explicit_cap_reaches_full_rank():
    rng = np.random.default_rng(14)
    dims = (4, 8, 8, 8)
    ranks = [1, 4, 2, 2, 1]
    tt = TTTensor(tuple(_random_complex(rng, (ranks[k], n, ranks[k + 1])) for k, n in enumerate(dims)))

    result = tt_cross(tt.elements, dims, tol=1e-6, seed=4, max_rank=512)
    assert result.converged
    assert result.tt.ranks[0] == 4
    assert _relative_error(result.tt.full().data, tt.full().data) < 1e-6


def test_tt_cross_rejects_single_mode():
    with pytest.raises(ArgumentError):
        tt_cross(lambda idx: np.ones(len(idx)), (5,))


def test_tucker_rank_one():
    rng = np.random.default_rng(7)
    full = np.einsum("i,j,k->ijk", *(_random_complex(rng, n) for n in (5, 6, 7)))
    tucker = tucker_hosvd(DenseTensor(full), 1e-5)
    assert tucker.ranks == (1, 1, 1)


def test_tucker_diagonal_is_full_rank():
    """Superdiagonal tensor is not low Tucker rank"""
    diag = np.zeros((4, 4, 4))
    for i in range(4):
        diag[i, i, i] = 1.0
    tucker = tucker_hosvd(DenseTensor(diag), 1e-5)
    assert tucker.ranks == (4, 4, 4)


def test_tucker_green_samples():
    """Samples of g on a 20^3 grid compress at tol 1e-5"""
    print("🧊 Testing Tucker HOSVD on Green's function samples...")
    idx = np.indices((20, 20, 20)) + 0.5
    R = np.sqrt((idx ** 2).sum(axis=0))
    full = np.exp(-1j * R) / (4 * np.pi * R)
    tol = 1e-5
    tucker = tucker_hosvd(DenseTensor(full), tol)
    assert _relative_error(tucker.full().data, full) <= tol
    assert max(tucker.ranks) < 20
    assert tucker.compression_factor() > 1
    print(f"  ✅ ranks {tucker.ranks}, compression {float(tucker.compression_factor()):.1f}")


def _random_suite(seed=11, count=20):
    """Random complex tensors of 3 or 4 modes, some with planted low rank, paired with tolerances"""
    rng = np.random.default_rng(seed)
    suite = []
    for k in range(count):
        dims = tuple(int(n) for n in rng.integers(3, 7, size=int(rng.integers(3, 5))))
        full = _random_complex(rng, dims)
        if k % 2:
            full = _random_tt(rng, dims, 2).full().data + 1e-3 * full
        suite.append((full, (1e-1, 1e-2, 1e-3)[k % 3]))
    return suite


def test_tt_svd_frobenius_bound_random_suite():
    print("🧮 Testing TT-SVD error bound on 20 random tensors...")
    for full, tol in _random_suite():
        tt = tt_svd(DenseTensor(full), tol)
        assert _relative_error(tt.full().data, full) <= tol * (1.0 + 1e-10)
    print("  ✅ every tensor within tolerance")


def test_tucker_frobenius_bound_random_suite():
    print("🧊 Testing Tucker error bound on 20 random tensors...")
    for full, tol in _random_suite(seed=12):
        tucker = tucker_hosvd(DenseTensor(full), tol)
        assert _relative_error(tucker.full().data, full) <= tol * (1.0 + 1e-10)
        assert all(r <= n for r, n in zip(tucker.ranks, full.shape))
    print("  ✅ every tensor within tolerance")


def test_aca_rank_one():
    rng = np.random.default_rng(8)
    u, v = _random_complex(rng, 30), _random_complex(rng, 40)
    matrix = np.outer(u, v)
    factors = aca(lambda r, c: matrix[r, c], 30, 40, 1e-6)
    assert factors.rank == 1
    assert _relative_error(factors.full(), matrix) < 1e-12
    assert factors.converged


def test_aca_zero_matrix():
    factors = aca(lambda r, c: np.zeros(len(r)), 10, 12, 1e-3)
    assert factors.rank == 0
    assert factors.full().shape == (10, 12)
    assert not np.any(factors.full())


def test_aca_zero_matrix_stops_early():
    """All-zero rows end the scan after a bounded number of row reads"""
    rows, cols = 500, 400
    factors = aca(lambda r, c: np.zeros(len(r)), rows, cols, 1e-3)
    assert factors.rank == 0
    assert factors.converged
    assert factors.evaluations <= ZERO_ROW_LIMIT * cols
    assert factors.evaluations < rows * cols / 10

    forced = aca(lambda r, c: np.zeros(len(r)), rows, cols, 1e-3, min_rank=5)
    assert forced.rank == 0
    assert forced.evaluations <= ZERO_ROW_LIMIT * cols


def test_aca_skips_leading_zero_rows():
    rng = np.random.default_rng(12)
    u, v = _random_complex(rng, 40), _random_complex(rng, 30)
    u[:3] = 0.0
    matrix = np.outer(u, v)
    factors = aca(lambda r, c: matrix[r, c], 40, 30, 1e-8)
    assert factors.rank == 1
    assert _relative_error(factors.full(), matrix) < 1e-12


def test_aca_separated_clusters():
    """Green's kernel between clusters five diameters apart"""
    print("✂️ Testing ACA on well-separated point clusters...")
    rng = np.random.default_rng(9)
    diameter = np.sqrt(3.0)
    sources = rng.random((200, 3))
    targets = rng.random((300, 3)) + np.array([5.0 * diameter, 0.0, 0.0])

    def entry(rows, cols):
        return 1.0 / (4 * np.pi * np.linalg.norm(sources[rows] - targets[cols], axis=1))

    factors = aca(entry, 200, 300, 1e-3)
    error = sampled_error(factors, entry, samples=1000, seed=0)
    assert factors.rank <= 15
    assert error <= 1e-2
    print(f"  ✅ rank {factors.rank}, sampled error {error:.2e}")


def test_aca_transpose_matvec():
    rng = np.random.default_rng(10)
    matrix = _random_complex(rng, (8, 3)) @ _random_complex(rng, (3, 9))
    factors = aca(lambda r, c: matrix[r, c], 8, 9, 1e-10, max_rank=8)
    y = _random_complex(rng, 8)
    x = _random_complex(rng, 9)
    np.testing.assert_allclose(factors.matvec(x), matrix @ x, rtol=1e-9)
    np.testing.assert_allclose(factors.matvec_transpose(y), matrix.T @ y, rtol=1e-9)


def test_tt_apply_zero_and_ones():
    rng = np.random.default_rng(11)
    tt = _random_tt(rng, (3, 4, 5, 6), 2)
    assert not np.any(tt_apply(tt, np.zeros(6)))
    ones = TTTensor(tuple(np.ones((1, n, 1)) for n in (3, 4, 5, 6)))
    np.testing.assert_allclose(tt_apply(ones, np.ones(6)), np.full(60, 6.0))


def test_tt_apply_matches_dense():
    rng = np.random.default_rng(12)
    tt = _random_tt(rng, (6, 7, 8, 50), 5)
    x = _random_complex(rng, 50)
    dense = tt.full().data.reshape(6 * 7 * 8, 50, order="F")
    assert _relative_error(tt_apply(tt, x), dense @ x) < 1e-12


def test_tt_apply_transpose_matches_dense():
    rng = np.random.default_rng(13)
    tt = _random_tt(rng, (6, 7, 8, 50), 5)
    y = _random_complex(rng, 6 * 7 * 8)
    dense = tt.full().data.reshape(6 * 7 * 8, 50, order="F")
    assert not np.any(tt_apply_transpose(tt, np.zeros(6 * 7 * 8)))
    assert _relative_error(tt_apply_transpose(tt, y), dense.T @ y) < 1e-12


def test_tt_apply_bilinear_identity():
    """<A x, y> == <x, A^T y> without conjugation"""
    rng = np.random.default_rng(14)
    tt = _random_tt(rng, (4, 5, 6, 7), 3)
    x = _random_complex(rng, 7)
    y = _random_complex(rng, 120)
    lhs = np.sum(tt_apply(tt, x) * y)
    rhs = np.sum(x * tt_apply_transpose(tt, y))
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_tt_apply_rejects_wrong_length():
    rng = np.random.default_rng(15)
    tt = _random_tt(rng, (3, 4, 5), 2)
    with pytest.raises(ArgumentError):
        tt_apply(tt, np.ones(4))


def run_all_tests():
    """Run all tensor kit tests"""
    print("🧪 Running Tensor Kit Tests")
    print("=" * 50)

    tests = [(name, func) for name, func in globals().items()
             if name.startswith("test_") and callable(func)]
    results = []
    for test_name, test_func in tests:
        try:
            test_func()
            results.append(True)
            print(f"✅ {test_name}")
        except Exception as e:
            print(f"❌ {test_name}: {e}")
            results.append(False)

    passed = sum(results)
    print(f"\nTotal: {passed}/{len(results)} tests passed")
    return passed == len(results)


if __name__ == "__main__":
    success = run_all_tests()
    sys.exit(0 if success else 1)
