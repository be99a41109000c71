"""
Solver Tests - GMRES, metrics, settings, dense reference and the hybrid solve pipeline
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
from VSIE.kernels.geometry import VoxelGrid
from VSIE.kernels.surface import surface_block
from VSIE.scene.generators import sphere_phantom
from VSIE.scene.scene_config import build_scene, parse_scene_dict
from VSIE.solvers.dense_reference import (assemble_dense_system, check_symmetry, solve_dense)
from VSIE.solvers.gmres import GmresConfig, gmres
from VSIE.solvers.metrics import absorbed_power, relative_difference
from VSIE.solvers.report import EXTRA_KEYS, REPORT_KEYS, SolveReport
from VSIE.solvers.settings import SolverSettings
from VSIE.solvers.solve_orchestrator import HybridSolverPipeline, solve_hybrid

# Load environment variables
load_dotenv()

# Configure logging for tests
logging.basicConfig(level=logging.INFO)


def _scene(body=True, far=True, amplitude=1.0, **solver):
    """8^3 scene with a 24-patch coil above a lossy sphere and an optional distant shield"""
    raw = {
        "frequency": 298e6,
        "grid": {"dims": [8, 8, 8], "spacing": 0.01, "origin": [0.0, 0.0, 0.0]},
        "surfaces": [{
            "type": "loop", "name": "coil", "tag": "auto", "center": [0.035, 0.035, 0.052],
            "radius": 0.015, "width": 0.003, "patches": 24,
        }],
        "ports": [{"name": "feed", "surface": "coil", "patch": 0, "amplitude": amplitude}],
        "solver": solver,
    }
    if body:
        raw["body"] = {"type": "sphere", "center": [0.035, 0.035, 0.025], "radius": 0.02,
                       "eps_r": [50.0, -20.0]}
    if far:
        raw["surfaces"].append({
            "type": "shell", "name": "shield", "tag": "far", "center": [0.035, 0.035, 0.035],
            "radius": 0.5, "length": 0.6, "axial": 2, "azimuthal": 32,
        })
    return build_scene(parse_scene_dict(raw))


def _random_vector(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_gmres_identity():
    print("🔄 Testing GMRES on the identity...")
    b = _random_vector(20)
    x, report = gmres(lambda v: v, b)
    np.testing.assert_allclose(x, b, rtol=1e-12)
    assert report.converged
    assert report.iterations == 1
    print("  ✅ one iteration")


def test_gmres_small_system():
    A = np.array([[2.0, 1.0], [1.0, 3.0]], dtype=np.complex128)
    b = np.array([1.0, 2.0], dtype=np.complex128)
    x, report = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-12))
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-10)
    assert report.iterations <= 2
    assert report.residual <= 1e-12


def test_gmres_diagonally_dominant_with_restarts():
    """Restarted GMRES reaches the direct solution; history starts at 1"""
    print("🔄 Testing restarted GMRES on a 200x200 complex system...")
    n = 200
    rng = np.random.default_rng(1)
    A = 10.0 * np.eye(n) + (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
    b = _random_vector(n, seed=2)
    x, report = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-10, restart=5, max_cycles=200))
    assert report.converged
    assert report.cycles > 1
    assert report.residual <= 1e-10
    assert report.residual_history[0] == pytest.approx(1.0)
    assert relative_difference(x, np.linalg.solve(A, b)) < 1e-8
    history = report.residual_history
    assert all(later <= earlier * (1.0 + 1e-6) + 1e-14 for earlier, later in zip(history, history[1:]))
    print(f"  ✅ converged in {report.iterations} iterations over {report.cycles} cycles")


def test_gmres_reports_non_convergence():
    n = 200
    rng = np.random.default_rng(3)
    A = np.diag(np.linspace(1.0, 1e4, n)) + 0.1 * rng.standard_normal((n, n))
    b = _random_vector(n, seed=4)
    _, report = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-12, restart=2, max_cycles=1))
    assert not report.converged
    assert report.cycles == 1
    assert report.residual > 1e-12


def test_gmres_right_preconditioner_keeps_true_residual():
    """Jacobi scaling on the right: badly scaled columns converge, residual is that of A x = b"""
    print("🔄 Testing right-preconditioned GMRES...")
    n = 120
    rng = np.random.default_rng(5)
    scale = np.logspace(0, 6, n)
    noise = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
    A = (np.eye(n) + 0.05 * noise) * scale[None, :]
    b = _random_vector(n, seed=6)
    cfg = GmresConfig(tol=1e-10, restart=20, max_cycles=20)
    x, report = gmres(lambda v: A @ v, b, cfg, precondition=lambda v: v / np.diag(A))
    assert report.converged
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10
    assert report.residual == pytest.approx(np.linalg.norm(A @ x - b) / np.linalg.norm(b), rel=1e-6)

    exact = np.linalg.inv(A)
    _, one_step = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-8), precondition=lambda v: exact @ v)
    assert one_step.iterations == 1
    print(f"  ✅ {report.iterations} iterations with Jacobi scaling")


def test_gmres_rejects_bad_input():
    with pytest.raises(ArgumentError):
        gmres(lambda v: v, np.zeros(4))
    with pytest.raises(ArgumentError):
        gmres(lambda v: v, np.ones(4), x0=np.ones(3))
    with pytest.raises(ArgumentError):
        GmresConfig(tol=0.0)
    with pytest.raises(ArgumentError):
        GmresConfig(restart=0)


def test_relative_difference():
    assert relative_difference(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(1.0 / np.sqrt(2.0))
    assert relative_difference(np.ones(3), np.ones(3)) == 0.0
    with pytest.raises(ArgumentError):
        relative_difference(np.ones(3), np.zeros(3))
    with pytest.raises(ArgumentError):
        relative_difference(np.ones(3), np.ones(4))


def test_absorbed_power_signs():
    vacuum = VoxelGrid.vacuum((3, 3, 3), 1.0)
    j = _random_vector(3 * vacuum.n_v)
    assert absorbed_power(vacuum, j) == 0.0

    lossy = sphere_phantom((3, 3, 3), 1.0, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 1.1, 4.0 - 2.0j)
    assert absorbed_power(lossy, j) > 0.0
    lossless = sphere_phantom((3, 3, 3), 1.0, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 1.1, 4.0)
    assert absorbed_power(lossless, j) == 0.0
    with pytest.raises(ArgumentError):
        absorbed_power(lossy, j[:-1])


def test_report_fields():
    report = SolveReport(iterations=7, residual=1.5e-6, converged=True, cf_kernels=Fraction(5, 2))
    fields = report.fields()
    assert list(fields) == list(REPORT_KEYS + EXTRA_KEYS)
    assert fields["iterations"] == "7"
    assert fields["residual"] == "1.500000e-06"
    assert fields["cf_kernels"] == "2.5"
    assert fields["cf_coupling"] == "NA"
    assert fields["converged"] == "true"
    assert "wall_ms" not in report.fields(include_wall_time=False)


def test_settings_resolution():
    settings = SolverSettings.from_mapping({"tol_gmres": 1e-8, "bogus": 3, "seed": None})
    assert settings.tol_gmres == 1e-8
    assert settings.seed == 0
    updated = settings.with_overrides(tol_tt=1e-4, workers=None)
    assert updated.tol_tt == 1e-4 and updated.workers == 1
    assert updated.gmres_config().tol == 1e-8
    with pytest.raises(ArgumentError):
        SolverSettings(tol_aca=-1.0)
    with pytest.raises(ArgumentError):
        SolverSettings(workers=0)


def test_dense_system_is_symmetric_after_row_scaling():
    print("🧮 Testing dense reference symmetry...")
    scene = _scene()
    grid, far, near, k0 = scene.normalized()
    A, voxels = assemble_dense_system(grid, far, near, k0)
    m = far.m + near.m
    assert A.shape == (m + 3 * len(voxels),) * 2
    chi = np.tile(grid.chi_e.reshape(-1, order="F")[voxels], 3)
    assert check_symmetry(A, m, chi) <= 1e-10
    print(f"  ✅ {A.shape[0]} unknowns, complex-symmetric")


def test_dense_reference_gmres_agrees_with_lu():
    scene = _scene()
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(tol_gmres=1e-10)
    j_c, j_b, report = solve_dense(scene, settings)
    assert report.method == "dense"
    assert report.converged
    assert report.direct_check < 1e-5
    assert report.direct_residual < 1e-10
    assert j_c.shape == (scene.far.m + scene.near.m,)
    assert j_b.shape == (3 * scene.grid.n_v,)


def test_dense_reference_keeps_gmres_state():
    """An unconverged GMRES stays unconverged even though the LU currents are returned"""
    scene = _scene()
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(
        tol_gmres=1e-12, restart=1, max_cycles=1)
    j_c, j_b, report = solve_dense(scene, settings)
    assert not report.converged
    assert report.iterations == 1
    assert report.residual > 1e-12
    assert report.residual == pytest.approx(report.residual_history[-1], rel=1e-6)
    assert report.direct_residual < 1e-10
    assert report.direct_check > 0.0

    exact, _, lu_report = solve_dense(scene, settings.with_overrides(tol_gmres=1e-10, restart=50,
                                                                      max_cycles=100))
    assert relative_difference(j_c, exact) < 1e-10
    assert lu_report.converged


def test_scene_converges_with_restart_50():
    """Default surface normalisation: GMRES(50) meets 1e-5 in the true residual of every block"""
    print("🔄 Testing GMRES(50) convergence on the 8^3 coil, shield and sphere scene...")
    scene = _scene()
    settings = SolverSettings(tol_gmres=1e-5, restart=50, max_cycles=10)
    pipeline = HybridSolverPipeline(scene, settings)
    system = pipeline.build_system()
    assert system.scaling is not None and system.scaling.mode == "block"
    x, report = pipeline.solve()
    assert report.converged
    true_residual = np.linalg.norm(system.apply(x) - pipeline.rhs) / np.linalg.norm(pipeline.rhs)
    assert true_residual <= 1e-5
    assert max(report.residual_far, report.residual_near, report.residual_body) <= 1e-5

    j_c, j_b, _ = solve_dense(scene, settings, direct=True)
    j_f, j_n, j_b_hybrid = system.split(x)
    assert relative_difference(np.concatenate([j_f, j_n, j_b_hybrid]), np.concatenate([j_c, j_b])) < 1e-2
    print(f"  ✅ {report.iterations} iterations, residual {report.residual:.2e}")


def test_surface_scaling_modes_agree():
    """Every surface normalisation solves the same coil-only system"""
    scene = _scene(body=False, far=False, near_mode="dense")
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(tol_gmres=1e-10)
    reference = solve_hybrid(scene, settings)
    assert reference[3].converged
    for mode in ("diagonal", "none"):
        scaled = solve_hybrid(scene, settings.with_overrides(surface_scaling=mode))
        assert scaled[3].converged, mode
        assert relative_difference(scaled[1], reference[1]) < 1e-5, mode
    with pytest.raises(ArgumentError):
        SolverSettings(surface_scaling="calderon")


def test_dense_reference_guard():
    scene = _scene()
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(dense_limit=100)
    with pytest.raises(ArgumentError):
        solve_dense(scene, settings)


def test_decoupled_surface_solve():
    """Without a body or far surface the near currents solve Z_nn j = v"""
    print("🔗 Testing the decoupled surface limit...")
    scene = _scene(body=False, far=False, near_mode="dense")
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(tol_gmres=1e-10)
    j_f, j_n, j_b, report = solve_hybrid(scene, settings)
    _, _, near, k0 = scene.normalized()
    _, v_n = scene.excitation()
    expected = np.linalg.solve(surface_block(near, near, k0), v_n)
    assert j_f.size == 0
    assert not np.any(j_b)
    assert relative_difference(j_n, expected) < 1e-6
    assert report.converged
    print("  ✅ matches the direct surface solve")


def test_hybrid_solve_is_linear_in_amplitude():
    settings = SolverSettings(tol_gmres=1e-8)
    _, j_n1, j_b1, _ = solve_hybrid(_scene(amplitude=1.0), settings)
    _, j_n2, j_b2, _ = solve_hybrid(_scene(amplitude=2.0), settings)
    assert relative_difference(j_n2, 2.0 * j_n1) < 1e-10
    assert relative_difference(j_b2, 2.0 * j_b1) < 1e-10


def test_hybrid_solve_is_deterministic():
    settings = SolverSettings(seed=3)
    first = solve_hybrid(_scene(), settings)
    second = solve_hybrid(_scene(), settings)
    for a, b in zip(first[:3], second[:3]):
        np.testing.assert_array_equal(a, b)


def test_pipeline_against_dense_reference():
    """Hybrid currents agree with the dense gold standard; body losses are non-negative"""
    print("🚀 Testing the hybrid pipeline against the dense reference...")
    scene = _scene()
    settings = SolverSettings.from_mapping(scene.config.solver).with_overrides(tol_gmres=1e-7)
    pipeline = HybridSolverPipeline(scene, settings)
    out = pipeline.run(reference=True)
    report = out.report
    assert report.converged
    assert report.rel_diff_ref < 1e-2
    assert report.absorbed_power >= 0.0
    assert report.cf_coupling > 1
    assert report.entry_evals > 0
    assert report.residual_body is not None
    assert pipeline.pipeline_stats['success']
    assert pipeline.pipeline_stats['reference_stats']['success']
    assert out.scene['ports'] == {'feed': [1.0, 0.0]}
    assert out.scene['surfaces'] == {'coil': 'near', 'shield': 'far'}
    print(f"  ✅ rel_diff_ref {report.rel_diff_ref:.2e} after {report.iterations} iterations")


def test_pipeline_requires_ports():
    scene = _scene()
    scene.amplitudes.clear()
    with pytest.raises(ArgumentError):
        HybridSolverPipeline(scene)


def run_all_tests():
    """Run all solver tests"""
    print("🧪 Running Solver Tests")
    print("=" * 50)
    tests = [fn for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for test in tests:
        test()
    print(f"\n🎉 All {len(tests)} solver tests passed!")


if __name__ == "__main__":
    run_all_tests()
