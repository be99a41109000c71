"""
Hybrid solve orchestrator
Build the block operator, run GMRES, optionally compare against the dense reference
"""
import logging
import time
from dataclasses import asdict
from datetime import datetime
from typing import Dict, Optional, Tuple

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.operators.hybrid import HybridSystem, build_hybrid_system
from VSIE.scene.output import RunOutput
from VSIE.scene.scene_config import Scene
from VSIE.solvers.dense_reference import solve_dense_system
from VSIE.solvers.gmres import gmres
from VSIE.solvers.metrics import absorbed_power, relative_difference
from VSIE.solvers.report import SolveReport
from VSIE.solvers.settings import SolverSettings

logger = logging.getLogger(__name__)


def scene_echo(scene: Scene, settings: SolverSettings) -> Dict:
    """JSON-ready summary of what was solved"""
    return {
        'frequency': scene.frequency.f,
        'dims': list(scene.grid.dims),
        'spacing': scene.grid.spacing,
        'origin': [float(v) for v in scene.grid.origin],
        'occupied_voxels': int(scene.grid.mask.sum()),
        'surfaces': dict(scene.tags),
        'far_patches': scene.far.m,
        'near_patches': scene.near.m,
        'ports': {name: [complex(a).real, complex(a).imag] for name, a in scene.amplitudes.items()},
        'warnings': list(scene.warnings),
        'solver': asdict(settings),
    }


class HybridSolverPipeline:
    """Hybrid VSIE solve of one scene"""

    def __init__(self, scene: Scene, settings: Optional[SolverSettings] = None):
        self.scene = scene
        self.settings = settings or SolverSettings.from_mapping(scene.config.solver)
        self.grid = None
        self.far = None
        self.near = None
        self.k0 = None
        self.rhs = None
        self.system: Optional[HybridSystem] = None
        self.pipeline_stats = {
            'start_time': None,
            'end_time': None,
            'duration_seconds': 0,
            'build_stats': {},
            'solve_stats': {},
            'reference_stats': {},
            'success': False,
            'errors': []
        }

        self._initialize_components()

    def _initialize_components(self):
        """Normalise geometry and set up the excitation"""
        try:
            logger.info("🚀 Initializing hybrid solver components...")
            if not self.scene.amplitudes:
                raise ArgumentError("scene defines no ports to excite")
            self.grid, self.far, self.near, self.k0 = self.scene.normalized()
            v_f, v_n = self.scene.excitation()
            self.rhs = np.concatenate([v_f, v_n, np.zeros(3 * self.grid.n_v, dtype=np.complex128)])
            logger.info(f"✅ Components ready: k0*dx = {self.k0:.4f}, {self.far.m} far + "
                        f"{self.near.m} near patches, {self.grid.n_v:,} voxels")

        except Exception as e:
            logger.error(f"❌ Failed to initialize hybrid solver: {e}")
            raise

    def build_system(self) -> HybridSystem:
        """Assemble and compress every block of the coupled operator"""
        logger.info("🔄 Building hybrid operator...")
        try:
            s = self.settings
            self.system = build_hybrid_system(
                self.grid, self.far, self.near, self.k0,
                tol_tt=s.tol_tt, tol_aca=s.tol_aca, tol_tucker=s.tol_tucker, seed=s.seed,
                workers=s.workers, coupling_mode=s.coupling_mode, near_mode=s.near_mode,
                stencil=s.stencil, extend=s.extend, recompress=s.recompress, scaling=s.surface_scaling)
            self.pipeline_stats['build_stats'] = dict(self.system.stats, success=True)
            return self.system

        except Exception as e:
            error_msg = f"Operator build failed: {e}"
            logger.error(f"❌ {error_msg}")
            self.pipeline_stats['errors'].append(error_msg)
            self.pipeline_stats['build_stats']['success'] = False
            raise

    def solve(self) -> Tuple[np.ndarray, SolveReport]:
        """GMRES on the stacked system; the report gathers compression and residual statistics"""
        if self.system is None:
            self.build_system()
        logger.info(f"🔄 Solving {self.system.n:,} unknowns with GMRES "
                    f"(tol {self.settings.tol_gmres:g}, restart {self.settings.restart})")
        try:
            x, report = gmres(self.system.apply, self.rhs, self.settings.gmres_config(),
                              precondition=self.system.scaling)
            stats = self.system.stats
            report.cf_coupling = stats.get('cf_coupling')
            report.cf_kernels = stats.get('cf_kernels')
            report.cf_fn = stats.get('cf_fn')
            report.entry_evals = stats.get('entry_evals', 0)
            report.aca_evals = stats.get('aca_evals', 0)
            report.tt_max_rank = stats.get('tt_max_rank', 0)
            for key, value in self.system.block_residuals(x, self.rhs).items():
                setattr(report, key, value)
            report.absorbed_power = absorbed_power(self.grid, self.system.split(x)[2])

            self.pipeline_stats['solve_stats'] = {
                'iterations': report.iterations,
                'residual': report.residual,
                'converged': report.converged,
                'success': True
            }
            logger.info(f"📊 Residuals far/near/body: {report.residual_far:.2e} / "
                        f"{report.residual_near:.2e} / {report.residual_body:.2e}")
            return x, report

        except Exception as e:
            error_msg = f"Hybrid solve failed: {e}"
            logger.error(f"❌ {error_msg}")
            self.pipeline_stats['errors'].append(error_msg)
            self.pipeline_stats['solve_stats']['success'] = False
            raise

    def reference(self, x: np.ndarray, report: SolveReport) -> np.ndarray:
        """Dense solve of the same scene; records the relative difference in ``report``"""
        logger.info("🔄 Running dense reference solve...")
        try:
            v_f, v_n = self.scene.excitation()
            j_f, j_n, j_b, dense_report = solve_dense_system(
                self.grid, self.far, self.near, self.k0, v_f, v_n, self.settings.gmres_config(),
                dense_limit=self.settings.dense_limit, scaling=self.settings.surface_scaling)
            x_ref = np.concatenate([j_f, j_n, j_b])
            report.rel_diff_ref = relative_difference(x, x_ref)
            self.pipeline_stats['reference_stats'] = {
                'rel_diff_ref': report.rel_diff_ref,
                'residual': dense_report.residual,
                'direct_check': dense_report.direct_check,
                'direct_residual': dense_report.direct_residual,
                'gmres_converged': dense_report.converged,
                'wall_ms': dense_report.wall_ms,
                'success': True
            }
            logger.info(f"📊 Relative difference vs dense reference: {report.rel_diff_ref:.3e}")
            return x_ref

        except Exception as e:
            error_msg = f"Dense reference failed: {e}"
            logger.error(f"❌ {error_msg}")
            self.pipeline_stats['errors'].append(error_msg)
            self.pipeline_stats['reference_stats']['success'] = False
            raise

    def run(self, reference: bool = False) -> RunOutput:
        self.pipeline_stats['start_time'] = datetime.now()
        start = time.perf_counter()
        try:
            self.build_system()
            x, report = self.solve()
            if reference:
                self.reference(x, report)
            report.wall_ms = (time.perf_counter() - start) * 1000.0
            self.pipeline_stats['success'] = report.converged
            j_f, j_n, j_b = self.system.split(x)
            return RunOutput(j_f, j_n, j_b, report, tuple(self.grid.dims),
                             scene_echo(self.scene, self.settings))
        finally:
            self._finalize_stats()

    def _finalize_stats(self):
        self.pipeline_stats['end_time'] = datetime.now()
        self.pipeline_stats['duration_seconds'] = (
            self.pipeline_stats['end_time'] - self.pipeline_stats['start_time']).total_seconds()
        status = "✅" if self.pipeline_stats['success'] else "⚠️"
        logger.info(f"{status} Pipeline finished in {self.pipeline_stats['duration_seconds']:.2f}s "
                    f"with {len(self.pipeline_stats['errors'])} errors")


def solve_hybrid(scene: Scene, settings: Optional[SolverSettings] = None
                 ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, SolveReport]:
    """(j_f, j_n, j_b, report) of the hybrid solve"""
    out = HybridSolverPipeline(scene, settings).run()
    return out.j_f, out.j_n, out.j_b, out.report
