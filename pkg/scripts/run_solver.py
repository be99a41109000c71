"""
VSIE Solver Runner Script
Solve a scene file, optionally against the dense reference or over a parameter sweep
"""
import sys
import argparse
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from VSIE.errors import (ArgumentError, CompressionError, ConvergenceError, GeometryError,
                         SceneError, VSIEError)
from VSIE.scene.output import write_currents, write_currents_csv, write_report
from VSIE.scene.scene_config import SceneConfig, apply_override, build_scene, load_scene
from VSIE.solvers.report import EXTRA_KEYS, REPORT_KEYS, SolveReport
from VSIE.solvers.settings import SolverSettings
from VSIE.solvers.solve_orchestrator import HybridSolverPipeline

load_dotenv()

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2

logger = logging.getLogger(__name__)


def configure_logging():
    Path('logs').mkdir(exist_ok=True)
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler('logs/vsie_solver.log'),
            logging.StreamHandler()
        ]
    )


def parse_sweep(text: str) -> Tuple[str, List]:
    """``path=v1,v2,...`` or ``path=start:stop:count``"""
    path, sep, spec = text.partition('=')
    if not sep or not path or not spec:
        raise ArgumentError(f"sweep must look like <param>=<list>, got '{text}'")
    if ':' in spec:
        parts = spec.split(':')
        if len(parts) != 3:
            raise ArgumentError(f"sweep range must be start:stop:count, got '{spec}'")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ArgumentError(f"sweep count must be at least 1, got {count}")
        return path, [float(v) for v in np.linspace(start, stop, count)]
    values = []
    for token in spec.split(','):
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError:
            values.append(token)
    return path, values


def solve_once(config: SceneConfig, overrides: Dict, out_dir: Path, reference: bool = False,
               csv: bool = False, suffix: str = "") -> Tuple[int, Optional[SolveReport]]:
    """Build, solve and write outputs for one scene; returns (exit code, report)"""
    try:
        scene = build_scene(config)
        settings = SolverSettings.from_mapping(config.solver).with_overrides(**overrides)
        pipeline = HybridSolverPipeline(scene, settings)
        out = pipeline.run(reference=reference)
    except (SceneError, GeometryError, ArgumentError, FileNotFoundError) as e:
        logger.error(f"❌ Input error: {e}")
        return EXIT_INPUT, None
    except (ConvergenceError, CompressionError) as e:
        logger.error(f"❌ Solver failed: {e}")
        return EXIT_NOT_CONVERGED, getattr(e, 'report', None)
    except VSIEError as e:
        logger.error(f"❌ Solver rejected the scene: {e}")
        return EXIT_INPUT, None

    currents = Path(config.output['currents'])
    report_name = Path(config.output['report'])
    write_currents(out_dir / f"{currents.stem}{suffix}{currents.suffix}",
                   out.j_f, out.j_n, out.j_b, out.dims, out.scene)
    write_report(out_dir / f"{report_name.stem}{suffix}{report_name.suffix}", out.report)
    if csv or config.output['csv']:
        write_currents_csv(out_dir / f"{currents.stem}{suffix}.csv", out.j_f, out.j_n, out.j_b, out.dims)
    return (EXIT_OK if out.report.converged else EXIT_NOT_CONVERGED), out.report


def _sweep_job(job) -> Tuple[int, object, int, Optional[SolveReport]]:
    k, config, path, value, overrides, out_dir, reference, csv = job
    try:
        config_k = apply_override(config, path, value)
    except (SceneError, ArgumentError, ValueError) as e:
        logger.error(f"❌ Sweep value {value!r} rejected: {e}")
        return k, value, EXIT_INPUT, None
    logger.info(f"🔄 Sweep {k}: {path} = {value}")
    code, report = solve_once(config_k, overrides, out_dir, reference, csv, suffix=f"_{k}")
    return k, value, code, report


def _summary_row(k: int, path: str, value, code: int, report: Optional[SolveReport]) -> Dict:
    row = {'index': k, 'param': path, 'value': value, 'exit_code': code}
    for key in REPORT_KEYS + EXTRA_KEYS:
        item = getattr(report, key) if report is not None else None
        row[key] = float(item) if isinstance(item, Fraction) else item
    return row


def run_sweep(config: SceneConfig, sweep: str, overrides: Dict, out_dir: Path,
              reference: bool = False, csv: bool = False, jobs: int = 1) -> int:
    """One solve per sweep value; per-value reports plus sweep_summary.csv"""
    path, values = parse_sweep(sweep)
    print(f"🔄 Sweeping {path} over {len(values)} values")
    batch = [(k, config, path, v, overrides, out_dir, reference, csv) for k, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, batch))
    else:
        results = [_sweep_job(job) for job in batch]

    summary = pd.DataFrame([_summary_row(k, path, v, code, report) for k, v, code, report in results])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out_dir / 'sweep_summary.csv', index=False)
    print(f"📊 Sweep summary written to {out_dir / 'sweep_summary.csv'}")
    for k, v, code, report in results:
        status = '✅' if code == EXIT_OK else '❌'
        residual = f"{report.residual:.3e}" if report is not None else "NA"
        print(f"  {status} [{k}] {path}={v}: exit {code}, residual {residual}")
    return max(code for _, _, code, _ in results) if results else EXIT_OK


def run_solve(args) -> int:
    print("🚀 Running VSIE Hybrid Solver")
    print("=" * 50)
    print(f"Timestamp: {datetime.now()}")
    print(f"Scene: {args.scene}")
    print()

    try:
        config = load_scene(args.scene)
    except FileNotFoundError:
        print(f"❌ Scene file not found: {args.scene}")
        return EXIT_INPUT
    except SceneError as e:
        print(f"❌ Scene rejected: {e}")
        return EXIT_INPUT

    overrides = {
        'tol_gmres': args.tol_gmres,
        'tol_tt': args.tol_tt,
        'tol_aca': args.tol_aca,
        'tol_tucker': args.tol_tucker,
        'seed': args.seed,
        'workers': args.workers,
        'surface_scaling': args.surface_scaling,
    }
    out_dir = Path(args.out or config.output['dir'])

    try:
        if args.sweep:
            return run_sweep(config, args.sweep, overrides, out_dir, args.reference, args.csv, args.jobs)
        code, report = solve_once(config, overrides, out_dir, args.reference, args.csv)
    except ValueError as e:
        print(f"❌ {e}")
        return EXIT_INPUT

    if report is not None:
        print("\n📋 Solve Results:")
        for key, value in report.fields().items():
            print(f"  {key}: {value}")
    if code == EXIT_OK:
        print("\n🎉 Solve converged")
    elif code == EXIT_NOT_CONVERGED:
        print("\n⚠️ Solver did not converge")
    else:
        print("\n❌ Input error, see logs/vsie_solver.log")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Hybrid volume-surface integral equation solver')
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help='Solve a scene file')
    solve.add_argument('scene', help='JSON scene document')
    solve.add_argument('--reference', action='store_true',
                       help='Also run the dense reference and report the relative difference')
    solve.add_argument('--sweep', help='Parameter sweep: <dotted.path>=v1,v2,... or start:stop:count')
    solve.add_argument('--out', help='Output directory (default: scene output.dir or VSIE_OUTPUT_DIR)')
    solve.add_argument('--tol-gmres', type=float, help='GMRES relative residual tolerance')
    solve.add_argument('--tol-tt', type=float, help='TT-cross tolerance')
    solve.add_argument('--tol-aca', type=float, help='ACA tolerance')
    solve.add_argument('--tol-tucker', type=float, help='Tucker kernel compression tolerance')
    solve.add_argument('--seed', type=int, help='Random seed for cross approximation')
    solve.add_argument('--workers', type=int, help='FFT and entry-evaluation workers')
    solve.add_argument('--surface-scaling', choices=('block', 'diagonal', 'none'),
                       help='Normalisation of the surface unknowns in GMRES (default: block)')
    solve.add_argument('--jobs', type=int, default=1, help='Parallel sweep processes (default: 1)')
    solve.add_argument('--csv', action='store_true', help='Also export currents as CSV')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function with command line arguments"""
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    if args.command == 'solve':
        return run_solve(args)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
