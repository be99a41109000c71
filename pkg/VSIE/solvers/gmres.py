"""
Restarted GMRES
Modified Gram-Schmidt Arnoldi with complex Givens rotations
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from VSIE.errors import ArgumentError
from VSIE.solvers.report import SolveReport

logger = logging.getLogger(__name__)

STAGNATION = 1e-14


@dataclass(frozen=True)
class GmresConfig:
    tol: float = 1e-5
    restart: int = 50
    max_cycles: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise ArgumentError(f"GMRES tol must be positive, got {self.tol}")
        if self.restart < 1:
            raise ArgumentError(f"GMRES restart must be at least 1, got {self.restart}")
        if self.max_cycles < 1:
            raise ArgumentError(f"GMRES max_cycles must be at least 1, got {self.max_cycles}")


def _givens(a: complex, b: float) -> Tuple[float, complex]:
    if a == 0:
        return 0.0, 1.0 + 0.0j
    t = np.hypot(abs(a), abs(b))
    return abs(a) / t, (a / abs(a)) * np.conj(b) / t


def gmres(apply: Callable[[np.ndarray], np.ndarray], b: np.ndarray, cfg: GmresConfig = GmresConfig(),
          x0: Optional[np.ndarray] = None,
          precondition: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Tuple[np.ndarray, SolveReport]:
    """Solve apply(x) = b; the report carries the true relative residual after every cycle.

    ``precondition`` is applied on the right: the Krylov space is built for
    apply(precondition(z)) and the iterate is x = x0 + precondition(z), so
    residuals stay those of the original system.
    """
    b = np.asarray(b, dtype=np.complex128)
    n = b.shape[0]
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        raise ArgumentError("GMRES right-hand side is zero")
    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    if x.shape != (n,):
        raise ArgumentError(f"x0 has shape {x.shape}, expected ({n},)")

    operator = apply if precondition is None else (lambda v: apply(precondition(v)))
    start = time.perf_counter()
    r = b - apply(x)
    beta = float(np.linalg.norm(r))
    rel = beta / b_norm
    history = [rel]
    iterations, cycles = 0, 0
    converged = rel <= cfg.tol
    m = cfg.restart

    while not converged and cycles < cfg.max_cycles:
        cycles += 1
        cycle_start = rel
        V = np.zeros((n, m + 1), dtype=np.complex128)
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m)
        sn = np.zeros(m, dtype=np.complex128)
        g = np.zeros(m + 1, dtype=np.complex128)
        g[0] = beta
        V[:, 0] = r / beta
        k_used = 0

        for k in range(m):
            w = operator(V[:, k])
            w_norm = float(np.linalg.norm(w))
            for i in range(k + 1):
                H[i, k] = np.vdot(V[:, i], w)
                w = w - H[i, k] * V[:, i]
            h_next = float(np.linalg.norm(w))
            breakdown = h_next <= STAGNATION * max(w_norm, 1e-300)
            H[k + 1, k] = h_next
            if not breakdown:
                V[:, k + 1] = w / h_next

            for i in range(k):
                upper = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -np.conj(sn[i]) * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = upper
            cs[k], sn[k] = _givens(H[k, k], h_next)
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -np.conj(sn[k]) * g[k]
            g[k] = cs[k] * g[k]

            iterations += 1
            k_used = k + 1
            estimate = abs(g[k + 1]) / b_norm
            history.append(estimate)
            logger.debug(f"GMRES cycle {cycles} iteration {k_used}: residual {estimate:.3e}")
            if estimate <= cfg.tol or breakdown:
                break

        y = scipy.linalg.solve_triangular(H[:k_used, :k_used], g[:k_used])
        update = V[:, :k_used] @ y
        x = x + (update if precondition is None else precondition(update))
        r = b - apply(x)
        beta = float(np.linalg.norm(r))
        rel = beta / b_norm
        converged = rel <= cfg.tol
        logger.info(f"🔄 GMRES cycle {cycles}: {iterations} iterations, residual {rel:.3e}")
        if not converged and cycle_start - rel <= STAGNATION * cycle_start:
            logger.warning(f"⚠️ GMRES stagnated in cycle {cycles} at residual {rel:.3e}")
            break

    report = SolveReport(
        iterations=iterations,
        cycles=cycles,
        residual=rel,
        converged=converged,
        wall_ms=(time.perf_counter() - start) * 1000.0,
        residual_history=[float(h) for h in history],
    )
    if converged:
        logger.info(f"✅ GMRES converged: {iterations} iterations, residual {rel:.3e}")
    else:
        logger.warning(f"⚠️ GMRES stopped without convergence: residual {rel:.3e} after {cycles} cycles")
    return x, report
