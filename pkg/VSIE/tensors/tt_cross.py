"""
TT-cross approximation
Two-site cross sweeps over a black-box entry function with held-out validation
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.tensors.aca import aca
from VSIE.tensors.tt import TTTensor, tt_round

logger = logging.getLogger(__name__)

# error reduction a sweep must reach while some bond sits at its cap
CAPPED_PROGRESS = 0.5

# entry(indices) -> values for an (N, d) array of 0-based multi-indices
TensorEntry = Callable[[np.ndarray], np.ndarray]


@dataclass
class TTCrossResult:
    tt: TTTensor
    converged: bool
    error: float
    evaluations: int
    validation_evaluations: int
    sweeps: int
    rank_history: List[Tuple[int, ...]] = field(default_factory=list)


class CachedEntry:
    """Memoising wrapper that counts distinct entries requested"""

    def __init__(self, entry: TensorEntry, dims: Sequence[int], workers: int = 1):
        self.entry = entry
        self.dims = tuple(int(n) for n in dims)
        self.workers = max(1, int(workers))
        self.strides = np.cumprod((1,) + self.dims[:-1]).astype(np.int64)
        self.cache: Dict[int, complex] = {}
        self.evaluations = 0

    def _evaluate(self, indices: np.ndarray) -> np.ndarray:
        if self.workers == 1 or len(indices) < 2 * self.workers:
            return np.asarray(self.entry(indices), dtype=np.complex128)
        chunks = np.array_split(indices, self.workers)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            parts = list(pool.map(self.entry, chunks))
        return np.concatenate([np.asarray(p, dtype=np.complex128) for p in parts])

    def __call__(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        keys = indices @ self.strides
        unique, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        values = np.empty(len(unique), dtype=np.complex128)
        missing = []
        for pos, key in enumerate(unique.tolist()):
            hit = self.cache.get(key)
            if hit is None:
                missing.append(pos)
            else:
                values[pos] = hit
        if missing:
            missing = np.asarray(missing)
            fresh = self._evaluate(indices[first[missing]])
            values[missing] = fresh
            self.cache.update(zip(unique[missing].tolist(), fresh.tolist()))
            self.evaluations += len(missing)
        return values[inverse]


def _unfolding_rank(dims: Sequence[int], k: int) -> int:
    return min(math.prod(dims[:k]), math.prod(dims[k:]))


def _bond_cap(dims: Sequence[int], k: int, max_rank: Optional[int]) -> int:
    """Half the unfolding rank by default; an explicit cap is clipped at the full unfolding rank"""
    full = _unfolding_rank(dims, k)
    if max_rank is None:
        return max(1, math.ceil(full / 2))
    return max(1, min(full, int(max_rank)))


class _CrossState:
    """Nested pivot sets: left[k] holds r_k indices of modes 0..k-1, right[k] of modes k..d-1"""

    def __init__(self, dims: Tuple[int, ...], rng: np.random.Generator):
        d = len(dims)
        self.dims = dims
        self.left: List[np.ndarray] = [np.zeros((1, 0), dtype=np.int64)] + [None] * (d - 1)
        self.right: List[np.ndarray] = [None] * d + [np.zeros((1, 0), dtype=np.int64)]
        for k in range(1, d):
            self.right[k] = rng.integers(0, dims[k:], size=(1, d - k)).astype(np.int64)

    def ranks(self) -> Tuple[int, ...]:
        return tuple(self.right[k].shape[0] for k in range(1, len(self.dims)))

    def bond_sets(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        left, n_left = self.left[k - 1], self.dims[k - 1]
        r_left = left.shape[0]
        alpha = np.tile(np.arange(r_left), n_left)
        i = np.repeat(np.arange(n_left), r_left)
        rows = np.hstack([left[alpha], i[:, None]])

        right, n_right = self.right[k + 1], self.dims[k]
        r_right = right.shape[0]
        j = np.tile(np.arange(n_right), r_right)
        beta = np.repeat(np.arange(r_right), n_right)
        cols = np.hstack([j[:, None], right[beta]])
        return rows, cols


def _update_bond(state: _CrossState, k: int, cached: CachedEntry, tol: float, cap: int,
                 min_rank: int) -> int:
    rows, cols = state.bond_sets(k)

    def bond_entry(ri: np.ndarray, ci: np.ndarray) -> np.ndarray:
        return cached(np.hstack([rows[ri], cols[ci]]))

    factors = aca(bond_entry, len(rows), len(cols), tol, max_rank=cap, min_rank=min_rank)
    if factors.rank == 0:
        row_pivots, col_pivots = np.array([0]), np.array([0])
    else:
        row_pivots, col_pivots = factors.row_pivots, factors.col_pivots
    state.left[k] = rows[row_pivots]
    state.right[k] = cols[col_pivots]
    return len(row_pivots)


def _assemble(state: _CrossState, cached: CachedEntry) -> TTTensor:
    dims = state.dims
    d = len(dims)
    cores = []
    for k in range(d):
        left, right = state.left[k], state.right[k + 1]
        r0, n, r1 = left.shape[0], dims[k], right.shape[0]
        alpha = np.tile(np.arange(r0), n * r1)
        i = np.tile(np.repeat(np.arange(n), r0), r1)
        beta = np.repeat(np.arange(r1), r0 * n)
        index = np.hstack([left[alpha], i[:, None], right[beta]])
        fiber = cached(index).reshape(r0 * n, r1, order="F")
        if k < d - 1:
            pl, pr = state.left[k + 1], state.right[k + 1]
            a = np.repeat(np.arange(pl.shape[0]), pr.shape[0])
            b = np.tile(np.arange(pr.shape[0]), pl.shape[0])
            pivot = cached(np.hstack([pl[a], pr[b]])).reshape(pl.shape[0], pr.shape[0])
            fiber = np.linalg.lstsq(pivot.T, fiber.T, rcond=None)[0].T
        cores.append(fiber.reshape(r0, n, r1, order="F"))
    return TTTensor(tuple(cores))


def tt_cross(entry: TensorEntry, dims: Sequence[int], tol: float = 1e-3,
             max_rank: Optional[int] = None, seed: int = 0, max_sweeps: int = 4,
             validation_size: int = 1000, recompress: bool = False,
             workers: int = 1) -> TTCrossResult:
    """Build a TT from entry samples.

    Each bond is refreshed by an ACA of its two-site unfolding restricted to
    the current pivot sets, alternating left-to-right and right-to-left. The
    relative RMS error on a held-out set of uniformly random multi-indices
    decides convergence.
    """
    dims = tuple(int(n) for n in dims)
    d = len(dims)
    if d < 2:
        raise ArgumentError("tt_cross needs at least two modes")
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    if any(n <= 0 for n in dims):
        raise ArgumentError(f"extents must be positive, got {dims}")

    rng = np.random.default_rng(seed)
    holdout = rng.integers(0, dims, size=(validation_size, d)).astype(np.int64)
    holdout_values = np.asarray(entry(holdout), dtype=np.complex128)
    holdout_norm = float(np.linalg.norm(holdout_values))

    cached = CachedEntry(entry, dims, workers)
    state = _CrossState(dims, rng)
    caps = {k: _bond_cap(dims, k, max_rank) for k in range(1, d)}
    bond_tol = tol / math.sqrt(d - 1)
    min_ranks = {k: 0 for k in range(1, d)}

    def holdout_error(tt: TTTensor) -> float:
        diff = float(np.linalg.norm(holdout_values - tt.elements(holdout)))
        return diff / holdout_norm if holdout_norm > 0 else diff

    best_tt, best_error = None, math.inf
    history: List[Tuple[int, ...]] = []
    previous_ranks, previous_error = None, math.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        for order in (range(1, d), range(d - 1, 0, -1)):
            for k in order:
                _update_bond(state, k, cached, bond_tol, caps[k], min_ranks[k])
            tt = _assemble(state, cached)
            error = holdout_error(tt)
            history.append(tt.ranks)
            logger.debug(f"TT-cross half-sweep ranks {tt.ranks} error {error:.3e}")
            if error < best_error:
                best_tt, best_error = tt, error
            if error <= tol:
                break
        ranks = state.ranks()
        logger.info(f"🔄 TT-cross sweep {sweeps}: ranks {ranks}, held-out error {best_error:.3e}, "
                    f"{cached.evaluations:,} evaluations")
        if best_error <= tol:
            break
        at_cap = [k for k, r in zip(range(1, d), ranks) if r >= caps[k]]
        capped = [k for k in at_cap if caps[k] < _unfolding_rank(dims, k)]
        if len(at_cap) == d - 1 or (ranks == previous_ranks and best_error >= previous_error):
            break
        if capped and best_error > CAPPED_PROGRESS * previous_error:
            logger.info(f"📊 TT-cross bonds {capped} at their cap limit the error; rank growth stopped")
            break
        previous_ranks, previous_error = ranks, best_error
        min_ranks = {k: min(r + 1, caps[k]) for k, r in zip(range(1, d), ranks)}

    if recompress:
        rounded = tt_round(best_tt, tol)
        logger.info(f"📊 TT-cross recompression ranks {best_tt.ranks} -> {rounded.ranks}")
        best_tt, best_error = rounded, holdout_error(rounded)

    converged = best_error <= 10 * tol
    if not converged:
        logger.warning(f"⚠️ TT-cross stopped at error {best_error:.3e} (tol {tol:g}), ranks {best_tt.ranks}")
    return TTCrossResult(
        tt=best_tt,
        converged=converged,
        error=best_error,
        evaluations=cached.evaluations,
        validation_evaluations=len(holdout),
        sweeps=sweeps,
        rank_history=history,
    )
