"""
Tucker decomposition
Higher-order SVD with per-mode truncation
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np
import scipy.linalg

from VSIE.errors import ArgumentError
from VSIE.tensors.dense import DenseTensor, mode_product, unfold
from VSIE.tensors.tt import truncation_rank

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TuckerTensor:
    """Core tensor plus one orthonormal factor matrix per mode"""

    core: DenseTensor
    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.asarray(f, dtype=np.complex128) for f in self.factors)
        if len(factors) != self.core.ndim:
            raise ArgumentError(f"{len(factors)} factors for a {self.core.ndim}-mode core")
        for k, f in enumerate(factors):
            if f.ndim != 2 or f.shape[1] != self.core.dims[k]:
                raise ArgumentError(f"factor {k} has shape {f.shape}, core rank is {self.core.dims[k]}")
        object.__setattr__(self, "factors", factors)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return self.core.dims

    def full(self) -> DenseTensor:
        data = self.core.data
        for axis, factor in enumerate(self.factors):
            data = mode_product(data, factor, axis)
        return DenseTensor(data)

    def element_count(self) -> int:
        return self.core.size + int(sum(f.size for f in self.factors))

    def compression_factor(self) -> Fraction:
        dense = 1
        for n in self.dims:
            dense *= int(n)
        return Fraction(dense, self.element_count())


def tucker_hosvd(t: DenseTensor, tol: float) -> TuckerTensor:
    """HOSVD truncated per mode at tol/sqrt(d) of the Frobenius norm"""
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    d = t.ndim
    delta = tol / np.sqrt(d) * t.norm()
    factors = []
    for mode in range(1, d + 1):
        u, s, _ = scipy.linalg.svd(unfold(t, mode), full_matrices=False, lapack_driver="gesvd")
        r = truncation_rank(s, delta) if delta > 0 else 1
        factors.append(u[:, :r])

    core = t.data
    for axis, factor in enumerate(factors):
        core = mode_product(core, factor.conj().T, axis)
    result = TuckerTensor(DenseTensor(core), tuple(factors))
    logger.debug(f"HOSVD ranks {result.ranks} for dims {t.dims}")
    return result
