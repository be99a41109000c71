"""
Solver settings
Resolved tolerances and modes for one run (environment < scene document < command line)
"""
from dataclasses import dataclass, fields, replace
from typing import Any, Dict

from VSIE.errors import ArgumentError
from VSIE.operators.hybrid import SURFACE_SCALINGS
from VSIE.solvers.gmres import GmresConfig


@dataclass(frozen=True)
class SolverSettings:
    tol_gmres: float = 1e-5
    restart: int = 50
    max_cycles: int = 100
    tol_tt: float = 1e-3
    tol_aca: float = 1e-3
    tol_tucker: float = 1e-5
    seed: int = 0
    workers: int = 1
    dense_limit: int = 20000
    coupling_mode: str = "tt"
    near_mode: str = "pfft"
    stencil: int = 5
    extend: bool = False
    recompress: bool = False
    surface_scaling: str = "block"

    def __post_init__(self):
        for name in ("tol_gmres", "tol_tt", "tol_aca", "tol_tucker"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.workers < 1:
            raise ArgumentError(f"workers must be at least 1, got {self.workers}")
        if self.surface_scaling not in SURFACE_SCALINGS:
            raise ArgumentError(f"surface_scaling must be one of {SURFACE_SCALINGS}, "
                                f"got '{self.surface_scaling}'")

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "SolverSettings":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known and v is not None})

    def with_overrides(self, **overrides) -> "SolverSettings":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def gmres_config(self) -> GmresConfig:
        return GmresConfig(tol=self.tol_gmres, restart=self.restart, max_cycles=self.max_cycles)
