"""
Solve reports
Iteration, residual, timing and compression statistics of one solve
"""
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

REPORT_KEYS = ("iterations", "residual", "wall_ms", "cf_coupling", "cf_kernels", "entry_evals", "rel_diff_ref")
EXTRA_KEYS = ("cycles", "converged", "cf_fn", "aca_evals", "tt_max_rank",
              "residual_far", "residual_near", "residual_body", "absorbed_power",
              "direct_check", "direct_residual", "method")


@dataclass
class SolveReport:
    iterations: int = 0
    cycles: int = 0
    residual: float = float("nan")
    converged: bool = False
    wall_ms: float = 0.0
    residual_history: List[float] = field(default_factory=list)
    cf_coupling: Optional[Fraction] = None
    cf_kernels: Optional[Fraction] = None
    cf_fn: Optional[Fraction] = None
    entry_evals: int = 0
    aca_evals: int = 0
    tt_max_rank: int = 0
    rel_diff_ref: Optional[float] = None
    residual_far: Optional[float] = None
    residual_near: Optional[float] = None
    residual_body: Optional[float] = None
    absorbed_power: Optional[float] = None
    direct_check: Optional[float] = None
    direct_residual: Optional[float] = None
    method: str = "hybrid"

    def to_dict(self) -> Dict:
        return asdict(self)

    def fields(self, include_wall_time: bool = True) -> Dict[str, str]:
        """Ordered key=value strings for the report file"""
        out = {}
        for key in REPORT_KEYS + EXTRA_KEYS:
            if key == "wall_ms" and not include_wall_time:
                continue
            out[key] = format_value(getattr(self, key))
        return out


def format_value(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return f"{float(value):.6g}"
    if isinstance(value, float):
        return f"{value:.6e}"
    return str(value)
