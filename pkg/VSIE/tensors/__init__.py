"""
Tensor kit: dense tensors, TT, Tucker and ACA compression
"""
from VSIE.tensors.aca import LowRankFactors, aca, sampled_error
from VSIE.tensors.dense import DenseTensor, fold, unfold
from VSIE.tensors.tt import TTTensor, tt_apply, tt_apply_transpose, tt_round, tt_svd
from VSIE.tensors.tt_cross import TTCrossResult, tt_cross
from VSIE.tensors.tucker import TuckerTensor, tucker_hosvd

__all__ = [
    "DenseTensor", "fold", "unfold",
    "TTTensor", "tt_svd", "tt_round", "tt_apply", "tt_apply_transpose",
    "TTCrossResult", "tt_cross",
    "TuckerTensor", "tucker_hosvd",
    "LowRankFactors", "aca", "sampled_error",
]
