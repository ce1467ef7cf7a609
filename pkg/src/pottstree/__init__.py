"""Splitting Gibbs measures of the ferromagnetic Potts model on Cayley trees with an external field."""

import os as _os

# POTTS_THREADS caps BLAS/OpenMP threads; it only works if set before numpy loads.
if _os.environ.get("POTTS_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["POTTS_THREADS"])

from .freetree import Ball, GroupWord, build_ball, multiply, successors, translate
from .model import GbcAssignment, ModelParams, exact_ball_measure, f_map

__all__ = [
    "Ball",
    "GroupWord",
    "build_ball",
    "multiply",
    "successors",
    "translate",
    "GbcAssignment",
    "ModelParams",
    "exact_ball_measure",
    "f_map",
]
