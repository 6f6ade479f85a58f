"""Optimal kernel-based dynamic mode decomposition.

Learns the optimal rank-k linear operator on a kernel feature space from
snapshot pairs, using Gram matrices only, and maps reduced-model
predictions back to the state space by solving a pre-image problem.
Kernel DMD and low-rank DMD are included as baselines.
"""

from . import baselines, core, harness, kernels, linalg, oracle, preimage, synthgen
from .baselines import kdmd_fit, kdmd_predict, lowrank_dmd_fit
from .core import ReducedModel, SnapshotSet, fit, predict
from .estimators import KDMD, OKDMD, LowRankDMD
from .exceptions import (
    CapabilityError,
    CapacityError,
    ConjugacyWarning,
    DegenerateEigenpairError,
    DomainError,
    GenerationError,
    HorizonOverflowError,
    InvalidInputError,
    NumericalFailureError,
    OKDMDError,
    RankDeficiencyWarning,
)
from .kernels import Gaussian, Linear, Logarithmic, Polynomial, parse_kernel

__version__ = "0.1.0"
