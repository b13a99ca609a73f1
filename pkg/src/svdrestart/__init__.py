"""Truncated eigendecompositions of evolving sparse symmetric matrices with
restarts triggered by a provable lower bound on the minimum rank-k loss."""

__version__ = "0.1.0"

from .bound import MonitorState, NablaOperator, delta_tr2, lower_bound, loss_update_delta, loss_update_rows
from .engine import (
    LWI2,
    FirstOrderPerturb,
    HeuFL,
    HeuFT,
    Hold,
    RunRecord,
    RunResult,
    Timers,
    run,
)
from .lanczos import EigenSolverError, lanczos_eigsh
from .spectral import (
    DeltaMatrix,
    SimilarityFn,
    SpectralFactors,
    SymSparseMatrix,
    min_loss,
    reconstruction_loss,
    topk_eigs,
)
from .stream import SliceStream, SyntheticSpec, generate, load_events, slice_events

__all__ = [
    "DeltaMatrix",
    "EigenSolverError",
    "FirstOrderPerturb",
    "HeuFL",
    "HeuFT",
    "Hold",
    "LWI2",
    "MonitorState",
    "NablaOperator",
    "RunRecord",
    "RunResult",
    "SimilarityFn",
    "SliceStream",
    "SpectralFactors",
    "SymSparseMatrix",
    "SyntheticSpec",
    "Timers",
    "delta_tr2",
    "generate",
    "lanczos_eigsh",
    "load_events",
    "loss_update_delta",
    "loss_update_rows",
    "lower_bound",
    "min_loss",
    "reconstruction_loss",
    "run",
    "slice_events",
    "topk_eigs",
]
