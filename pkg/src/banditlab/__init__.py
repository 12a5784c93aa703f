"""Linear contextual bandits: diversity conditions, representation
construction, LinUCB-family learners and a reproducible experiment harness."""

from .core import (ContextualProblem, ContinuousRepresentation, FiniteRepresentation,
                   HalfDiscContexts, gap_profile, load_problem, save_problem)
from .diversity import (check_condition, check_mixed_hls, diversity_report,
                        min_nonzero_eig, moment_matrix)
from .harness import ExperimentConfig, make_stream, run_experiment, simulate
from .learners import Exp4IX, GlrBai, Leader, LinUCB, RegBal, RlsState
from .repgen import apply_transform, build_hls_from_reward, preset_representation_set

__version__ = "0.1.0"
__all__ = [
    "ContextualProblem", "ContinuousRepresentation", "FiniteRepresentation",
    "HalfDiscContexts", "gap_profile", "load_problem", "save_problem",
    "check_condition", "check_mixed_hls", "diversity_report", "min_nonzero_eig",
    "moment_matrix", "ExperimentConfig", "make_stream", "run_experiment", "simulate",
    "Exp4IX", "GlrBai", "Leader", "LinUCB", "RegBal", "RlsState", "apply_transform",
    "build_hls_from_reward",
    "preset_representation_set",
]
