"""Small hand-built representations separating the diversity conditions.

All use ``theta* = [1, 1]`` and a uniform context distribution.  Each entry
lists the per-context feature rows and the set of conditions that hold.
"""
from __future__ import annotations

import numpy as np

from .core import ContextualProblem, FiniteRepresentation

THETA = np.array([1.0, 1.0])

# name -> (features (N, K, 2), conditions that hold)
SEPARATING_EXAMPLES = {
    "nonredundant_not_cmb": (
        [[[1, 1], [.5, .5]],
         [[0, 1], [1, 1]]],
        {"non_redundant"},
    ),
    "nonredundant_not_hls": (
        [[[1, 1], [.5, .5]],
         [[0, 1], [1, 1]]],
        {"non_redundant"},
    ),
    "cmb_not_hls": (
        [[[1, 1], [1, 0]],
         [[0, 1], [1, 1]]],
        {"non_redundant", "cmb"},
    ),
    "hls_not_cmb": (
        [[[2, 0], [.5, .5]],
         [[0, 2], [.5, .5]]],
        {"non_redundant", "hls"},
    ),
    "hls_cmb_not_wys": (
        [[[2, 0], [1, 0]],
         [[0, 2], [0, 1]]],
        {"non_redundant", "cmb", "hls"},
    ),
    "bbk_not_hls": (
        [[[2, 0], [0, 1]],
         [[0, 1], [2, 0]],
         [[-1, 0], [0, -2]],
         [[0, -2], [-1, 0]]],
        {"non_redundant", "cmb", "bbk"},
    ),
    "hls_bbk_not_wys": (
        [[[2, 0], [1, 0]],
         [[0, 2], [0, 1]],
         [[-1, 0], [-2, 0]],
         [[0, -1], [0, -2]]],
        {"non_redundant", "cmb", "bbk", "hls"},
    ),
    "wys_not_bbk": (
        [[[2, 0], [1, 0]],
         [[0, 2], [0, 1]],
         [[1, 0], [2, 0]],
         [[0, 1], [0, 2]]],
        {"non_redundant", "cmb", "hls", "wys"},
    ),
    "bbk_hls_wys": (
        [[[2, 0], [1, 0]],
         [[0, 2], [0, 1]],
         [[-2, 0], [-1, 0]],
         [[0, -2], [0, -1]]],
        {"non_redundant", "cmb", "bbk", "hls", "wys"},
    ),
}

# two representations that are each not HLS but jointly mixed-HLS
MIXED_PAIR = (
    [[[2, 0], [1, 0]],
     [[2, 0], [0, 1]]],
    [[[2, 0], [0, 1]],
     [[2, 0], [1, 0]]],
)


def _problem(reps_feats, labels, sigma):
    reps = [FiniteRepresentation.from_arrays(np.array(f, float), THETA, label=lab)
            for f, lab in zip(reps_feats, labels)]
    mu = reps[0].features @ THETA
    n = mu.shape[0]
    return ContextualProblem(noise_sigma=sigma, rho=np.full(n, 1.0 / n), reward_table=mu,
                             representations=reps, label=labels[0])


def separating_example(name: str, sigma: float = 0.0) -> ContextualProblem:
    """Problem carrying the single named representation."""
    if name not in SEPARATING_EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(SEPARATING_EXAMPLES)}")
    feats, _ = SEPARATING_EXAMPLES[name]
    return _problem([feats], [name], sigma)


def mixed_pair_example(sigma: float = 0.0) -> ContextualProblem:
    return _problem(list(MIXED_PAIR), ["mixed_a", "mixed_b"], sigma)
