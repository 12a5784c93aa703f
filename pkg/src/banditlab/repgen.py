"""Building, transforming and degrading linear representations.

Transforms keep the reward function intact: every output reproduces the
input's rewards.  The preset sets are assembled from a random base problem
with a 6-dimensional realizable representation (``orig``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (ConstructionError, ContextualProblem, ContinuousRepresentation,
                   FiniteRepresentation, HalfDiscContexts, optimal_arms)
from .diversity import check_condition

DET_MIN = 1e-6
SPEC_DET_MIN = 1e-9


# ---------------------------------------------------------------------------
# transform specs


@dataclass(frozen=True)
class InvertibleLinear:
    """``phi -> A^T phi`` and ``theta -> A^{-1} theta``."""
    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("transform matrix must be square")
        if abs(np.linalg.det(a)) <= SPEC_DET_MIN:
            raise ValueError("transform matrix is singular")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)


@dataclass(frozen=True)
class Derank:
    """Collapse leading optimal rows so the optimal moment has rank <= k."""
    target_rank: int


@dataclass(frozen=True)
class MergeFeatures:
    """Replace each group of coordinates by its theta-weighted sum.

    Kept coordinates come first (in order), merged ones follow in group
    order, each with parameter entry 1.
    """
    groups: tuple


@dataclass(frozen=True)
class Normalize:
    """Rescale so that ``||theta|| = 1``."""


@dataclass(frozen=True)
class MixSplit:
    """Average coordinates ``j`` and ``k`` on optimal rows.

    Both coordinates are set to ``(theta_j phi_j + theta_k phi_k) /
    (theta_j + theta_k)``, which keeps rewards unchanged.  ``extra_contexts``
    also applies the averaging to the non-optimal arms of those contexts.
    """
    pair: tuple
    extra_contexts: tuple = ()


def _rebuild(rep: FiniteRepresentation, feats, param, label=None, misspec="keep"):
    f = rep.misspec if misspec == "keep" else misspec
    return FiniteRepresentation.from_arrays(feats, param, misspec=f,
                                            label=rep.label if label is None else label)


def _require_realizable(rep, what):
    if not rep.realizable:
        raise ValueError(f"{what} needs a realizable representation")


def _derank_order(problem: ContextualProblem) -> np.ndarray:
    # support contexts by descending probability, ties by index
    supp = problem.support
    return supp[np.lexsort((supp, -problem.rho[supp]))]


def apply_transform(rep: FiniteRepresentation, problem: ContextualProblem,
                    spec) -> FiniteRepresentation:
    """Apply one transform; the output is equivalent to ``rep``."""
    feats = rep.features
    theta = rep.param
    if isinstance(spec, InvertibleLinear):
        a = spec.matrix
        if a.shape[0] != rep.dim:
            raise ValueError("transform matrix has the wrong size")
        return _rebuild(rep, feats @ a, np.linalg.solve(a, theta))

    if isinstance(spec, Normalize):
        s = float(np.linalg.norm(theta))
        if s == 0:
            raise ValueError("cannot normalize a zero parameter")
        return FiniteRepresentation(feats * s, theta / s, rep.feature_bound * s, 1.0,
                                    rep.misspec, rep.label)

    if isinstance(spec, Derank):
        _require_realizable(rep, "derank")
        k = int(spec.target_rank)
        if not 1 <= k < rep.dim:
            raise ValueError(f"target rank must be in [1, {rep.dim - 1}]")
        order = _derank_order(problem)
        q = order.size - k + 1
        if q <= 0:
            return rep
        rows = order[:q]
        arms, _ = optimal_arms(problem.reward_table)
        phi_q = feats[rows, arms[rows]]
        mu_q = phi_q @ theta
        nrm = float(mu_q @ mu_q)
        if nrm == 0:
            raise ConstructionError("optimal rewards of the collapsed rows are all zero")
        out = np.array(feats)
        out[rows, arms[rows]] = np.outer(mu_q, mu_q) @ phi_q / nrm
        return _rebuild(rep, out, theta)

    if isinstance(spec, MergeFeatures):
        _require_realizable(rep, "merging")
        groups = [tuple(int(j) for j in g) for g in spec.groups]
        flat = [j for g in groups for j in g]
        if len(set(flat)) != len(flat) or any(not 0 <= j < rep.dim for j in flat):
            raise ValueError("merge groups must be disjoint coordinate subsets")
        keep = [j for j in range(rep.dim) if j not in set(flat)]
        cols = [feats[..., keep]]
        cols += [(feats[..., list(g)] @ theta[list(g)])[..., None] for g in groups]
        new_theta = np.concatenate([theta[keep], np.ones(len(groups))])
        return _rebuild(rep, np.concatenate(cols, axis=-1), new_theta)

    if isinstance(spec, MixSplit):
        _require_realizable(rep, "mixing")
        j, k = (int(i) for i in spec.pair)
        if j == k or not (0 <= j < rep.dim and 0 <= k < rep.dim):
            raise ValueError("mix pair must be two distinct coordinates")
        w = theta[j] + theta[k]
        if abs(w) < 1e-12:
            raise ConstructionError("theta_j + theta_k vanishes; pick another pair")
        out = np.array(feats)
        arms, _ = optimal_arms(problem.reward_table)
        mask = np.zeros(feats.shape[:2], dtype=bool)
        mask[np.arange(rep.n_contexts), arms] = True
        mask[list(spec.extra_contexts), :] = True
        avg = (theta[j] * feats[..., j] + theta[k] * feats[..., k]) / w
        out[..., j] = np.where(mask, avg, feats[..., j])
        out[..., k] = np.where(mask, avg, feats[..., k])
        return _rebuild(rep, out, theta)

    raise ValueError(f"unknown transform {spec!r}")


def apply_transforms(rep, problem, specs: Sequence) -> FiniteRepresentation:
    for s in specs:
        rep = apply_transform(rep, problem, s)
    return rep


def derank_keeps_nonredundancy(rep: FiniteRepresentation, problem: ContextualProblem) -> bool:
    """Whether the non-optimal features of ``rep`` span the whole space."""
    arms, _ = optimal_arms(problem.reward_table)
    mask = np.ones(rep.features.shape[:2], dtype=bool)
    mask[np.arange(rep.n_contexts), arms] = False
    mask[problem.rho == 0] = False
    return np.linalg.matrix_rank(rep.features[mask]) == rep.dim


def random_invertible(d: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal matrix, resampled while ``|det| < 1e-6``."""
    while True:
        a = rng.standard_normal((d, d))
        if abs(np.linalg.det(a)) >= DET_MIN:
            return a


def scramble(rep, problem, rng, label=None) -> FiniteRepresentation:
    """Random invertible transform followed by normalization."""
    out = apply_transforms(rep, problem, [InvertibleLinear(random_invertible(rep.dim, rng)),
                                          Normalize()])
    if label is not None:
        out = FiniteRepresentation(out.features, out.param, out.feature_bound,
                                   out.param_bound, out.misspec, label)
    return out


# ---------------------------------------------------------------------------
# constructions


def build_hls_from_reward(problem: ContextualProblem, d: int,
                          label: str = "hls_from_reward") -> FiniteRepresentation:
    """HLS representation built directly from the reward table.

    The first coordinate is the reward itself, coordinates ``2..d`` are
    scaled indicators of ``d - 1`` further contexts; ``theta = e_1``.  The
    anchor is the supported context with the largest ``|mu*|``.
    """
    if d < 1:
        raise ValueError("d must be positive")
    mu = problem.reward_table
    mu_star = mu.max(axis=1)
    supp = _derank_order(problem)
    if supp.size < d:
        raise ConstructionError(f"need {d} supported contexts, have {supp.size}")
    if not np.any(mu_star[supp] != 0):
        raise ConstructionError("all optimal rewards are zero")
    anchor = supp[np.argmax(np.abs(mu_star[supp]))]
    others = [x for x in supp if x != anchor][:d - 1]
    scale = 2.0 * float(np.abs(mu_star[supp]).max())
    n, k = mu.shape
    feats = np.zeros((n, k, d))
    feats[..., 0] = mu
    for j, x in enumerate(others, start=1):
        feats[x, :, j] = scale
    theta = np.zeros(d)
    theta[0] = 1.0
    return FiniteRepresentation.from_arrays(feats, theta, label=label)


def random_problem(n_contexts: int, n_arms: int, d: int, rng: np.random.Generator,
                   sigma: float = 0.3, max_tries: int = 100):
    """Random problem with an HLS representation ``orig``.

    Features are i.i.d. standard normal, the parameter is uniform on the cube
    and normalized, contexts are uniform.  Regenerates on the (measure-zero)
    non-HLS draws.
    """
    if min(n_contexts, n_arms, d) < 1:
        raise ValueError("sizes must be positive")
    rho = np.full(n_contexts, 1.0 / n_contexts)
    for _ in range(max_tries):
        feats = rng.standard_normal((n_contexts, n_arms, d))
        theta = rng.uniform(-1.0, 1.0, d)
        theta /= np.linalg.norm(theta)
        mu = feats @ theta
        rep = FiniteRepresentation.from_arrays(feats, theta, label="orig")
        prob = ContextualProblem(noise_sigma=sigma, rho=rho, reward_table=mu,
                                 representations=[rep])
        if check_condition(rep, prob, "hls")[0]:
            return prob, rep
    raise ConstructionError("no HLS draw found")


def least_squares_fit(features: np.ndarray, mu: np.ndarray, label: str) -> FiniteRepresentation:
    """Best linear fit of ``mu``; the residual becomes the misspecification."""
    flat = features.reshape(-1, features.shape[-1])
    theta, *_ = np.linalg.lstsq(flat, mu.ravel(), rcond=None)
    resid = mu - features @ theta
    return FiniteRepresentation.from_arrays(features, theta, misspec=resid, label=label)


# ---------------------------------------------------------------------------
# presets

BASE_SIZES = (20, 5, 6)
PRESETS = ("fig1", "vardim", "mixing", "continuous", "misspec_toy")


def _base(seed: int, sigma: float = 0.3):
    rng = np.random.default_rng(seed)
    prob, orig = random_problem(*BASE_SIZES, rng, sigma=sigma)
    return prob, orig, rng


def _fig1(seed):
    prob, orig, rng = _base(seed)
    reps = [scramble(orig, prob, rng, "hls_rank6")]
    for k in range(5, 0, -1):
        low = apply_transform(orig, prob, Derank(k))
        reps.append(scramble(low, prob, rng, f"derank_rank{k}"))
    meta = {"hls": [r.label for r in reps[:1]]}
    return prob, reps, meta


def _vardim_reps(prob, orig, rng):
    reps = [orig]
    groups = {}
    for dim in range(2, orig.dim + 1):
        group = tuple(range(dim - 1, orig.dim))
        merged = apply_transform(orig, prob, MergeFeatures((group,)))
        low = apply_transform(merged, prob, Derank(1))
        reps.append(scramble(low, prob, rng, f"dim{dim}_rank1"))
        groups[f"dim{dim}_rank1"] = [list(group)]
    return reps, groups


def _vardim(seed):
    prob, orig, rng = _base(seed)
    reps, groups = _vardim_reps(prob, orig, rng)
    return prob, reps, {"merge_groups": groups, "hls": ["orig"]}


def mixing_pairs(theta: np.ndarray) -> list[tuple[int, int]]:
    """Cyclic coordinate pairs maximizing the smallest ``|theta_j + theta_k|``."""
    d = theta.size
    best, best_val = None, -np.inf
    for perm in itertools.permutations(range(1, d)):
        cyc = (0,) + perm
        pairs = [(cyc[i], cyc[(i + 1) % d]) for i in range(d)]
        val = min(abs(theta[j] + theta[k]) for j, k in pairs)
        if val > best_val + 1e-15:
            best, best_val = pairs, val
    return best


def _mixing(seed):
    prob, orig, rng = _base(seed)
    pairs = mixing_pairs(orig.param)
    m = len(pairs)
    reps = []
    for i, pair in enumerate(pairs):
        extra = tuple(x for x in range(prob.n_contexts) if x % m == i)
        mixed = apply_transform(orig, prob, MixSplit(pair, extra))
        reps.append(scramble(mixed, prob, rng, f"mix{i}_{pair[0]}{pair[1]}"))
    meta = {"mix_pairs": [list(p) for p in pairs], "mix_context_groups": m}
    return prob, reps, meta


def _continuous(seed):
    sampler = HalfDiscContexts()
    reps = [
        ContinuousRepresentation("halfdisc_phi1", 2, np.ones(2), 1.0, float(np.sqrt(2)),
                                 label="phi1"),
        ContinuousRepresentation("halfdisc_phi2", 3, np.ones(3), float(np.sqrt(3)),
                                 float(np.sqrt(3)), label="phi2"),
    ]
    prob = ContextualProblem(noise_sigma=0.2, sampler=sampler, representations=reps)
    return prob, reps, {"hls": ["phi2"]}


def _misspec_toy(seed):
    prob, orig, rng = _base(seed)
    reps, groups = _vardim_reps(prob, orig, rng)
    mu = prob.reward_table
    n, k, d = orig.features.shape
    cands = [
        (orig.features[..., : d // 2], "trunc_half"),
        (orig.features[..., : d // 3], "trunc_third"),
        (rng.standard_normal((n, k, 3)), "random3"),
        (rng.standard_normal((n, k, 9)), "random9"),
    ]
    for feats, label in cands:
        fit = least_squares_fit(feats, mu, label)
        reps.append(apply_transform(fit, prob, Normalize()))
    eps = {r.label: r.misspec_level for r in reps}
    return prob, reps, {"merge_groups": groups, "misspec": eps, "hls": ["orig"]}


_BUILDERS = {"fig1": _fig1, "vardim": _vardim, "mixing": _mixing,
             "continuous": _continuous, "misspec_toy": _misspec_toy}


# First base seed whose problem has minimum gap >= DEFAULT_MIN_GAP; chosen by
# an instance property so that the defaults do not depend on simulated results.
DEFAULT_MIN_GAP = 0.1
DEFAULT_SEED = 5


def first_seed_with_gap(min_gap: float = DEFAULT_MIN_GAP, max_tries: int = 1000) -> int:
    """Smallest base seed whose random problem has minimum gap ``>= min_gap``."""
    from .core import gap_profile
    for seed in range(max_tries):
        prob, _, _ = _base(seed)
        if gap_profile(prob).min_gap >= min_gap:
            return seed
    raise ConstructionError(f"no seed below {max_tries} reaches gap {min_gap}")


def preset_representation_set(name: str, seed: int = DEFAULT_SEED):
    """Build a named experiment problem; returns ``(problem, reps)``.

    The returned problem carries ``reps`` and generation metadata.
    """
    if name not in _BUILDERS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    prob, reps, meta = _BUILDERS[name](seed)
    meta = dict(meta, preset=name, seed=seed)
    prob = prob.with_representations(reps, label=name, metadata=meta)
    return prob, list(prob.representations)
