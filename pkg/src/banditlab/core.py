"""Problems, representations, sampling and gap structure.

A finite problem is a context distribution ``rho`` over ``N`` contexts, a
reward table ``mu`` of shape ``(N, K)`` and a Gaussian noise scale.  A
representation pairs a feature tensor ``(N, K, d)`` with a parameter vector
such that ``features @ param (+ misspec)`` reproduces ``mu``.

Continuous problems are described by a named context sampler (currently only
the half-disc preset) so they stay serializable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

EXACT_TOL = 1e-12
SUM_TOL = 1e-9

FORMAT_NAME = "banditlab-problem"
FORMAT_VERSION = 1


class BanditLabError(Exception):
    """Base class for library errors."""


class UnsupportedOperation(BanditLabError):
    """Raised when an operation is not defined for the given problem type."""


class ConstructionError(BanditLabError):
    """Raised when a representation cannot be built from the given inputs."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteRepresentation:
    """Linear representation of a finite contextual problem.

    ``features[x, a]`` is the feature vector of context ``x`` and arm ``a``;
    the predicted reward is ``features[x, a] @ param + misspec[x, a]``.
    """

    features: np.ndarray
    param: np.ndarray
    feature_bound: float
    param_bound: float
    misspec: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        feats = _frozen(self.features)
        if feats.ndim != 3:
            raise ValueError(f"features must have shape (N, K, d), got {feats.shape}")
        param = _frozen(self.param).reshape(-1)
        if param.shape[0] != feats.shape[2]:
            raise ValueError("param length does not match feature dimension")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "param", param)
        if self.misspec is not None:
            f = _frozen(self.misspec)
            if f.shape != feats.shape[:2]:
                raise ValueError("misspec table must have shape (N, K)")
            object.__setattr__(self, "misspec", f)
        L = float(self.feature_bound)
        S = float(self.param_bound)
        if not L > 0:
            raise ValueError("feature_bound must be positive")
        if S < 1.0:
            raise ValueError("param_bound must be >= 1")
        norms = np.linalg.norm(feats, axis=2)
        if norms.max(initial=0.0) > L + EXACT_TOL * max(1.0, L):
            raise ValueError(f"feature norm {norms.max():.6g} exceeds bound {L:.6g}")
        if np.linalg.norm(param) > S + EXACT_TOL * S:
            raise ValueError("parameter norm exceeds param_bound")
        object.__setattr__(self, "feature_bound", L)
        object.__setattr__(self, "param_bound", S)

    @classmethod
    def from_arrays(cls, features, param, *, misspec=None, label="",
                    feature_bound=None, param_bound=None) -> "FiniteRepresentation":
        """Build a representation with bounds inferred from the data.

        ``L`` defaults to the largest feature norm (1 for all-zero features)
        and ``S`` to ``max(1, ||param||)``.
        """
        feats = np.asarray(features, dtype=float)
        param = np.asarray(param, dtype=float).reshape(-1)
        if feature_bound is None:
            feature_bound = float(np.linalg.norm(feats, axis=2).max(initial=0.0))
            if feature_bound == 0.0:
                feature_bound = 1.0
        if param_bound is None:
            param_bound = max(1.0, float(np.linalg.norm(param)))
        return cls(feats, param, feature_bound, param_bound, misspec, label)

    @property
    def n_contexts(self) -> int:
        return self.features.shape[0]

    @property
    def n_arms(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def realizable(self) -> bool:
        return self.misspec is None or not np.any(self.misspec)

    @property
    def misspec_level(self) -> float:
        """Sup-norm of the misspecification table (``epsilon``)."""
        if self.misspec is None:
            return 0.0
        return float(np.abs(self.misspec).max())

    def predicted_rewards(self) -> np.ndarray:
        mu = self.features @ self.param
        if self.misspec is not None:
            mu = mu + self.misspec
        return mu


# ---------------------------------------------------------------------------
# continuous contexts


@dataclass(frozen=True)
class HalfDiscContexts:
    """Uniform contexts on the lower half of the unit disc, four binary arms.

    Arms are the vectors ``[0,0], [0,1], [1,0], [1,1]`` and the reward is
    ``x1*a1 + x2*a2``.
    """

    n_samples: int = 100_000
    name: str = "half_disc"

    arm_vectors = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])

    @property
    def n_arms(self) -> int:
        return 4

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if size is None:
            size = ()
        elif np.isscalar(size):
            size = (int(size),)
        else:
            size = tuple(size)
        r = np.sqrt(rng.random(size))
        ang = np.pi + np.pi * rng.random(size)
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)

    def reward(self, x: np.ndarray) -> np.ndarray:
        """Mean rewards for contexts ``x`` of shape ``(..., 2)``, returns ``(..., 4)``."""
        x = np.asarray(x, dtype=float)
        return x @ self.arm_vectors.T

    def to_dict(self) -> dict:
        return {"name": self.name, "n_samples": self.n_samples}


def _halfdisc_phi1(x: np.ndarray) -> np.ndarray:
    arms = HalfDiscContexts.arm_vectors
    x = np.asarray(x, dtype=float)[..., None, :]
    return x * arms


def _halfdisc_phi2(x: np.ndarray) -> np.ndarray:
    arms = HalfDiscContexts.arm_vectors
    x = np.asarray(x, dtype=float)[..., None, :]
    sel = x * arms - x
    tot = np.broadcast_to(x.sum(axis=-1, keepdims=True), sel.shape[:-1] + (1,))
    return np.concatenate([sel, tot], axis=-1)


FEATURE_MAPS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "halfdisc_phi1": _halfdisc_phi1,
    "halfdisc_phi2": _halfdisc_phi2,
}


@dataclass(frozen=True, eq=False)
class ContinuousRepresentation:
    """Named feature map over continuous contexts."""

    map_name: str
    dim: int
    param: np.ndarray
    feature_bound: float
    param_bound: float
    label: str = ""

    def __post_init__(self):
        if self.map_name not in FEATURE_MAPS:
            raise ValueError(f"unknown feature map {self.map_name!r}")
        object.__setattr__(self, "param", _frozen(self.param).reshape(-1))
        if self.param.shape[0] != self.dim:
            raise ValueError("param length does not match dim")

    realizable = True
    misspec = None

    def feature_map(self, x: np.ndarray) -> np.ndarray:
        """Features of all arms, shape ``(..., K, d)``."""
        return FEATURE_MAPS[self.map_name](x)


Representation = Union[FiniteRepresentation, ContinuousRepresentation]


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True, eq=False)
class ContextualProblem:
    """A contextual bandit problem with attached candidate representations.

    Exactly one of ``rho`` (finite contexts, together with ``reward_table``)
    or ``sampler`` (continuous contexts) is set.
    """

    noise_sigma: float
    rho: Optional[np.ndarray] = None
    reward_table: Optional[np.ndarray] = None
    sampler: Optional[HalfDiscContexts] = None
    representations: tuple = ()
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        object.__setattr__(self, "representations", tuple(self.representations))
        if self.sampler is None:
            if self.rho is None or self.reward_table is None:
                raise ValueError("finite problems need rho and reward_table")
            rho = _frozen(self.rho).reshape(-1)
            mu = _frozen(self.reward_table)
            if mu.ndim != 2 or mu.shape[0] != rho.shape[0]:
                raise ValueError("reward_table must have shape (N, K) matching rho")
            if np.any(rho < 0) or abs(rho.sum() - 1.0) > EXACT_TOL * max(1, rho.size):
                raise ValueError("rho must be a probability vector")
            object.__setattr__(self, "rho", rho)
            object.__setattr__(self, "reward_table", mu)
            for rep in self.representations:
                if not isinstance(rep, FiniteRepresentation):
                    raise ValueError("finite problems take FiniteRepresentation only")
                if rep.features.shape[:2] != mu.shape:
                    raise ValueError(f"representation {rep.label!r} has wrong (N, K)")
                err = np.abs(rep.predicted_rewards() - mu).max()
                if err > SUM_TOL:
                    raise ValueError(
                        f"representation {rep.label!r} does not reproduce mu (err {err:.3g})")
        else:
            if self.rho is not None or self.reward_table is not None:
                raise ValueError("continuous problems take a sampler only")

    @property
    def is_finite(self) -> bool:
        return self.sampler is None

    @property
    def n_arms(self) -> int:
        return self.reward_table.shape[1] if self.is_finite else self.sampler.n_arms

    @property
    def n_contexts(self) -> int:
        if not self.is_finite:
            raise UnsupportedOperation("continuous problems have no context count")
        return self.rho.shape[0]

    @property
    def support(self) -> np.ndarray:
        """Indices of contexts with positive probability."""
        return np.flatnonzero(self.rho > 0)

    def with_representations(self, reps: Sequence[Representation],
                             **changes) -> "ContextualProblem":
        kw = dict(noise_sigma=self.noise_sigma, rho=self.rho, reward_table=self.reward_table,
                  sampler=self.sampler, representations=tuple(reps), label=self.label,
                  metadata=dict(self.metadata))
        kw.update(changes)
        return ContextualProblem(**kw)


def reward(problem: ContextualProblem, rep_index: int, context, arm: int) -> float:
    """Mean reward predicted by representation ``rep_index`` at ``(context, arm)``."""
    if not 0 <= rep_index < len(problem.representations):
        raise IndexError(f"representation index {rep_index} out of range")
    if not 0 <= arm < problem.n_arms:
        raise IndexError(f"arm {arm} out of range")
    rep = problem.representations[rep_index]
    if problem.is_finite:
        if not 0 <= int(context) < problem.n_contexts:
            raise IndexError(f"context {context} out of range")
        phi = rep.features[int(context), arm]
        f = 0.0 if rep.misspec is None else rep.misspec[int(context), arm]
        return float(phi @ rep.param + f)
    phi = rep.feature_map(np.asarray(context, dtype=float))[arm]
    return float(phi @ rep.param)


def sample_contexts(problem: ContextualProblem, rng: np.random.Generator, size):
    """Draw contexts: indices (inverse CDF on ``rho``) or sampler vectors."""
    if problem.is_finite:
        cdf = np.cumsum(problem.rho)
        u = rng.random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), problem.n_contexts - 1)
    return problem.sampler.sample(rng, size)


def mean_rewards(problem: ContextualProblem, contexts) -> np.ndarray:
    """Mean reward of every arm for the given contexts, shape ``(..., K)``."""
    if problem.is_finite:
        return problem.reward_table[np.asarray(contexts)]
    return problem.sampler.reward(contexts)


def sample_round(problem: ContextualProblem, rng: np.random.Generator):
    """Draw one context and return it with a noisy-reward callable.

    The callable maps an arm to ``mu(x, a) + sigma * z`` with ``z`` standard
    normal drawn from ``rng``.
    """
    ctx = sample_contexts(problem, rng, None)
    if problem.is_finite:
        ctx = int(ctx)
    means = mean_rewards(problem, ctx)

    def pull(arm: int) -> float:
        if not 0 <= arm < problem.n_arms:
            raise IndexError(f"arm {arm} out of range")
        noise = problem.noise_sigma * rng.standard_normal() if problem.noise_sigma > 0 else 0.0
        return float(means[arm] + noise)

    return ctx, pull


@dataclass(frozen=True, eq=False)
class GapProfile:
    gaps: np.ndarray
    min_gap: float
    max_gap: float
    optimal_arm: np.ndarray
    tie_flags: np.ndarray

    def __post_init__(self):
        for name in ("gaps", "optimal_arm", "tie_flags"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def optimal_arms(mu: np.ndarray, tol: float = EXACT_TOL):
    """Canonical optimal arm (lowest index within ``tol``) and tie flags per row."""
    mu = np.asarray(mu, dtype=float)
    best = mu.max(axis=-1, keepdims=True)
    near = mu >= best - tol
    return np.argmax(near, axis=-1), near.sum(axis=-1) > 1


def gap_profile(problem: ContextualProblem, tol: float = EXACT_TOL) -> GapProfile:
    """Exact gap structure of a finite problem."""
    if not problem.is_finite:
        raise UnsupportedOperation("gaps are not enumerable for continuous contexts")
    mu = problem.reward_table
    gaps = mu.max(axis=1, keepdims=True) - mu
    arms, ties = optimal_arms(mu, tol)
    supp = problem.rho > 0
    if np.any(ties & supp):
        min_gap = 0.0
    else:
        pos = gaps[supp]
        pos = pos[pos > tol]
        min_gap = float(pos.min()) if pos.size else math.inf
    return GapProfile(gaps=gaps, min_gap=min_gap, max_gap=float(gaps.max()),
                      optimal_arm=arms, tie_flags=ties)


# ---------------------------------------------------------------------------
# serialization


def _pack(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel(order="C")]}


def _unpack(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"], order="C")


def problem_to_dict(problem: ContextualProblem) -> dict:
    out = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "label": problem.label,
           "noise_sigma": problem.noise_sigma, "metadata": problem.metadata}
    reps = []
    if problem.is_finite:
        out["kind"] = "finite"
        out["rho"] = _pack(problem.rho)
        out["reward"] = _pack(problem.reward_table)
        for rep in problem.representations:
            reps.append({
                "label": rep.label,
                "features": _pack(rep.features),
                "param": _pack(rep.param),
                "feature_bound": rep.feature_bound,
                "param_bound": rep.param_bound,
                "misspec": None if rep.misspec is None else _pack(rep.misspec),
            })
    else:
        out["kind"] = "continuous"
        out["sampler"] = problem.sampler.to_dict()
        for rep in problem.representations:
            reps.append({
                "label": rep.label, "map": rep.map_name, "dim": rep.dim,
                "param": _pack(rep.param), "feature_bound": rep.feature_bound,
                "param_bound": rep.param_bound,
            })
    out["representations"] = reps
    return out


def problem_from_dict(d: dict) -> ContextualProblem:
    if d.get("format") != FORMAT_NAME:
        raise ValueError("not a banditlab problem file")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported problem file version {d.get('version')}")
    if d["kind"] == "finite":
        reps = [FiniteRepresentation(_unpack(r["features"]), _unpack(r["param"]),
                                     r["feature_bound"], r["param_bound"],
                                     None if r["misspec"] is None else _unpack(r["misspec"]),
                                     r["label"])
                for r in d["representations"]]
        return ContextualProblem(noise_sigma=d["noise_sigma"], rho=_unpack(d["rho"]),
                                 reward_table=_unpack(d["reward"]), representations=reps,
                                 label=d.get("label", ""), metadata=d.get("metadata", {}))
    if d["kind"] == "continuous":
        s = d["sampler"]
        if s["name"] != "half_disc":
            raise ValueError(f"unknown sampler {s['name']!r}")
        reps = [ContinuousRepresentation(r["map"], r["dim"], _unpack(r["param"]),
                                         r["feature_bound"], r["param_bound"], r["label"])
                for r in d["representations"]]
        return ContextualProblem(noise_sigma=d["noise_sigma"],
                                 sampler=HalfDiscContexts(n_samples=s["n_samples"]),
                                 representations=reps, label=d.get("label", ""),
                                 metadata=d.get("metadata", {}))
    raise ValueError(f"unknown problem kind {d['kind']!r}")


def save_problem(problem: ContextualProblem, path) -> Path:
    """Write ``problem`` as JSON; floats use shortest round-trip repr."""
    path = Path(path)
    path.write_text(json.dumps(problem_to_dict(problem), indent=1) + "\n")
    return path


def load_problem(path) -> ContextualProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))
