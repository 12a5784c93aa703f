"""Diversity conditions of linear representations.

Every condition asks that some second-moment matrix of feature vectors is
full rank:

* ``non_redundant``: the average over arms of ``E[phi(x,a) phi(x,a)^T]``;
* ``cmb``: ``E[phi(x,a) phi(x,a)^T]`` for every arm;
* ``bbk``: ``E[phi phi^T 1{phi^T u >= 0}]`` for every arm and direction ``u``;
* ``hls``: ``E[phi*(x) phi*(x)^T]`` on optimal features;
* ``wys``: ``E[phi(x,a) phi(x,a)^T 1{a optimal at x}]`` for every arm.

Mixed-HLS is a property of a set of representations: the pairs whose
feature lies in the image of a representation's optimal moment matrix must
jointly cover every (context, arm) pair.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .core import (ContextualProblem, ContinuousRepresentation, FiniteRepresentation,
                   UnsupportedOperation, optimal_arms)

RANK_TOL = 1e-9
SYM_TOL = 1e-12
IMAGE_TOL = 1e-8
BBK_DIRECTIONS = 10_000

CONDITIONS = ("non_redundant", "cmb", "bbk", "hls", "wys")


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    rank: int
    tol: float
    estimation: str = "exact"
    n_samples: Optional[int] = None

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def lambda_min_pos(self) -> float:
        """Smallest eigenvalue counted as nonzero (``lambda_plus``), 0 if rank 0."""
        if self.rank == 0:
            return 0.0
        return float(self.eigvals[self.eigvals.size - self.rank])

    @property
    def full_rank(self) -> bool:
        return self.rank == self.matrix.shape[0]

    def image_basis(self) -> np.ndarray:
        """Orthonormal basis of the image, shape ``(d, rank)``."""
        return self.eigvecs[:, self.eigvals.size - self.rank:]


def _rank_tol(eigvals: np.ndarray, tol: float = RANK_TOL) -> float:
    top = float(eigvals[-1]) if eigvals.size else 0.0
    return tol * max(1.0, top)


def _decompose(mat: np.ndarray, estimation="exact", n_samples=None) -> MomentMatrix:
    mat = 0.5 * (mat + mat.T)
    w, v = np.linalg.eigh(mat)
    tol = _rank_tol(w)
    rank = int(np.count_nonzero(w > tol))
    for a in (mat, w, v):
        a.setflags(write=False)
    return MomentMatrix(mat, w, v, rank, tol, estimation, n_samples)


def min_nonzero_eig(matrix, tol: float = RANK_TOL) -> float:
    """Smallest eigenvalue strictly above ``tol * lambda_max`` (0 for the zero matrix)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > SYM_TOL * scale:
        raise ValueError("matrix is not symmetric")
    w = np.linalg.eigvalsh(m)
    if w.size == 0 or w[-1] <= 0:
        return 0.0
    pos = w[w > tol * w[-1]]
    return float(pos[0])


def _weighted_gram(vectors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # sum_x w_x v_x v_x^T
    return np.einsum("n,ni,nj->ij", weights, vectors, vectors)


def optimal_features(rep: FiniteRepresentation, problem: ContextualProblem) -> np.ndarray:
    """``phi*(x)`` for every context, canonical lowest-index optimal arm."""
    arms, _ = optimal_arms(problem.reward_table)
    return rep.features[np.arange(rep.n_contexts), arms]


def _continuous_moment(rep: ContinuousRepresentation, problem: ContextualProblem, which: str,
                       n_samples: Optional[int], seed: int) -> MomentMatrix:
    if which not in ("optimal", "all"):
        raise UnsupportedOperation(f"{which!r} moments need gap information; "
                                   "only 'optimal' and 'all' are available for continuous contexts")
    n = n_samples or problem.sampler.n_samples
    rng = np.random.default_rng(seed)
    x = problem.sampler.sample(rng, n)
    feats = rep.feature_map(x)
    if which == "optimal":
        arms, _ = optimal_arms(problem.sampler.reward(x))
        phi = feats[np.arange(n), arms]
        mat = phi.T @ phi / n
    else:
        mat = np.einsum("nki,nkj->ij", feats, feats) / (n * feats.shape[1])
    return _decompose(mat, "monte_carlo", n)


def moment_matrix(rep, problem: ContextualProblem, which: str = "optimal",
                  arm: Optional[int] = None, *, n_samples: Optional[int] = None,
                  rng: Optional[np.random.Generator] = None, seed: int = 0) -> MomentMatrix:
    """Second-moment matrix of a representation under the context distribution.

    ``which`` is one of ``"optimal"``, ``"arm"``, ``"optimal_restricted"``
    (both need ``arm``) or ``"all"``.  For finite problems passing
    ``n_samples`` switches to a Monte Carlo estimate drawn from ``rng``.
    """
    if isinstance(rep, ContinuousRepresentation) or not problem.is_finite:
        return _continuous_moment(rep, problem, which, n_samples, seed)
    if which in ("arm", "optimal_restricted"):
        if arm is None or not 0 <= arm < rep.n_arms:
            raise ValueError(f"{which!r} needs a valid arm index")
    elif which not in ("optimal", "all"):
        raise ValueError(f"unknown moment kind {which!r}")

    feats = rep.features
    astar, _ = optimal_arms(problem.reward_table)
    if n_samples is not None:
        rng = rng if rng is not None else np.random.default_rng(seed)
        ctx = rng.choice(rep.n_contexts, size=n_samples, p=problem.rho)
        weights = np.bincount(ctx, minlength=rep.n_contexts) / n_samples
        estimation = "monte_carlo"
    else:
        weights = problem.rho
        estimation = "exact"

    if which == "optimal":
        mat = _weighted_gram(feats[np.arange(rep.n_contexts), astar], weights)
    elif which == "arm":
        mat = _weighted_gram(feats[:, arm], weights)
    elif which == "optimal_restricted":
        mat = _weighted_gram(feats[:, arm], weights * (astar == arm))
    else:
        mat = np.einsum("n,nki,nkj->ij", weights, feats, feats) / rep.n_arms
    return _decompose(mat, estimation, n_samples)


# ---------------------------------------------------------------------------
# BBK


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _distinct_normals(vectors: np.ndarray) -> np.ndarray:
    """Unit normals of the distinct hyperplanes ``{u : v^T u = 0}``."""
    norms = np.linalg.norm(vectors, axis=1)
    units = vectors[norms > 0] / norms[norms > 0, None]
    parallel = np.abs(np.abs(units @ units.T) - 1.0) < 1e-12
    return units[~np.tril(parallel, -1).any(axis=1)]


def _planar_cells(normals2d: np.ndarray) -> np.ndarray:
    """One unit direction per open sector cut by lines through the origin."""
    if normals2d.shape[0] == 0:
        return np.array([[1.0, 0.0]])
    ang = np.arctan2(normals2d[:, 1], normals2d[:, 0]) + np.pi / 2
    rays = np.sort(np.mod(np.concatenate([ang, ang + np.pi]), 2 * np.pi))
    nxt = np.append(rays[1:], rays[0] + 2 * np.pi)
    mids = 0.5 * (rays + nxt)
    return np.stack([np.cos(mids), np.sin(mids)], axis=1)


def bbk_cell_directions(vectors: np.ndarray) -> np.ndarray:
    """One representative direction per open cell of the arrangement.

    The arrangement is the set of hyperplanes orthogonal to the nonzero rows
    of ``vectors``.  Only ``d <= 3`` is supported.
    """
    d = vectors.shape[1]
    normals = _distinct_normals(vectors)
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        return _planar_cells(normals)
    if d != 3:
        raise UnsupportedOperation("exact cell enumeration needs d <= 3")
    if normals.shape[0] == 0:
        return np.array([[1.0, 0.0, 0.0]])
    if normals.shape[0] == 1:
        return np.array([normals[0], -normals[0]])
    i, j = np.triu_indices(normals.shape[0], 1)
    c = np.cross(normals[i], normals[j])
    cn = np.linalg.norm(c, axis=1)
    c = c[cn > 1e-12] / cn[cn > 1e-12, None]
    vertices = np.concatenate([c, -c])
    dots = vertices @ normals.T
    bases = _tangent_bases(vertices)
    dirs = []
    for v, dv, basis in zip(vertices, dots, bases):
        through = np.abs(dv) <= 1e-12
        far = np.abs(dv[~through])
        eps = 0.5 * far.min() if far.size else 0.5
        local = normals[through] @ basis
        step = v + eps * (_planar_cells(local) @ basis.T)
        dirs.append(step / np.linalg.norm(step, axis=1, keepdims=True))
    return np.concatenate(dirs)


def _tangent_bases(v: np.ndarray) -> np.ndarray:
    """Orthonormal bases ``(n, 3, 2)`` of the planes orthogonal to unit rows of ``v``."""
    e = np.eye(3)[np.argmin(np.abs(v), axis=1)]
    b1 = np.cross(v, e)
    b1 /= np.linalg.norm(b1, axis=1, keepdims=True)
    return np.stack([b1, np.cross(v, b1)], axis=2)


def _bbk_arm_ok(vectors: np.ndarray, weights: np.ndarray, directions: np.ndarray):
    """Worst minimum eigenvalue of the half-space moments over the given directions."""
    d = vectors.shape[1]
    full = _weighted_gram(vectors, weights)
    tol = _rank_tol(np.linalg.eigvalsh(full))
    signs = (vectors @ directions.T) >= 0  # (N, n_dirs)
    # each distinct selection pattern only needs to be checked once
    patterns = np.unique(signs.T, axis=0)
    grams = np.einsum("pn,ni,nj->pij", patterns * weights, vectors, vectors)
    worst = float(np.linalg.eigvalsh(grams)[:, 0].min())
    return worst > tol and d > 0, worst


# ---------------------------------------------------------------------------
# conditions


def _full_rank(mm: MomentMatrix):
    return mm.full_rank, mm.lambda_min


def check_condition(rep, problem: ContextualProblem, condition: str, *,
                    bbk_mode: str = "auto", n_directions: int = BBK_DIRECTIONS,
                    seed: int = 0):
    """Decide one diversity condition.

    Returns ``(holds, witness, method)``: ``witness`` is the smallest relevant
    eigenvalue (worst arm for per-arm conditions) and ``method`` records how
    it was decided (``"exact"``, ``"randomized"`` or ``"monte_carlo"``).
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if not problem.is_finite:
        if condition == "hls":
            ok, lam = _full_rank(moment_matrix(rep, problem, "optimal", seed=seed))
            return ok, lam, "monte_carlo"
        if condition == "non_redundant":
            ok, lam = _full_rank(moment_matrix(rep, problem, "all", seed=seed))
            return ok, lam, "monte_carlo"
        raise UnsupportedOperation(f"{condition} is only decidable for finite contexts")

    if condition == "hls":
        return (*_full_rank(moment_matrix(rep, problem, "optimal")), "exact")
    if condition == "non_redundant":
        return (*_full_rank(moment_matrix(rep, problem, "all")), "exact")
    if condition in ("cmb", "wys"):
        kind = "arm" if condition == "cmb" else "optimal_restricted"
        ok, worst = True, np.inf
        for a in range(rep.n_arms):
            good, lam = _full_rank(moment_matrix(rep, problem, kind, a))
            ok &= good
            worst = min(worst, lam)
        return ok, worst, "exact"

    # BBK
    d = rep.dim
    if bbk_mode not in ("auto", "exact", "randomized"):
        raise ValueError(f"unknown bbk_mode {bbk_mode!r}")
    method = "exact"
    if bbk_mode == "randomized" or (bbk_mode == "auto" and d > 3):
        method = "randomized"
    elif bbk_mode == "exact" and d > 3:
        warnings.warn("exact BBK check needs d <= 3; using randomized directions",
                      RuntimeWarning, stacklevel=2)
        method = "randomized"
    supp = problem.support
    weights = problem.rho[supp]
    rng = np.random.default_rng(seed)
    ok, worst = True, np.inf
    for a in range(rep.n_arms):
        vecs = rep.features[supp, a]
        if method == "exact":
            dirs = bbk_cell_directions(vecs)
        else:
            dirs = rng.standard_normal((n_directions, d))
        good, lam = _bbk_arm_ok(vecs, weights, dirs)
        ok &= good
        worst = min(worst, lam)
        if not ok and method == "randomized":
            break
    label = "exact" if method == "exact" else f"randomized({n_directions})"
    return bool(ok), float(worst), label


@dataclass(frozen=True)
class DiversityReport:
    non_redundant: bool
    cmb: bool
    bbk: bool
    hls: bool
    wys: bool
    lambda_hls: float
    lambda_plus: float
    bbk_method: str
    notes: str = ""
    label: str = ""

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("label",) + CONDITIONS + ("lambda_hls", "lambda_plus", "bbk_method", "notes")}

    def inclusions_hold(self) -> bool:
        """Check the implications ``wys => cmb and hls``, ``bbk => cmb`` and
        ``any => non_redundant``."""
        if self.wys and not (self.cmb and self.hls):
            return False
        if self.bbk and not self.cmb:
            return False
        if (self.hls or self.cmb or self.bbk or self.wys) and not self.non_redundant:
            return False
        return True


def diversity_report(rep, problem: ContextualProblem, **bbk_kw) -> DiversityReport:
    """Evaluate all conditions available for the problem type."""
    mm = moment_matrix(rep, problem, "optimal")
    notes = []
    if problem.is_finite:
        res = {c: check_condition(rep, problem, c, **bbk_kw) for c in CONDITIONS}
        bbk_method = res["bbk"][2]
        if bbk_method != "exact":
            notes.append("bbk decided on sampled directions; a pass is evidence only")
        if np.any(optimal_arms(problem.reward_table)[1][problem.support]):
            notes.append("tied optimal arms resolved to the lowest index")
        flags = {c: bool(res[c][0]) for c in CONDITIONS}
    else:
        flags = {c: False for c in CONDITIONS}
        flags["hls"] = mm.full_rank
        flags["non_redundant"] = check_condition(rep, problem, "non_redundant")[0] or mm.full_rank
        bbk_method = "n/a"
        notes.append(f"monte carlo moments ({mm.n_samples} samples); cmb/bbk/wys not evaluated")
    return DiversityReport(lambda_hls=mm.lambda_min if mm.full_rank else 0.0,
                           lambda_plus=mm.lambda_min_pos, bbk_method=bbk_method,
                           notes="; ".join(notes), label=getattr(rep, "label", ""), **flags)


# ---------------------------------------------------------------------------
# mixed HLS


def image_basis(rep: FiniteRepresentation, problem: ContextualProblem,
                tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the image of the optimal moment matrix via pivoted QR."""
    phi = optimal_features(rep, problem)
    # columns sqrt(rho) phi*(x) span the image of M
    cols = (np.sqrt(problem.rho)[:, None] * phi).T
    if not np.any(cols):
        return np.zeros((rep.dim, 0))
    q, r, _ = scipy.linalg.qr(cols, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > tol * max(1.0, diag[0])))
    return q[:, :rank]


@dataclass(frozen=True, eq=False)
class MixedHlsResult:
    holds: bool
    coverage: np.ndarray  # (M, N, K) booleans, pair (x, a) lies in Z_i
    support: np.ndarray

    def covering(self, x: int, a: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.coverage[:, x, a])]

    def uncovered(self) -> list[tuple[int, int]]:
        any_cov = self.coverage.any(axis=0)
        return [(int(x), int(a)) for x in self.support
                for a in np.flatnonzero(~any_cov[x])]


def check_mixed_hls(reps: Sequence[FiniteRepresentation], problem: ContextualProblem,
                    tol: float = IMAGE_TOL) -> MixedHlsResult:
    """Check that the union of the sets ``Z_i`` covers all supported pairs."""
    reps = list(reps)
    if not reps:
        raise ValueError("need at least one representation")
    if not problem.is_finite:
        raise UnsupportedOperation("mixed-HLS is checked on finite problems only")
    cov = []
    for rep in reps:
        if not rep.realizable:
            raise ValueError(f"representation {rep.label!r} is not realizable")
        q = image_basis(rep, problem)
        feats = rep.features
        resid = feats - (feats @ q) @ q.T
        cov.append(np.linalg.norm(resid, axis=2) <= tol * np.linalg.norm(feats, axis=2))
    cov = np.array(cov)
    supp = problem.support
    holds = bool(cov.any(axis=0)[supp].all())
    return MixedHlsResult(holds, cov, supp)
