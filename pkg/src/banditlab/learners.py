"""Optimistic linear learners and representation-selection policies.

Everything here is batched: an :class:`RlsState` carries a leading batch
shape (typically ``(n_reps, n_runs)``) so that many independent ridge
regressions advance with one set of array operations.

Policies share a small protocol used by the harness:

* ``select(contexts, t, live) -> arms`` of shape ``(n_tracks, n_runs)``;
* ``update(contexts, arms, rewards, live)`` with the same shapes;
* optional per-step diagnostics ``selecting_rep`` and ``active_size``.

A "track" is one independent learner replayed on the shared stream, so a
bank of single-representation LinUCB learners advances in a single pass.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ContextualProblem, FiniteRepresentation, optimal_arms

REFRESH_EVERY = 512
NEWTON_TOL = 1e-10
NEWTON_ITERS = 100


def _check_delta(delta):
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0) or np.any(d >= 1):
        raise ValueError("delta must lie in (0, 1)")


class RlsState:
    """Ridge-regression sufficient statistics with a maintained inverse.

    ``gram = reg*I + sum phi phi^T``, ``moment = sum phi*y``, ``sq_sum =
    sum y^2``.  The inverse and log-determinant follow rank-one updates and
    are recomputed from ``gram`` every ``refresh_every`` updates.
    """

    def __init__(self, dim: int, reg: float = 1.0, sigma: float = 0.3,
                 feature_bound=1.0, param_bound=1.0, batch_shape=(),
                 refresh_every: int = REFRESH_EVERY):
        if dim < 1:
            raise ValueError("dim must be positive")
        if reg <= 0:
            raise ValueError("reg must be positive")
        self.dim = int(dim)
        self.reg = float(reg)
        self.sigma = float(sigma)
        self.refresh_every = int(refresh_every)
        b = tuple(batch_shape)
        self.feature_bound = np.broadcast_to(np.asarray(feature_bound, float), b).copy()
        self.param_bound = np.broadcast_to(np.asarray(param_bound, float), b).copy()
        eye = np.eye(self.dim)
        self.gram = np.broadcast_to(reg * eye, b + (dim, dim)).copy()
        self.gram_inv = np.broadcast_to(eye / reg, b + (dim, dim)).copy()
        self.moment = np.zeros(b + (dim,))
        self.sq_sum = np.zeros(b)
        self.log_det = np.full(b, dim * math.log(reg))
        self.theta = np.zeros(b + (dim,))
        self.n_updates = np.zeros(b, dtype=np.int64)

    @property
    def batch_shape(self):
        return self.sq_sum.shape

    @property
    def t(self):
        """Round index: the state has seen ``t - 1`` samples."""
        return self.n_updates + 1

    def copy(self) -> "RlsState":
        new = object.__new__(RlsState)
        new.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v)
                             for k, v in self.__dict__.items()})
        return new

    def take(self, index) -> "RlsState":
        """New state holding ``self[index]`` along the batch axes."""
        new = object.__new__(RlsState)
        for k, v in self.__dict__.items():
            new.__dict__[k] = np.array(v[index]) if isinstance(v, np.ndarray) else v
        return new

    @staticmethod
    def stack(states: Sequence["RlsState"]) -> "RlsState":
        first = states[0]
        new = object.__new__(RlsState)
        for k, v in first.__dict__.items():
            if isinstance(v, np.ndarray):
                new.__dict__[k] = np.stack([s.__dict__[k] for s in states])
            else:
                new.__dict__[k] = v
        return new

    def update(self, phi, y, mask=None):
        """Add one sample per batch entry; entries with ``mask`` False are skipped."""
        phi = np.asarray(phi, dtype=float)
        y = np.asarray(y, dtype=float)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            phi = phi * mask[..., None]
            y = y * mask
        u = np.einsum("...ij,...j->...i", self.gram_inv, phi)
        q = np.einsum("...i,...i->...", phi, u)
        self.gram += phi[..., :, None] * phi[..., None, :]
        self.gram_inv -= u[..., :, None] * u[..., None, :] / (1.0 + q)[..., None, None]
        self.log_det += np.log1p(q)
        self.moment += y[..., None] * phi
        self.sq_sum += y * y
        if mask is None:
            self.n_updates += 1
            due = (self.n_updates % self.refresh_every) == 0
        else:
            self.n_updates += mask
            due = mask & ((self.n_updates % self.refresh_every) == 0)
        if np.any(due):
            self.refresh(due)
        self.theta = np.einsum("...ij,...j->...i", self.gram_inv, self.moment)

    def refresh(self, where=None):
        """Recompute inverse and log-determinant from the Gram matrix."""
        if where is None or np.ndim(where) == 0:
            self.gram_inv = np.linalg.inv(self.gram)
            self.log_det = np.linalg.slogdet(self.gram)[1]
        else:
            g = self.gram[where]
            self.gram_inv[where] = np.linalg.inv(g)
            self.log_det[where] = np.linalg.slogdet(g)[1]
        self.theta = np.einsum("...ij,...j->...i", self.gram_inv, self.moment)

    def beta(self, delta):
        """Confidence radius with the exact determinant ratio."""
        return _beta(self, delta)

    def weighted_norm(self, feats):
        """``||phi||_{V^{-1}}`` for ``feats`` of shape ``batch + (..., d)``."""
        extra = feats.ndim - len(self.batch_shape) - 1
        inv = self.gram_inv.reshape(self.batch_shape + (1,) * extra + (self.dim, self.dim))
        q = np.einsum("...i,...ij,...j->...", feats, inv, feats)
        return np.sqrt(np.maximum(q, 0.0))

    def ucb(self, feats, delta):
        """Upper confidence values of ``feats`` (shape ``batch + (K, d)``)."""
        mean = np.einsum("...kd,...d->...k", feats, self.theta)
        return mean + np.asarray(self.beta(delta))[..., None] * self.weighted_norm(feats)

    def mse_terms(self):
        """``(A, b, c)`` with ``A = gram - reg*I`` for the squared-error statistic."""
        return self.gram - self.reg * np.eye(self.dim), self.moment, self.sq_sum

    def snapshot(self) -> dict:
        """JSON-compatible copy; arrays keep their dtype and shape."""
        return {k: ({"dtype": str(v.dtype), "shape": list(v.shape), "data": v.ravel().tolist()}
                    if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_snapshot(cls, snap: dict) -> "RlsState":
        new = object.__new__(cls)
        for k, v in snap.items():
            if isinstance(v, dict):
                v = np.array(v["data"], dtype=v["dtype"]).reshape(v["shape"])
            new.__dict__[k] = v
        return new


def _beta(state: RlsState, delta):
    log_ratio = 0.5 * state.log_det - 0.5 * state.dim * math.log(state.reg) - np.log(delta)
    return (state.sigma * np.sqrt(2.0 * np.maximum(log_ratio, 0.0))
            + math.sqrt(state.reg) * state.param_bound)


def beta(state: RlsState, delta):
    """``sigma*sqrt(2*log(det(V)^1/2 det(reg*I)^-1/2 / delta)) + sqrt(reg)*S``."""
    _check_delta(delta)
    return _beta(state, delta)


def ucb_value(state: RlsState, phi, delta):
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != state.dim:
        raise ValueError("feature length does not match state dimension")
    _check_delta(delta)
    mean = np.einsum("...d,...d->...", phi, state.theta)
    return mean + _beta(state, delta) * state.weighted_norm(phi)


def linucb_select(state: RlsState, arm_features, delta) -> int:
    """Arm with the largest upper confidence value, lowest index on ties."""
    feats = np.asarray(arm_features, dtype=float)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("need a non-empty (K, d) array of arm features")
    return int(np.argmax(ucb_value(state, feats, delta)))


# ---------------------------------------------------------------------------
# banks of representations


class RepBank:
    """RLS states for a list of representations, grouped by dimension.

    Each group holds one state with batch shape ``(m_g, n_runs)``.
    """

    def __init__(self, reps: Sequence, n_runs: int, *, reg: float = 1.0, sigma: float = 0.3,
                 groups=None):
        self.reps = list(reps)
        self.n_runs = int(n_runs)
        self.reg = reg
        self.sigma = sigma
        if groups is None:
            dims = []
            for r in self.reps:
                if r.dim not in dims:
                    dims.append(r.dim)
            groups = []
            for d in dims:
                idx = np.array([i for i, r in enumerate(self.reps) if r.dim == d])
                L = np.array([self.reps[i].feature_bound for i in idx])[:, None]
                S = np.array([self.reps[i].param_bound for i in idx])[:, None]
                st = RlsState(d, reg, sigma, L, S, (idx.size, self.n_runs))
                groups.append((idx, st))
        self.groups = groups
        self._stack = []
        for idx, _ in self.groups:
            members = [self.reps[i] for i in idx]
            if all(isinstance(r, FiniteRepresentation) for r in members):
                self._stack.append(np.stack([r.features for r in members]))
            else:
                self._stack.append(None)

    @property
    def n_reps(self) -> int:
        return len(self.reps)

    def features(self, contexts) -> list:
        """Per-group feature arrays of shape ``(m_g, n_runs, K, d)``."""
        out = []
        for (idx, _), stack in zip(self.groups, self._stack):
            if stack is not None:
                out.append(stack[:, contexts])
            else:
                out.append(np.stack([self.reps[i].feature_map(contexts) for i in idx]))
        return out

    def ucb(self, feats, delta) -> np.ndarray:
        """Upper confidence values ``(M, n_runs, K)``; ``delta`` may be per run."""
        K = feats[0].shape[-2]
        out = np.empty((self.n_reps, self.n_runs, K))
        for (idx, st), f in zip(self.groups, feats):
            out[idx] = st.ucb(f, delta)
        return out

    def means(self, feats) -> np.ndarray:
        K = feats[0].shape[-2]
        out = np.empty((self.n_reps, self.n_runs, K))
        for (idx, st), f in zip(self.groups, feats):
            out[idx] = np.einsum("mrkd,mrd->mrk", f, st.theta)
        return out

    def update(self, feats, arms, rewards, mask):
        """``arms``, ``rewards`` and ``mask`` have shape ``(M, n_runs)``."""
        runs = np.arange(self.n_runs)
        for (idx, st), f in zip(self.groups, feats):
            a = arms[idx]
            phi = f[np.arange(idx.size)[:, None], runs[None, :], a]
            st.update(phi, rewards[idx], mask[idx])

    def rep_state(self, i: int) -> RlsState:
        """Copy of representation ``i``'s state, batch shape ``(n_runs,)``."""
        for idx, st in self.groups:
            pos = np.flatnonzero(idx == i)
            if pos.size:
                return st.take(int(pos[0]))
        raise IndexError(i)

    def per_rep(self, attr: str) -> np.ndarray:
        """Gather a scalar state attribute into shape ``(M, n_runs)``."""
        out = np.empty((self.n_reps, self.n_runs))
        for idx, st in self.groups:
            out[idx] = getattr(st, attr)
        return out

    def betas(self, delta) -> np.ndarray:
        out = np.empty((self.n_reps, self.n_runs))
        for idx, st in self.groups:
            out[idx] = _beta(st, delta)
        return out

    def subset(self, indices: Sequence[int]) -> "RepBank":
        """New bank over ``reps[indices]`` carrying copies of their states."""
        indices = list(indices)
        reps = [self.reps[i] for i in indices]
        fresh = RepBank(reps, self.n_runs, reg=self.reg, sigma=self.sigma)
        for gidx, st in fresh.groups:
            fresh_states = [self.rep_state(indices[j]) for j in gidx]
            loaded = RlsState.stack(fresh_states)
            st.__dict__.update(loaded.__dict__)
        return fresh

    def copy(self) -> "RepBank":
        new = object.__new__(RepBank)
        new.__dict__.update(self.__dict__)
        new.groups = [(idx, st.copy()) for idx, st in self.groups]
        return new


def confidence_level(delta: float, schedule: str, t) -> np.ndarray:
    """Per-round confidence: fixed ``delta`` or ``1/t^3``."""
    if schedule == "fixed":
        return np.asarray(delta, dtype=float)
    if schedule == "cubic":
        return 1.0 / np.asarray(t, dtype=float) ** 3
    raise ValueError(f"unknown confidence schedule {schedule!r}")


def _min_by_index(values, axis):
    # argmin/argmax already return the first index on ties
    return np.argmin(values, axis=axis)


# ---------------------------------------------------------------------------
# policies


class Policy:
    name = "policy"
    n_tracks = 1

    @property
    def track_names(self):
        return [self.name]

    selecting_rep = None
    active_size = None

    def select(self, contexts, t, live=None):
        raise NotImplementedError

    def update(self, contexts, arms, rewards, live):
        raise NotImplementedError


class LinUCB(Policy):
    """Independent LinUCB learners, one track per representation."""

    def __init__(self, reps, n_runs, *, delta=0.01, reg=1.0, sigma=0.3, schedule="fixed",
                 bank: Optional[RepBank] = None, names=None):
        self.bank = bank if bank is not None else RepBank(reps, n_runs, reg=reg, sigma=sigma)
        self.delta = delta
        self.schedule = schedule
        self.n_tracks = self.bank.n_reps
        self.n_runs = n_runs
        self._names = names or [f"LinUCB[{r.label or i}]" for i, r in enumerate(self.bank.reps)]
        self.name = self._names[0] if self.n_tracks == 1 else "LinUCB"
        self._feats = None

    @property
    def track_names(self):
        return list(self._names)

    def _delta_t(self):
        # every state in a LinUCB bank advances in lockstep per run
        t = self.bank.groups[0][1].t[0]
        return confidence_level(self.delta, self.schedule, t)

    def select(self, contexts, t, live=None):
        self._feats = self.bank.features(contexts)
        u = self.bank.ucb(self._feats, self._delta_t())
        return np.argmax(u, axis=-1)

    def update(self, contexts, arms, rewards, live):
        mask = np.broadcast_to(live, arms.shape)
        self.bank.update(self._feats, arms, rewards, mask)


class Leader(Policy):
    """Play the arm maximizing the smallest upper confidence value over
    active representations; with ``elimination`` the squared-error test
    removes representations that fit the data worse than a benchmark.
    """

    def __init__(self, reps, n_runs, *, delta=0.01, reg=1.0, sigma=0.3, schedule="fixed",
                 elimination=False, use_rls_for_mse=False, confidence_split=None,
                 bank: Optional[RepBank] = None, active=None, name=None):
        self.bank = bank if bank is not None else RepBank(reps, n_runs, reg=reg, sigma=sigma)
        self.n_runs = n_runs
        self.delta = delta
        self.schedule = schedule
        self.elimination = elimination
        self.use_rls_for_mse = use_rls_for_mse
        M = self.bank.n_reps
        self.split = confidence_split or M
        self.active = (np.ones((M, n_runs), dtype=bool) if active is None
                       else np.array(active, dtype=bool))
        self.anomalies = np.zeros(n_runs, dtype=np.int64)
        self.elimination_time = np.full((M, n_runs), -1, dtype=np.int64)
        self.mse = np.full((M, n_runs), np.nan)
        self.name = name or ("E-LEADER" if elimination else "LEADER")
        self.selecting_rep = np.zeros((1, n_runs), dtype=np.int64)
        self.active_size = np.full((1, n_runs), M, dtype=np.int64)
        self._feats = None

    def _t(self):
        return self.bank.groups[0][1].t[0]

    def select(self, contexts, t, live=None):
        tt = self._t()
        if self.elimination:
            self.eliminate(live=live, t=t)
        self._feats = self.bank.features(contexts)
        delta = confidence_level(self.delta, self.schedule, tt) / self.split
        u = self.bank.ucb(self._feats, delta)
        arm, rep = leader_reduce(u, self.active)
        self.selecting_rep[0] = rep
        self.active_size[0] = self.active.sum(axis=0)
        return arm[None, :]

    def update(self, contexts, arms, rewards, live):
        M = self.bank.n_reps
        a = np.broadcast_to(arms[0], (M, self.n_runs))
        y = np.broadcast_to(rewards[0], (M, self.n_runs))
        self.bank.update(self._feats, a, y, np.broadcast_to(live, (M, self.n_runs)))

    # -- elimination ---------------------------------------------------------

    def alpha(self, s):
        """Threshold ``alpha_j`` per representation after ``s`` samples."""
        M = self.bank.n_reps
        s = np.maximum(np.asarray(s, dtype=float), 1.0)
        out = np.empty((M,) + s.shape)
        for j, rep in enumerate(self.bank.reps):
            out[j] = elimination_alpha(s, M, rep.feature_bound, rep.param_bound, rep.dim,
                                       self.delta)
        return out

    def mse_bounds(self):
        """Lower and upper bounds on each constrained minimum squared error."""
        M, R = self.bank.n_reps, self.n_runs
        lo = np.empty((M, R))
        hi = np.empty((M, R))
        for idx, st in self.bank.groups:
            s = np.maximum(st.n_updates, 1)
            A, b, c = st.mse_terms()
            S = st.param_bound
            # theta^T A theta - 2 theta^T b >= -b^T V^-1 b - reg*S^2 on the ball
            lo[idx] = np.maximum(c - np.einsum("...i,...i->...", b, st.theta)
                                 - st.reg * S ** 2, 0.0) / s
            nrm = np.linalg.norm(st.theta, axis=-1)
            proj = st.theta * np.minimum(1.0, S / np.maximum(nrm, 1e-300))[..., None]
            hi[idx] = _quad_mse(A, b, c, proj) / s
            if self.use_rls_for_mse:
                val = _quad_mse(A, b, c, st.theta) / s
                lo[idx] = val
                hi[idx] = val
        return lo, hi

    def exact_mse(self, runs):
        """Constrained minimum squared error for the given runs, shape ``(M, len(runs))``."""
        out = np.empty((self.bank.n_reps, len(runs)))
        for idx, st in self.bank.groups:
            s = np.maximum(st.n_updates[:, runs], 1)
            A, b, c = st.mse_terms()
            A, b, c = A[:, runs], b[:, runs], c[:, runs]
            if self.use_rls_for_mse:
                out[idx] = _quad_mse(A, b, c, st.theta[:, runs]) / s
            else:
                val, _ = constrained_mse_min(A, b, c, st.param_bound[:, runs])
                out[idx] = val / s
        return out

    def eliminate(self, live=None, t=None):
        """One elimination round; returns the boolean survivors ``(M, n_runs)``."""
        n_upd = self.bank.groups[0][1].n_updates[0]
        ok_runs = n_upd >= 1
        if live is not None:
            ok_runs &= live
        if not np.any(ok_runs):
            return self.active
        alpha = self.alpha(n_upd)
        lo, hi = self.mse_bounds()
        thr_lo = np.min(lo + alpha, axis=0)
        thr_hi = np.min(hi + alpha, axis=0)
        keep = hi <= thr_lo
        drop = lo > thr_hi
        undecided = self.active & ~keep & ~drop & ok_runs
        x_est = 0.5 * (lo + hi)
        runs = np.flatnonzero(undecided.any(axis=0))
        if runs.size:
            x = self.exact_mse(runs)
            thr = np.min(x + alpha[:, runs], axis=0)
            keep[:, runs] = x <= thr
            drop[:, runs] = ~keep[:, runs]
            x_est[:, runs] = x
        survive = self.active & ~drop
        survive[:, ~ok_runs] = self.active[:, ~ok_runs]
        empty = ~survive.any(axis=0)
        if np.any(empty):
            for r in np.flatnonzero(empty):
                cand = np.flatnonzero(self.active[:, r])
                survive[cand[np.argmin(x_est[cand, r])], r] = True
                self.anomalies[r] += 1
        newly = self.active & ~survive
        if t is not None:
            self.elimination_time[newly] = t
        self.active = survive
        self.mse = x_est
        return survive


def leader_reduce(u: np.ndarray, active: np.ndarray):
    """Min over active representations, then argmax over arms.

    ``u`` has shape ``(M, R, K)``; returns ``(arm, selecting_rep)`` per run.
    """
    masked = np.where(active[..., None], u, np.inf)
    worst = masked.min(axis=0)
    arm = np.argmax(worst, axis=-1)
    runs = np.arange(u.shape[1])
    rep = np.argmin(masked[:, runs, arm], axis=0)
    return arm, rep


def leader_select(states: Sequence[RlsState], per_rep_features, delta, active=None):
    """Single-run LEADER choice from per-representation states.

    ``per_rep_features[i]`` is the ``(K, d_i)`` feature array of rep ``i``;
    each UCB uses confidence ``delta / M``.
    """
    M = len(states)
    if M == 0:
        raise ValueError("need at least one representation")
    active = np.ones(M, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    if not active.any():
        raise ValueError("active set is empty")
    _check_delta(delta)
    u = np.stack([np.asarray(ucb_value(st, np.asarray(f, float), delta / M))
                  for st, f in zip(states, per_rep_features)])
    arm, rep = leader_reduce(u[:, None, :], active[:, None])
    return int(arm[0]), int(rep[0])


def elimination_alpha(s, n_reps, L, S, d, delta):
    """``(20/s) log(8 M^2 (12 L S s)^d s^3 / delta) + 1/s``."""
    s = np.asarray(s, dtype=float)
    log_arg = (math.log(8.0 * n_reps ** 2) + d * np.log(12.0 * L * S * s)
               + 3.0 * np.log(s) - math.log(delta))
    return 20.0 / s * log_arg + 1.0 / s


def _quad_mse(A, b, c, theta):
    return (np.einsum("...i,...ij,...j->...", theta, A, theta)
            - 2.0 * np.einsum("...i,...i->...", theta, b) + c)


def constrained_mse_min(A, b, c, radius):
    """Minimize ``theta^T A theta - 2 theta^T b + c`` over ``||theta|| <= radius``.

    ``A`` is positive semi-definite and ``b`` lies in its range (it does for
    least-squares statistics).  Returns ``(value, theta)``.  Uses an
    eigendecomposition and a safeguarded Newton iteration on
    ``1/||theta(nu)|| - 1/radius``.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    radius = np.asarray(radius, float)
    w, Q = np.linalg.eigh(A)
    w = np.maximum(w, 0.0)
    top = np.maximum(w[..., -1:], 1e-300)
    null = w <= 1e-12 * top
    bt = np.einsum("...ji,...j->...i", Q, b)
    bt = np.where(null, 0.0, bt)
    w_safe = np.where(null, 1.0, w)
    z0 = np.where(null, 0.0, bt / w_safe)
    norm0 = np.linalg.norm(z0, axis=-1)
    inside = norm0 <= radius
    nu = np.zeros(norm0.shape)
    hi = np.linalg.norm(bt, axis=-1) / np.maximum(radius, 1e-300)
    lo = np.zeros_like(nu)
    todo = ~inside
    for _ in range(NEWTON_ITERS):
        if not np.any(todo):
            break
        den = w + nu[..., None]
        den = np.where(null | (den <= 0), 1.0, den)
        z = bt / den
        nz = np.linalg.norm(z, axis=-1)
        f = 1.0 / np.maximum(nz, 1e-300) - 1.0 / radius
        # f < 0 means nu is too small
        lo = np.where(todo & (f < 0), nu, lo)
        hi = np.where(todo & (f > 0), nu, hi)
        dz = np.sum(bt ** 2 / den ** 3, axis=-1)
        fp = dz / np.maximum(nz, 1e-300) ** 3
        step = np.where(fp > 0, -f / np.where(fp > 0, fp, 1.0), 0.0)
        cand = nu + step
        bad = ~(cand > lo) | ~(cand < hi) | ~np.isfinite(cand)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        done = np.abs(cand - nu) <= NEWTON_TOL * np.maximum(1.0, nu)
        nu = np.where(todo, cand, nu)
        todo &= ~done
    den = w + nu[..., None]
    z = np.where(null & inside[..., None], 0.0, bt / np.where(den > 0, den, 1.0))
    z = np.where(inside[..., None], z0, z)
    theta = np.einsum("...ij,...j->...i", Q, z)
    return _quad_mse(A, b, c, theta), theta


class GlrBai(Policy):
    """LinUCB that stops as soon as the GLR test certifies the greedy arms,
    then commits to the recommended arm of every context.
    """

    def __init__(self, rep: FiniteRepresentation, problem: ContextualProblem, n_runs, *,
                 delta=0.01, reg=1.0, sigma=0.3, schedule="fixed", name=None):
        self.bank = RepBank([rep], n_runs, reg=reg, sigma=sigma)
        self.state = self.bank.groups[0][1]
        self.rep = rep
        self.support = problem.support
        self.delta = delta
        self.schedule = schedule
        self.n_runs = n_runs
        self.stopped = np.zeros(n_runs, dtype=bool)
        self.stop_time = np.full(n_runs, -1, dtype=np.int64)
        self.recommended = np.zeros((n_runs, rep.n_contexts), dtype=np.int64)
        self.name = name or f"GLR-BAI[{rep.label}]"
        self._feats = None
        f = rep.features[self.support]
        # ||phi(x,a) - phi(x,b)|| for the cheap screening bound
        self._pair_norm = np.linalg.norm(f[:, :, None, :] - f[:, None, :, :], axis=-1)

    def select(self, contexts, t, live=None):
        tt = self.state.t[0, 0]
        delta = confidence_level(self.delta, self.schedule, tt)
        go = ~self.stopped
        if np.any(go):
            go &= self._may_stop(delta)
        if np.any(go):
            st = self.state.take((0, go))
            b = _beta(st, delta)
            ok, rec = glr_stop(st, self.rep.features[self.support], None, beta_value=b)
            newly = np.flatnonzero(go)[ok]
            self.stopped[newly] = True
            self.stop_time[newly] = t
            full = np.zeros((ok.size, self.rep.n_contexts), dtype=np.int64)
            full[:, self.support] = rec
            self.recommended[newly] = full[ok]
        self._feats = self.bank.features(contexts)
        u = self.bank.ucb(self._feats, delta)[0]
        arm = np.argmax(u, axis=-1)
        arm = np.where(self.stopped, self.recommended[np.arange(self.n_runs), contexts], arm)
        return arm[None, :]

    def update(self, contexts, arms, rewards, live):
        self.bank.update(self._feats, arms, rewards, np.broadcast_to(live, arms.shape))

    def _may_stop(self, delta):
        """Cheap necessary condition for the GLR test, per run.

        Evaluates the exact ratio only on the pair with the smallest
        ``gap / ||d||``, the likeliest to fail.
        """
        st = self.state
        theta = st.theta[0]
        feats = self.rep.features[self.support]
        vals = np.einsum("nkd,rd->rnk", feats, theta)
        greedy = np.argmax(vals, axis=-1)
        gap = np.take_along_axis(vals, greedy[..., None], axis=-1) - vals
        pn = self._pair_norm[np.arange(greedy.shape[1])[None, :], greedy]  # (R, N, K)
        score = np.where(pn > 0, gap / np.where(pn > 0, pn, 1.0), np.inf)
        flat = score.reshape(score.shape[0], -1).argmin(axis=1)
        x, a = np.unravel_index(flat, score.shape[1:])
        runs = np.arange(score.shape[0])
        diff = feats[x, greedy[runs, x]] - feats[x, a]
        den = np.sqrt(np.einsum("ri,rij,rj->r", diff, st.gram_inv[0], diff))
        ratio = np.where(den > 0, gap[runs, x, a] / np.where(den > 0, den, 1.0), np.inf)
        return ratio > _beta(st, delta)[0]


def glr_stop(state: RlsState, features, delta, *, beta_value=None, tol: float = 1e-12):
    """Generalized likelihood-ratio stopping test.

    ``features`` has shape ``(N, K, d)``.  Stops when, for every context and
    every non-greedy arm, the estimated gap exceeds ``beta`` times the
    ``V^{-1}``-norm of the feature difference.  Returns ``(stop, greedy)``
    with the batch shape of ``state``.
    """
    feats = np.asarray(features, float)
    if beta_value is None:
        _check_delta(delta)
        beta_value = _beta(state, delta)
    bshape = state.batch_shape
    theta = state.theta.reshape(bshape + (1, 1, state.dim))
    vals = np.sum(feats * theta, axis=-1)  # batch + (N, K)
    greedy, ties = optimal_arms(vals, tol)
    gfeat = np.take_along_axis(
        np.broadcast_to(feats, bshape + feats.shape), greedy[..., None, None], axis=-2)
    diff = gfeat - feats  # batch + (N, K, d)
    num = np.sum(diff * theta, axis=-1)
    den = state.weighted_norm(diff)
    ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    K = feats.shape[1]
    is_greedy = np.arange(K) == greedy[..., None]
    ratio = np.where(is_greedy, np.inf, ratio)
    stat = ratio.reshape(bshape + (-1,)).min(axis=-1) if K > 1 else np.full(bshape, np.inf)
    stop = (stat > beta_value) & ~ties.any(axis=-1)
    return stop, greedy


class Exp4IX(Policy):
    """Exponential weights over per-representation LinUCB recommendations
    with implicit-exploration loss estimates.
    """

    def __init__(self, reps, n_runs, *, horizon, reward_range, delta=0.01, reg=1.0,
                 sigma=0.3, schedule="fixed", seed=0, run_ids=None, name="EXP4.IX"):
        if horizon is None or horizon < 1:
            raise ValueError("EXP4.IX needs the horizon")
        self.experts = LinUCB(reps, n_runs, delta=delta, reg=reg, sigma=sigma,
                              schedule=schedule)
        M = self.experts.n_tracks
        self.n_runs = n_runs
        self.K = reps[0].n_arms if hasattr(reps[0], "n_arms") else None
        self.horizon = horizon
        self.lo, self.hi = reward_range
        self.log_w = np.zeros((M, n_runs))
        self.name = name
        self.seed = seed
        run_ids = range(n_runs) if run_ids is None else run_ids
        self._uniforms = np.stack([np.random.default_rng([seed, int(r)]).random(horizon)
                                   for r in run_ids])
        self._rec = None
        self._prob = None

    def _params(self, K):
        M = self.log_w.shape[0]
        gamma = exp4ix_gamma(M, self.horizon, K)
        return gamma, 2.0 * gamma

    def select(self, contexts, t, live=None):
        rec = self.experts.select(contexts, t, live)  # (M, R)
        K = self.experts.bank.features(contexts)[0].shape[-2] if self.K is None else self.K
        self.K = K
        w = np.exp(self.log_w - self.log_w.max(axis=0))
        w /= w.sum(axis=0)
        prob = np.zeros((self.n_runs, K))
        runs = np.arange(self.n_runs)
        for m in range(rec.shape[0]):
            np.add.at(prob, (runs, rec[m]), w[m])
        cdf = np.cumsum(prob, axis=1)
        u = self._uniforms[:, min(t, self.horizon - 1)] * cdf[:, -1]
        arm = np.minimum((cdf <= u[:, None]).sum(axis=1), K - 1)
        # never sample an arm with zero mass
        arm = np.where(prob[runs, arm] > 0, arm, np.argmax(prob, axis=1))
        self._rec = rec
        self._prob = prob
        return arm[None, :]

    def update(self, contexts, arms, rewards, live):
        arm = arms[0]
        runs = np.arange(self.n_runs)
        gamma, eta = self._params(self.K)
        loss = np.clip((self.hi - rewards[0]) / (self.hi - self.lo), 0.0, 1.0)
        p = self._prob[runs, arm]
        est = loss / (p + gamma)
        hit = self._rec == arm[None, :]
        self.log_w -= np.where(live[None, :] & hit, eta * est[None, :], 0.0)
        M = self._rec.shape[0]
        self.experts.update(contexts, np.broadcast_to(arm, (M, self.n_runs)),
                            np.broadcast_to(rewards[0], (M, self.n_runs)), live)


def exp4ix_gamma(n_experts: int, horizon: int, n_arms: int) -> float:
    """``sqrt(2 ln M / (n K))``."""
    if horizon is None or horizon < 1:
        raise ValueError("horizon required")
    return math.sqrt(2.0 * math.log(n_experts) / (horizon * n_arms))


def exp4ix_step(log_w, recommendations, u, gamma, eta, arm_loss_fn):
    """Single-run EXP4.IX step for tests and demos.

    ``recommendations[m]`` is expert ``m``'s arm, ``u`` a uniform draw and
    ``arm_loss_fn(arm)`` the observed loss in ``[0, 1]``.  Returns
    ``(arm, new_log_w, prob)``.
    """
    log_w = np.asarray(log_w, dtype=float)
    rec = np.asarray(recommendations)
    K = int(rec.max()) + 1
    w = np.exp(log_w - log_w.max())
    w /= w.sum()
    prob = np.bincount(rec, weights=w, minlength=K)
    arm = int(min(np.searchsorted(np.cumsum(prob), u * prob.sum(), side="right"), K - 1))
    if prob[arm] == 0:
        arm = int(np.argmax(prob))
    est = arm_loss_fn(arm) / (prob[arm] + gamma)
    new = log_w - eta * est * (rec == arm)
    return arm, new, prob


def regbal_oracle(beta_values, counts, log_det):
    """``4 * beta * sqrt(t_i * log det V_i)`` per base."""
    return 4.0 * beta_values * np.sqrt(counts * np.maximum(log_det, 0.0))


class RegBal(Policy):
    """Regret balancing over per-representation LinUCB bases.

    Each round plays the base whose regret-oracle value on its own history
    is smallest.  Only that base is updated unless ``shared_updates``.
    """

    def __init__(self, reps, n_runs, *, delta=0.01, reg=1.0, sigma=0.3, schedule="fixed",
                 shared_updates=False, oracle: Optional[Callable] = None, name=None):
        self.bank = RepBank(reps, n_runs, reg=reg, sigma=sigma)
        M = self.bank.n_reps
        self.n_runs = n_runs
        self.delta = delta
        self.schedule = schedule
        self.shared = shared_updates
        self.oracle = oracle or regbal_oracle
        self.counts = np.zeros((M, n_runs), dtype=np.int64)
        self.oracle_values = np.zeros((M, n_runs))
        self.name = name or ("RegBal(shared)" if shared_updates else "RegBal")
        self.selecting_rep = np.zeros((1, n_runs), dtype=np.int64)
        self._feats = None
        self._base = None

    def select(self, contexts, t, live=None):
        delta = confidence_level(self.delta, self.schedule, t + 1)
        b = self.bank.betas(delta)
        logdet = self.bank.per_rep("log_det")
        self.oracle_values = self.oracle(b, self.counts, logdet)
        base = np.argmin(self.oracle_values, axis=0)
        self._feats = self.bank.features(contexts)
        u = self.bank.ucb(self._feats, delta)
        runs = np.arange(self.n_runs)
        arm = np.argmax(u[base, runs], axis=-1)
        self._base = base
        self.selecting_rep[0] = base
        return arm[None, :]

    def update(self, contexts, arms, rewards, live):
        M = self.bank.n_reps
        chosen = np.zeros((M, self.n_runs), dtype=bool)
        chosen[self._base, np.arange(self.n_runs)] = True
        chosen &= live[None, :]
        self.counts += chosen
        mask = np.broadcast_to(live, (M, self.n_runs)) if self.shared else chosen
        self.bank.update(self._feats, np.broadcast_to(arms[0], (M, self.n_runs)),
                         np.broadcast_to(rewards[0], (M, self.n_runs)), mask)


def regbal_step(oracle_values) -> int:
    """Index of the base with the smallest oracle value (lowest index on ties)."""
    v = np.asarray(oracle_values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one base")
    return int(np.argmin(v))
