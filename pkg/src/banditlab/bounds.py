"""Closed-form regret and time-to-constant-regret bounds.

The formulas assume ``reg``, ``S``, ``sigma`` and ``max_gap`` are at least 1;
smaller inputs are raised to 1 with a warning, since the bounds only serve
as overlays for experiments that use e.g. ``sigma = 0.3``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

E = math.e


@dataclass(frozen=True)
class BoundInputs:
    d: int
    L: float
    S: float
    sigma: float
    reg: float
    delta: float
    gap: float
    max_gap: float
    lambda_hls: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.L <= 0:
            raise ValueError("L must be positive")
        low = [k for k in ("reg", "S", "sigma", "max_gap") if getattr(self, k) < 1]
        if low:
            warnings.warn(f"raising {', '.join(low)} to 1 for bound evaluation",
                          RuntimeWarning, stacklevel=3)
            for k in low:
                object.__setattr__(self, k, 1.0)


def _need_gap(inputs: BoundInputs):
    if not inputs.gap > 0:
        raise ValueError("bounds need a positive minimum gap")


def beta_bound(inputs: BoundInputs, t: float) -> float:
    """Determinant-free upper bound on the confidence radius at round ``t``."""
    p = inputs
    inner = 2 * math.log(1 / p.delta) + p.d * math.log(1 + (t - 1) * p.L ** 2 / (p.reg * p.d))
    return p.sigma * math.sqrt(inner) + math.sqrt(p.reg) * p.S


def suboptimal_pulls_bound(inputs: BoundInputs, t: float) -> float:
    """``32 Dmax^2 reg S^2 sigma^2 (2 ln(1/delta) + d ln(1 + t L^2/(reg d)))^2 / D^2``."""
    _need_gap(inputs)
    if t < 1:
        raise ValueError("t must be >= 1")
    p = inputs
    inner = 2 * math.log(1 / p.delta) + p.d * math.log(1 + t * p.L ** 2 / (p.reg * p.d))
    return 32 * p.max_gap ** 2 * p.reg * p.S ** 2 * p.sigma ** 2 * inner ** 2 / p.gap ** 2


def _clamped_log(x: float, flags: list) -> float:
    if x < E:
        flags.append(x)
        return 1.0
    return math.log(x)


def tau_hls_terms(inputs: BoundInputs, final_display: bool = False):
    """Both branches of the time-to-constant-regret bound and a clamp flag.

    By default the first branch divides by ``lambda_hls**2``; with
    ``final_display`` it divides by ``lambda_hls`` instead (the two printed
    versions of the constant differ in this power).  Returns
    ``(branch1, branch2, clamped)``; infinite branches when
    ``lambda_hls <= 0``.
    """
    _need_gap(inputs)
    p = inputs
    lam = p.lambda_hls
    if not lam > 0:
        return math.inf, math.inf, False
    flags: list = []
    sr = math.sqrt(p.reg)
    log1 = _clamped_log(64 * p.d ** 2 * p.L ** 3 * p.sigma * p.S * sr
                        / (math.sqrt(lam) * p.gap * p.delta), flags)
    denom = math.sqrt(lam) if final_display else lam
    b1 = (384 * p.d * p.L * p.S * p.sigma * sr / (denom * p.gap) * log1) ** 2
    log2 = _clamped_log(512 * p.d * p.L ** 4 / (p.delta * lam ** 2), flags)
    b2 = 768 * p.L ** 4 / lam ** 2 * log2
    return b1, b2, bool(flags)


def tau_hls(inputs: BoundInputs, final_display: bool = False) -> float:
    """Time after which an HLS representation incurs no regret (``inf`` if not HLS)."""
    b1, b2, clamped = tau_hls_terms(inputs, final_display)
    if clamped:
        warnings.warn("a logarithm argument was below e and was clamped", RuntimeWarning,
                      stacklevel=2)
    return max(b1, b2)


def regret_bound(inputs: BoundInputs, n: float, tau: float = math.inf,
                 m_reps: int = 1) -> float:
    """``32 reg Dmax^2 S^2 sigma^2 / D * (2 ln(M/delta) + d ln(1 + min(tau,n) L^2/(reg d)))^2``."""
    _need_gap(inputs)
    if n < 1:
        raise ValueError("n must be >= 1")
    if m_reps < 1:
        raise ValueError("m_reps must be >= 1")
    p = inputs
    horizon = min(tau, n)
    inner = (2 * math.log(m_reps / p.delta)
             + p.d * math.log(1 + horizon * p.L ** 2 / (p.reg * p.d)))
    return 32 * p.reg * p.max_gap ** 2 * p.S ** 2 * p.sigma ** 2 / p.gap * inner ** 2


def leader_regret_envelope(per_rep: list[BoundInputs], n: float,
                           final_display: bool = False) -> float:
    """Smallest per-representation bound with ``delta/M`` confidence."""
    M = len(per_rep)
    if M == 0:
        raise ValueError("need at least one representation")
    out = math.inf
    for p in per_rep:
        q = replace(p, delta=p.delta / M)
        tau = tau_hls(q, final_display)
        out = min(out, regret_bound(p, n, tau, M))
    return out
