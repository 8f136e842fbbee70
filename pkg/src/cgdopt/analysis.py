"""Theory-side toolkit: stationary-point classification for the penalized
objective, step-size windows and linear-rate envelopes, and contraction
constants on strongly convex quadratics.

The envelope and contraction results assume convex L-smooth (respectively
strongly convex quadratic) objectives; they are reported, not enforced, for
anything else.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, InputError, as_vector
from .optimizers import Trace

__all__ = [
    "StationaryVerdict",
    "RateEnvelope",
    "QuadraticRate",
    "classify_stationary",
    "rate_envelope",
    "quadratic_rate",
    "pl_constant_quadratic",
    "empirical_rate",
    "estimate_smoothness",
]


@dataclass(frozen=True)
class StationaryVerdict:
    """Classification of a point under the penalized objective.

    * ``true_stationary``: grad f vanishes (so grad g does too).
    * ``fictitious``: grad g vanishes but grad f does not; then grad f is an
      eigenvector of the Hessian with eigenvalue -1/(2*lam).
    * ``not_stationary``: neither.

    `eigen_residual` is ||H grad f + grad f/(2 lam)|| / ||grad f||, defined
    when the gradient is nonzero and lam > 0.
    """

    kind: str
    grad_norm: float
    eigen_residual: float | None = None


def classify_stationary(obj, x, lam: float, tol_g: float = 1e-8, tol_e: float = 1e-6) -> StationaryVerdict:
    """Trichotomy check at x; needs an analytic Hessian for the fictitious test."""
    if lam < 0:
        raise InputError("penalty coefficient must be >= 0")
    x = as_vector(x, obj.dim)
    g = obj.gradient(x)
    gn = float(np.linalg.norm(g))
    if gn <= tol_g:
        return StationaryVerdict(kind="true_stationary", grad_norm=gn)
    if lam == 0:
        # no penalty, so no fictitious branch exists
        return StationaryVerdict(kind="not_stationary", grad_norm=gn)
    h = obj.hessian(x)
    residual = float(np.linalg.norm(h @ g + g / (2.0 * lam))) / gn
    kind = "fictitious" if residual <= tol_e else "not_stationary"
    return StationaryVerdict(kind=kind, grad_norm=gn, eigen_residual=residual)


@dataclass(frozen=True)
class RateEnvelope:
    """Step-size window and linear rate for penalized descent on a convex
    L-smooth objective satisfying the gradient-dominance inequality
    0.5*||grad f||^2 >= mu*(f - f*).

    Valid step sizes are (0, alpha_max); at alpha_star the gap f_k - f*
    contracts at least geometrically with ratio rho.
    """

    L: float
    mu: float
    lam: float
    alpha_max: float
    alpha_star: float
    rho: float
    applicability: str = "convex L-smooth; rate additionally needs gradient dominance"


def rate_envelope(L: float, mu: float, lam: float) -> RateEnvelope:
    """alpha_max = 2/(L(1+2*lam*L)^2), alpha_star = alpha_max/2,
    rho = 1 - mu/(L(1+2*lam*L)^2)."""
    if not (L > 0 and np.isfinite(L)):
        raise InputError("L must be finite and > 0")
    if not (0 < mu <= L):
        raise InputError("mu must satisfy 0 < mu <= L")
    if lam < 0 or not np.isfinite(lam):
        raise InputError("lam must be finite and >= 0")
    denom = L * (1.0 + 2.0 * lam * L) ** 2
    return RateEnvelope(
        L=L,
        mu=mu,
        lam=lam,
        alpha_max=2.0 / denom,
        alpha_star=1.0 / denom,
        rho=1.0 - mu / denom,
    )


@dataclass(frozen=True)
class QuadraticRate:
    """Contraction constants for penalized descent on f = 0.5 x^T Q x - b^T x.

    With extreme eigenvalues l, L of Q, the penalty matrix B = I + 2*lam*Q
    worsens the effective condition number to kappa = kappa(B)*kappa(Q); at
    the equioscillation step size alpha_opt the error ||x_k - x*|| contracts
    by factor (kappa-1)/(kappa+1) per step.
    """

    l: float
    L: float
    lam: float
    alpha_opt: float
    kappa: float
    factor: float
    applicability: str = "strongly convex quadratic"


def quadratic_rate(l: float, L: float, lam: float) -> QuadraticRate:
    """alpha_opt = 2/((1+2*lam*L)L + (1+2*lam*l)l), kappa = (1+2*lam*L)L /
    ((1+2*lam*l)l), factor = (kappa-1)/(kappa+1)."""
    if not (0 < l <= L) or not (np.isfinite(l) and np.isfinite(L)):
        raise InputError("need 0 < l <= L, both finite")
    if lam < 0 or not np.isfinite(lam):
        raise InputError("lam must be finite and >= 0")
    hi = (1.0 + 2.0 * lam * L) * L
    lo = (1.0 + 2.0 * lam * l) * l
    kappa = hi / lo
    return QuadraticRate(
        l=l,
        L=L,
        lam=lam,
        alpha_opt=2.0 / (hi + lo),
        kappa=kappa,
        factor=(kappa - 1.0) / (kappa + 1.0),
    )


def pl_constant_quadratic(q: Array) -> float:
    """Gradient-dominance constant of f = 0.5 x^T Q x - b^T x: the smallest
    eigenvalue of the symmetric positive definite Q."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InputError("Q must be a square matrix")
    if not np.allclose(q, q.T, rtol=1e-10, atol=1e-12):
        raise InputError("Q must be symmetric")
    lam_min = float(np.linalg.eigvalsh(q)[0])
    if lam_min <= 0:
        raise InputError("Q must be positive definite")
    return lam_min


def empirical_rate(trace: Trace, f_star: float) -> float:
    """Largest observed per-step ratio (f_{k+1} - f*)/(f_k - f*) along a
    trace, skipping steps where the gap has already collapsed below 1e-14.
    Returns 0 when no step had a usable gap."""
    fs = trace.f_values()
    if not trace.records:
        raise InputError("empty trace")
    worst = 0.0
    for fa, fb in zip(fs, fs[1:]):
        gap = fa - f_star
        if gap < 1e-14:
            continue
        worst = max(worst, (fb - f_star) / gap)
    return worst


def estimate_smoothness(obj, seed: int = 0, n_samples: int = 1000) -> float:
    """Crude smoothness constant for reporting: the max Hessian spectral norm
    over seeded uniform samples of the domain box. Exact constants should be
    used instead wherever the objective is quadratic."""
    if obj.domain_box is None:
        raise InputError("objective has no domain box to sample from")
    if not obj.has_hessian:
        raise InputError("smoothness estimate needs an analytic Hessian")
    box = np.asarray(obj.domain_box, dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        x = rng.uniform(box[:, 0], box[:, 1])
        worst = max(worst, float(np.linalg.norm(obj.hessian(x), 2)))
    return worst
