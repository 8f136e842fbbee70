"""Constant-step line-search methods.

Methods:

* ``gd``: steepest descent, x_{k+1} = x_k - alpha*grad f_k.
* ``cgd``: descent on the gradient-penalized objective with the exact
  Hessian: p_k = -(I + 2*lambda_k*H_k) grad f_k, falling back to -grad f_k
  whenever p_k fails the descent check grad f_k^T p_k < 0.
* ``cgd-fd``: Hessian-free variant; the Hessian-gradient product is
  approximated by a forward difference of the gradient with probe step r,
  giving p_k = -[(1-nu)*grad f_k + nu*grad f(x_k + r*grad f_k)] with
  nu = 2*lambda_k/r. Runs under a gradient-evaluation budget of T, pays 2
  evaluations per penalized step and 1 per steepest step, and permanently
  reverts to steepest descent after a failed descent check or once k
  reaches the stopping threshold b.
* ``cgd-dfp`` / ``cgd-bfgs``: quasi-Newton variants that replace H_k with a
  running Hessian approximation, updated by the DFP/BFGS rank-two formulas.
* ``dfp`` / ``bfgs``: vanilla quasi-Newton baselines maintaining the
  inverse-Hessian approximation, p_k = -G_k grad f_k.

Every run emits a Trace with one record per completed iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Array,
    CapabilityError,
    CountingObjective,
    EvalCounter,
    InputError,
    IterateRecord,
    LambdaSchedule,
    Objective,
    as_vector,
)

__all__ = [
    "METHODS",
    "DIRECTION_PRIMARY",
    "DIRECTION_FALLBACK",
    "OptimizerConfig",
    "QuasiNewtonState",
    "Trace",
    "cgd_direction",
    "cgd_fd_direction",
    "qn_inverse_update",
    "qn_hessian_update",
    "run",
    "run_cgd",
    "run_cgd_fd",
    "run_cgd_qn",
    "run_baseline",
]

METHODS = ("gd", "cgd", "cgd-fd", "cgd-dfp", "cgd-bfgs", "dfp", "bfgs")

DIRECTION_PRIMARY = "cgd"
DIRECTION_FALLBACK = "steepest_fallback"

# Relative curvature floor below which a quasi-Newton update is skipped to
# keep the approximation positive definite.
_CURVATURE_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one optimizer run.

    `iters` is the iteration cap T; for cgd-fd it doubles as the gradient
    budget. `threshold` is the cgd-fd cutoff b (defaults to T/4), `fd_step`
    the probe step r, and `grad_tol` an optional early exit on ||grad f_k||
    (0 disables it).
    """

    method: str
    alpha: float
    lam: LambdaSchedule = field(default_factory=lambda: LambdaSchedule.constant(0.0))
    iters: int = 40
    threshold: int | None = None
    fd_step: float = 0.01
    grad_tol: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; known: {', '.join(METHODS)}")
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InputError("alpha must be finite and > 0")
        if self.iters < 1:
            raise InputError("iters must be >= 1")
        if self.threshold is not None and not (1 <= self.threshold <= self.iters):
            raise InputError("threshold must satisfy 1 <= b <= iters")
        if self.method == "cgd-fd" and not (self.fd_step > 0 and np.isfinite(self.fd_step)):
            raise InputError("fd_step must be finite and > 0 for cgd-fd")
        if self.grad_tol < 0:
            raise InputError("grad_tol must be >= 0")
        if self.lam.kind == "linear" and self.lam.length < self.iters:
            raise InputError(
                f"linear schedule of length {self.lam.length} cannot cover {self.iters} iterations"
            )

    @property
    def b(self) -> int:
        """Effective stopping threshold (default: iters // 4, at least 1)."""
        if self.threshold is not None:
            return self.threshold
        return max(1, self.iters // 4)


@dataclass
class QuasiNewtonState:
    """Running Hessian approximation and the last update pair."""

    g_tilde: Array
    last_s: Array | None = None
    last_y: Array | None = None


@dataclass
class Trace:
    """History of one run: per-iteration records plus the final iterate.

    `records[k]` snapshots x_k and the step taken from it; `final_x` is the
    iterate the run stopped at (not included in `records`). `terminated_by`
    is one of budget, iterations, grad_tol, nonfinite; a nonfinite exit keeps
    the last finite iterate as `final_x` and marks the offending iteration in
    `nonfinite_at`.
    """

    method: str
    records: list[IterateRecord]
    terminated_by: str
    final_x: Array
    final_f: float
    counter: EvalCounter
    qn_update_skips: tuple[int, ...] = ()
    nonfinite_at: int | None = None

    @property
    def grad_evals(self) -> int:
        return self.counter.grad_evals

    def f_values(self) -> list[float]:
        """Objective values along the run, final iterate included."""
        return [r.f for r in self.records] + [self.final_f]


def _descent(g: Array, p: Array) -> bool:
    return float(g @ p) < 0.0


def cgd_direction(obj, x, lam: float) -> tuple[Array, str]:
    """Penalized direction -(I + 2*lam*H(x)) grad f(x) with descent check.

    Returns (-grad f(x), "steepest_fallback") when the penalized direction is
    not a descent direction. Costs one gradient and one Hessian evaluation.
    """
    x = as_vector(x, obj.dim)
    if not obj.has_hessian:
        raise CapabilityError("cgd needs an analytic Hessian; use cgd-fd instead")
    g = obj.gradient(x)
    h = obj.hessian(x)
    p = -(g + (2.0 * lam) * (h @ g))
    if _descent(g, p):
        return p, DIRECTION_PRIMARY
    return -g, DIRECTION_FALLBACK


def cgd_fd_direction(obj, x, lam: float, r: float) -> tuple[Array, str]:
    """Hessian-free penalized direction via a gradient probe at x + r*grad f.

    p = -[(1-nu) grad f(x) + nu grad f(x + r*grad f(x))], nu = 2*lam/r.
    Costs exactly two gradient evaluations, probe included.
    """
    if r <= 0:
        raise InputError("probe step r must be > 0")
    x = as_vector(x, obj.dim)
    nu = 2.0 * lam / r
    g = obj.gradient(x)
    probe = obj.gradient(x + r * g)
    p = -((1.0 - nu) * g + nu * probe)
    if _descent(g, p):
        return p, DIRECTION_PRIMARY
    return -g, DIRECTION_FALLBACK


def _curvature_ok(s: Array, y: Array) -> bool:
    ys = float(y @ s)
    return ys > _CURVATURE_TOL * (float(np.linalg.norm(y)) * float(np.linalg.norm(s)))


def _symmetrize(m: Array) -> Array:
    return 0.5 * (m + m.T)


def qn_inverse_update(g: Array, s: Array, y: Array, variant: str) -> Array:
    """Rank-two update of an inverse-Hessian approximation; G' y = s.

    Skips (returns `g` unchanged, same object) when the curvature y^T s is
    not safely positive, preserving positive definiteness.
    """
    if variant not in ("dfp", "bfgs"):
        raise InputError(f"unknown quasi-Newton variant {variant!r}")
    if not _curvature_ok(s, y):
        return g
    ys = float(y @ s)
    if variant == "dfp":
        gy = g @ y
        ygy = float(y @ gy)
        if ygy <= 0:
            return g
        out = g + np.outer(s, s) / ys - np.outer(gy, gy) / ygy
    else:
        a = np.eye(len(s)) - np.outer(s, y) / ys
        out = a @ g @ a.T + np.outer(s, s) / ys
    return _symmetrize(out)


def qn_hessian_update(g_tilde: Array, s: Array, y: Array, variant: str) -> Array:
    """Rank-two update of a direct Hessian approximation; G~' s = y.

    Same skip rule as :func:`qn_inverse_update`.
    """
    if variant not in ("dfp", "bfgs"):
        raise InputError(f"unknown quasi-Newton variant {variant!r}")
    if not _curvature_ok(s, y):
        return g_tilde
    ys = float(y @ s)
    if variant == "dfp":
        a = np.eye(len(s)) - np.outer(y, s) / ys
        out = a @ g_tilde @ a.T + np.outer(y, y) / ys
    else:
        gs = g_tilde @ s
        sgs = float(s @ gs)
        if sgs <= 0:
            return g_tilde
        out = g_tilde + np.outer(y, y) / ys - np.outer(gs, gs) / sgs
    return _symmetrize(out)


def _finite(*arrays) -> bool:
    return all(np.isfinite(a).all() for a in arrays)


class _Run:
    """Shared bookkeeping for the run loops."""

    def __init__(self, obj: Objective, config: OptimizerConfig, x0):
        self.cobj = CountingObjective(obj)
        self.config = config
        self.x = as_vector(x0, obj.dim).copy()
        self.records: list[IterateRecord] = []
        self.skips: list[int] = []

    def record(self, k: int, f: float, grad_norm: float, kind: str, snapshot: int, lam_k: float):
        self.records.append(
            IterateRecord(
                k=k,
                x=self.x.copy(),
                f=f,
                grad_norm=grad_norm,
                direction_kind=kind,
                cumulative_grad_evals=snapshot,
                lambda_k=lam_k,
            )
        )

    def finish(self, reason: str, nonfinite_at: int | None = None, final_f: float | None = None) -> Trace:
        if final_f is None:
            final_f = self.cobj.value(self.x)
        return Trace(
            method=self.config.method,
            records=self.records,
            terminated_by=reason,
            final_x=self.x,
            final_f=final_f,
            counter=self.cobj.counter,
            qn_update_skips=tuple(self.skips),
            nonfinite_at=nonfinite_at,
        )


def run_cgd(obj: Objective, config: OptimizerConfig, x0) -> Trace:
    """Exact-Hessian penalized descent for `iters` iterations."""
    if config.method != "cgd":
        raise InputError(f"run_cgd got method {config.method!r}")
    if not obj.has_hessian:
        raise CapabilityError("cgd needs an analytic Hessian; use cgd-fd instead")
    st = _Run(obj, config, x0)
    for k in range(config.iters):
        snapshot = st.cobj.counter.grad_evals
        lam_k = config.lam.at(k)
        f_k = st.cobj.value(st.x)
        g = st.cobj.gradient(st.x)
        if not (math.isfinite(f_k) and np.isfinite(g).all()):
            return st.finish("nonfinite", nonfinite_at=k, final_f=f_k)
        gn = float(np.linalg.norm(g))
        if config.grad_tol > 0 and gn <= config.grad_tol:
            return st.finish("grad_tol", final_f=f_k)
        h = st.cobj.hessian(st.x)
        p = -(g + (2.0 * lam_k) * (h @ g))
        if _descent(g, p):
            kind = DIRECTION_PRIMARY
        else:
            p = -g
            kind = DIRECTION_FALLBACK
        st.record(k, f_k, gn, kind, snapshot, lam_k)
        x_next = st.x + config.alpha * p
        if not _finite(x_next):
            return st.finish("nonfinite", nonfinite_at=k + 1, final_f=f_k)
        st.x = x_next
    return st.finish("iterations")


def run_cgd_fd(obj: Objective, config: OptimizerConfig, x0) -> Trace:
    """Budgeted Hessian-free penalized descent.

    The gradient budget equals `iters`; the run returns early once the
    budget is exhausted. Penalized steps are taken only while k < b and no
    descent check has failed; a failed check latches steepest descent
    permanently. A penalized step is also refused when only one evaluation
    is left in the budget (it would cost two).
    """
    if config.method != "cgd-fd":
        raise InputError(f"run_cgd_fd got method {config.method!r}")
    st = _Run(obj, config, x0)
    budget = config.iters
    b = config.b
    r = config.fd_step
    use_cgd = True
    for k in range(config.iters):
        c = st.cobj.counter.grad_evals
        if c >= budget:
            return st.finish("budget")
        lam_k = config.lam.at(k)
        f_k = st.cobj.value(st.x)
        g = st.cobj.gradient(st.x)
        if not (math.isfinite(f_k) and np.isfinite(g).all()):
            return st.finish("nonfinite", nonfinite_at=k, final_f=f_k)
        gn = float(np.linalg.norm(g))
        if config.grad_tol > 0 and gn <= config.grad_tol:
            return st.finish("grad_tol", final_f=f_k)
        if use_cgd and k < b and c + 2 <= budget:
            nu = 2.0 * lam_k / r
            probe = st.cobj.gradient(st.x + r * g)
            if not _finite(probe):
                return st.finish("nonfinite", nonfinite_at=k, final_f=f_k)
            p = -((1.0 - nu) * g + nu * probe)
            if _descent(g, p):
                kind = DIRECTION_PRIMARY
            else:
                p = -g
                kind = DIRECTION_FALLBACK
                use_cgd = False
        else:
            p = -g
            kind = DIRECTION_FALLBACK
        st.record(k, f_k, gn, kind, c, lam_k)
        x_next = st.x + config.alpha * p
        if not _finite(x_next):
            return st.finish("nonfinite", nonfinite_at=k + 1, final_f=f_k)
        st.x = x_next
    return st.finish("iterations")


def _run_qn(obj: Objective, config: OptimizerConfig, x0, *, penalized: bool) -> Trace:
    variant = "dfp" if config.method.endswith("dfp") else "bfgs"
    st = _Run(obj, config, x0)
    n = obj.dim
    state = QuasiNewtonState(g_tilde=np.eye(n))
    g: Array | None = None
    for k in range(config.iters):
        snapshot = st.cobj.counter.grad_evals
        lam_k = config.lam.at(k)
        f_k = st.cobj.value(st.x)
        if g is None:
            g = st.cobj.gradient(st.x)
        if not (math.isfinite(f_k) and np.isfinite(g).all()):
            return st.finish("nonfinite", nonfinite_at=k, final_f=f_k)
        gn = float(np.linalg.norm(g))
        if config.grad_tol > 0 and gn <= config.grad_tol:
            return st.finish("grad_tol", final_f=f_k)
        if penalized:
            p = -(g + (2.0 * lam_k) * (state.g_tilde @ g))
            if _descent(g, p):
                kind = DIRECTION_PRIMARY
            else:
                p = -g
                kind = DIRECTION_FALLBACK
        else:
            # vanilla quasi-Newton: G is SPD, so -G g is already a descent
            # direction whenever g != 0
            p = -(state.g_tilde @ g)
            kind = DIRECTION_PRIMARY
        st.record(k, f_k, gn, kind, snapshot, lam_k)
        x_next = st.x + config.alpha * p
        if not _finite(x_next):
            return st.finish("nonfinite", nonfinite_at=k + 1, final_f=f_k)
        g_next = st.cobj.gradient(x_next)
        if not _finite(g_next):
            st.x = x_next
            return st.finish("nonfinite", nonfinite_at=k + 1)
        s = x_next - st.x
        y = g_next - g
        if penalized:
            updated = qn_hessian_update(state.g_tilde, s, y, variant)
        else:
            updated = qn_inverse_update(state.g_tilde, s, y, variant)
        if updated is state.g_tilde:
            st.skips.append(k)
        else:
            state.g_tilde = updated
            state.last_s = s
            state.last_y = y
        st.x = x_next
        g = g_next
    return st.finish("iterations")


def run_cgd_qn(obj: Objective, config: OptimizerConfig, x0) -> Trace:
    """Quasi-Newton penalized descent: H_k replaced by a running direct
    Hessian approximation (identity-initialized), one gradient evaluation
    per iteration with the look-ahead gradient reused for the update."""
    if config.method not in ("cgd-dfp", "cgd-bfgs"):
        raise InputError(f"run_cgd_qn got method {config.method!r}")
    return _run_qn(obj, config, x0, penalized=True)


def run_baseline(obj: Objective, config: OptimizerConfig, x0) -> Trace:
    """Constant-step baselines: gd, and vanilla dfp/bfgs on the inverse form."""
    if config.method == "gd":
        st = _Run(obj, config, x0)
        for k in range(config.iters):
            snapshot = st.cobj.counter.grad_evals
            lam_k = config.lam.at(k)
            f_k = st.cobj.value(st.x)
            g = st.cobj.gradient(st.x)
            if not (math.isfinite(f_k) and np.isfinite(g).all()):
                return st.finish("nonfinite", nonfinite_at=k, final_f=f_k)
            gn = float(np.linalg.norm(g))
            if config.grad_tol > 0 and gn <= config.grad_tol:
                return st.finish("grad_tol", final_f=f_k)
            st.record(k, f_k, gn, DIRECTION_PRIMARY, snapshot, lam_k)
            x_next = st.x - config.alpha * g
            if not _finite(x_next):
                return st.finish("nonfinite", nonfinite_at=k + 1, final_f=f_k)
            st.x = x_next
        return st.finish("iterations")
    if config.method in ("dfp", "bfgs"):
        return _run_qn(obj, config, x0, penalized=False)
    raise InputError(f"run_baseline got method {config.method!r}")


def run(obj: Objective, config: OptimizerConfig, x0) -> Trace:
    """Dispatch a run to the configured method."""
    if config.method == "cgd":
        return run_cgd(obj, config, x0)
    if config.method == "cgd-fd":
        return run_cgd_fd(obj, config, x0)
    if config.method in ("cgd-dfp", "cgd-bfgs"):
        return run_cgd_qn(obj, config, x0)
    return run_baseline(obj, config, x0)
