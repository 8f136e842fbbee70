"""Shared numeric types: objectives with evaluation accounting, penalty
schedules, and the gradient-penalized objective g(x) = f(x) + lam*||grad f(x)||^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


class InputError(ValueError):
    """Invalid argument: bad dimension, non-finite data, out-of-range index."""


class CapabilityError(RuntimeError):
    """The objective does not provide a capability the operation needs."""


class NumericOverflowError(ArithmeticError):
    """A computation produced a non-finite value."""


def as_vector(x, dim: int | None = None) -> Array:
    """Validate `x` as a finite 1-D float64 vector, optionally of length `dim`."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise InputError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise InputError("vector has non-finite components")
    if dim is not None and v.size != dim:
        raise InputError(f"expected a vector of length {dim}, got {v.size}")
    return v


@dataclass(frozen=True)
class Objective:
    """A twice-differentiable scalar function with optional extras.

    `value` and `gradient` are required callables of a length-`dim` vector.
    `hessian`, when present, must return a symmetric (dim, dim) matrix.
    `known_minimum` is an (x*, f*) pair when the global minimum is known;
    `domain_box` is a (dim, 2) array of per-coordinate [lo, hi] sampling
    bounds. Objectives must be pure: same input, same output.
    """

    dim: int
    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    hessian: Optional[Callable[[Array], Array]] = None
    known_minimum: Optional[tuple[Array, float]] = None
    domain_box: Optional[Array] = None

    @property
    def has_hessian(self) -> bool:
        return self.hessian is not None


@dataclass
class EvalCounter:
    """Evaluation tallies for one optimizer run; nondecreasing by construction."""

    value_evals: int = 0
    grad_evals: int = 0
    hessian_evals: int = 0


class CountingObjective:
    """Metering proxy around an :class:`Objective`.

    All optimizers consume objectives through this wrapper so that every
    method is metered identically. A counter belongs to a single run and is
    never shared across runs.
    """

    def __init__(self, obj: Objective):
        self._obj = obj
        self.counter = EvalCounter()

    @property
    def dim(self) -> int:
        return self._obj.dim

    @property
    def domain_box(self):
        return self._obj.domain_box

    @property
    def known_minimum(self):
        return self._obj.known_minimum

    @property
    def has_hessian(self) -> bool:
        return self._obj.has_hessian

    def value(self, x: Array) -> float:
        self.counter.value_evals += 1
        return float(self._obj.value(x))

    def gradient(self, x: Array) -> Array:
        self.counter.grad_evals += 1
        return self._obj.gradient(x)

    def hessian(self, x: Array) -> Array:
        if self._obj.hessian is None:
            raise CapabilityError(
                "objective has no analytic Hessian; use the finite-difference "
                "variant (cgd-fd) or a quasi-Newton method"
            )
        self.counter.hessian_evals += 1
        return self._obj.hessian(x)


def penalized_value(obj, x, lam: float) -> float:
    """f(x) + lam*||grad f(x)||^2, the gradient-penalized objective value.

    Costs one value and one gradient evaluation.
    """
    if lam < 0:
        raise InputError("penalty coefficient must be >= 0")
    x = as_vector(x, obj.dim)
    g = obj.gradient(x)
    out = float(obj.value(x)) + lam * float(g @ g)
    if not np.isfinite(out):
        raise NumericOverflowError(f"penalized value is non-finite at x={x!r}")
    return out


def penalized_gradient(obj, x, lam: float) -> Array:
    """(I + 2*lam*H(x)) grad f(x), the gradient of the penalized objective.

    Needs an analytic Hessian; costs one gradient and one Hessian evaluation.
    With lam=0 this returns grad f(x) unchanged.
    """
    if lam < 0:
        raise InputError("penalty coefficient must be >= 0")
    x = as_vector(x, obj.dim)
    if not obj.has_hessian:
        raise CapabilityError(
            "penalized_gradient needs an analytic Hessian; use the "
            "finite-difference variant (cgd-fd) for Hessian-free objectives"
        )
    g = obj.gradient(x)
    h = obj.hessian(x)
    out = g + (2.0 * lam) * (h @ g)
    if not np.isfinite(out).all():
        raise NumericOverflowError(f"penalized gradient is non-finite at x={x!r}")
    return out


@dataclass(frozen=True)
class LambdaSchedule:
    """Sequence of penalty coefficients lambda_k.

    Either constant, or `length` linearly spaced values from `start` to `end`
    (both endpoints exact). Constant schedules accept any k >= 0; linear
    schedules are defined for 0 <= k < length only.
    """

    kind: str
    start: float
    end: float | None = None
    length: int | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise InputError(f"unknown schedule kind {self.kind!r}")
        if not np.isfinite(self.start) or self.start < 0:
            raise InputError("schedule start must be finite and >= 0")
        if self.kind == "linear":
            if self.end is None or not np.isfinite(self.end) or self.end < 0:
                raise InputError("linear schedule needs a finite end >= 0")
            if self.length is None or self.length < 1:
                raise InputError("linear schedule needs length >= 1")

    @classmethod
    def constant(cls, value: float) -> "LambdaSchedule":
        return cls(kind="constant", start=float(value))

    @classmethod
    def linear(cls, start: float, end: float, length: int) -> "LambdaSchedule":
        return cls(kind="linear", start=float(start), end=float(end), length=int(length))

    def at(self, k: int) -> float:
        return schedule_at(self, k)


def schedule_at(sched: LambdaSchedule, k: int) -> float:
    """lambda_k for iteration k under the given schedule."""
    if k < 0:
        raise InputError(f"schedule index must be >= 0, got {k}")
    if sched.kind == "constant":
        return sched.start
    assert sched.length is not None and sched.end is not None
    if k >= sched.length:
        raise InputError(f"schedule index {k} out of range for length {sched.length}")
    if sched.length == 1 or k == 0:
        return sched.start
    if k == sched.length - 1:
        return sched.end
    return sched.start + (sched.end - sched.start) * (k / (sched.length - 1))


@dataclass(frozen=True)
class IterateRecord:
    """Per-iteration snapshot: the state at x_k and the step taken from it.

    `cumulative_grad_evals` is the number of gradient evaluations charged
    before this iteration's direction work began, i.e. the cost of reaching
    x_k. `direction_kind` is "cgd" when the method's own direction passed the
    descent check (or needs none) and "steepest_fallback" when the iteration
    moved along -grad f instead.
    """

    k: int
    x: Array
    f: float
    grad_norm: float
    direction_kind: str
    cumulative_grad_evals: int
    lambda_k: float


def fd_gradient_check(obj, x, h: float = 1e-6) -> float:
    """Worst-coordinate discrepancy between the analytic gradient and central
    differences of the value.

    Uses relative error where |df/dx_i| >= 1 and absolute error below that.
    """
    if h <= 0:
        raise InputError("finite-difference step must be > 0")
    x = as_vector(x, obj.dim)
    g = obj.gradient(x)
    worst = 0.0
    for i in range(obj.dim):
        e = np.zeros(obj.dim)
        e[i] = h
        fd = (float(obj.value(x + e)) - float(obj.value(x - e))) / (2.0 * h)
        worst = max(worst, abs(float(g[i]) - fd) / max(1.0, abs(float(g[i]))))
    return worst
