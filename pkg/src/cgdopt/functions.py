"""Synthetic benchmark functions with analytic values, gradients, Hessians
where tractable, standard domain boxes, and known global minima.

Definitions follow the standard forms from the Virtual Library of Simulation
Experiments test-function collection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Array, InputError, LambdaSchedule, Objective, as_vector

__all__ = [
    "TestFunction",
    "Table1Params",
    "make_quadratic",
    "registry",
    "lookup",
    "sample_x0",
]


@dataclass(frozen=True)
class Table1Params:
    """Published benchmark hyperparameters: penalty (constant or linear ramp)
    and step size."""

    lambda_start: float
    lambda_end: float | None  # None means a constant penalty
    alpha: float

    def schedule(self, length: int) -> LambdaSchedule:
        if self.lambda_end is None:
            return LambdaSchedule.constant(self.lambda_start)
        return LambdaSchedule.linear(self.lambda_start, self.lambda_end, length)

    def label(self) -> str:
        if self.lambda_end is None:
            return repr(self.lambda_start)
        return f"L({self.lambda_start!r}, {self.lambda_end!r})"


@dataclass(frozen=True)
class TestFunction:
    """A named benchmark objective.

    `minimum_interior` is False for minima attained on the domain-box
    boundary, where the gradient need not vanish (eggholder).
    """

    name: str
    objective: Objective
    table1: Optional[Table1Params] = None
    aliases: tuple[str, ...] = ()
    minimum_interior: bool = True

    @property
    def dim(self) -> int:
        return self.objective.dim

    @property
    def f_star(self) -> float:
        assert self.objective.known_minimum is not None
        return self.objective.known_minimum[1]

    @property
    def x_star(self) -> Array:
        assert self.objective.known_minimum is not None
        return self.objective.known_minimum[0]


def _box(dim: int, lo: float, hi: float) -> Array:
    return np.tile(np.array([lo, hi]), (dim, 1))


def make_quadratic(q: Array, b: Array | None = None, box_halfwidth: float = 10.0) -> Objective:
    """Objective f(x) = 0.5 x^T Q x - b^T x for symmetric positive definite Q.

    `q` may be a 1-D array of diagonal entries or a full matrix. The known
    minimum is x* = Q^-1 b with f* = -0.5 b^T x*.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        q = np.diag(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InputError("Q must be square")
    n = q.shape[0]
    if b is None:
        b = np.zeros(n)
    b = as_vector(b, n)

    x_star = np.linalg.solve(q, b)
    f_star = -0.5 * float(b @ x_star) + 0.0  # +0.0 normalizes -0.0

    def value(x):
        return 0.5 * float(x @ (q @ x)) - float(b @ x)

    def gradient(x):
        return q @ x - b

    def hessian(x):
        return q.copy()

    return Objective(
        dim=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(x_star, f_star),
        domain_box=_box(n, -box_halfwidth, box_halfwidth),
    )


def _quadratic10() -> TestFunction:
    # Fixed reproducible instance: Q = diag(1..10), b = 0, so the extreme
    # curvatures are exactly 1 and 10 and f* = 0 at the origin.
    obj = make_quadratic(np.arange(1.0, 11.0), box_halfwidth=10.0)
    return TestFunction(
        name="quadratic",
        objective=obj,
        table1=Table1Params(0.4, None, 0.01),
        aliases=("quadratic-n10",),
    )


def _rotated_hyper_ellipsoid(n: int = 5) -> TestFunction:
    # f(x) = sum_i sum_{j<=i} x_j^2 = sum_j (n-j+1) x_j^2 (1-based), the
    # library's sum-of-squares form: a diagonal quadratic with curvatures
    # 2n down to 2.
    w = np.arange(n, 0.0, -1.0)
    h = np.diag(2.0 * w)

    def value(x):
        return float(w @ (x * x))

    def gradient(x):
        return 2.0 * w * x

    def hessian(x):
        return h.copy()

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(np.zeros(n), 0.0),
        domain_box=_box(n, -65.536, 65.536),
    )
    return TestFunction(
        name="rotated-hyper-ellipsoid",
        objective=obj,
        table1=Table1Params(0.5, None, 0.01),
        aliases=("rhe",),
    )


def _levy(n: int = 2) -> TestFunction:
    # Separable in w_i = 1 + (x_i - 1)/4, so the Hessian is diagonal.
    if n < 1:
        raise InputError("levy needs n >= 1")

    def value(x):
        w = 1.0 + (x - 1.0) / 4.0
        out = math.sin(math.pi * w[0]) ** 2
        for i in range(n - 1):
            a = w[i] - 1.0
            out += a * a * (1.0 + 10.0 * math.sin(math.pi * w[i] + 1.0) ** 2)
        a = w[-1] - 1.0
        out += a * a * (1.0 + math.sin(2.0 * math.pi * w[-1]) ** 2)
        return out

    def gradient(x):
        w = 1.0 + (x - 1.0) / 4.0
        gw = np.zeros(n)
        gw[0] += math.pi * math.sin(2.0 * math.pi * w[0])
        for i in range(n - 1):
            a = w[i] - 1.0
            th = math.pi * w[i] + 1.0
            gw[i] += 2.0 * a * (1.0 + 10.0 * math.sin(th) ** 2)
            gw[i] += 10.0 * math.pi * a * a * math.sin(2.0 * th)
        a = w[-1] - 1.0
        ph = 2.0 * math.pi * w[-1]
        gw[-1] += 2.0 * a * (1.0 + math.sin(ph) ** 2)
        gw[-1] += 2.0 * math.pi * a * a * math.sin(2.0 * ph)
        return gw / 4.0

    def hessian(x):
        w = 1.0 + (x - 1.0) / 4.0
        hw = np.zeros(n)
        hw[0] += 2.0 * math.pi**2 * math.cos(2.0 * math.pi * w[0])
        for i in range(n - 1):
            a = w[i] - 1.0
            th = math.pi * w[i] + 1.0
            hw[i] += 2.0 * (1.0 + 10.0 * math.sin(th) ** 2)
            hw[i] += 40.0 * math.pi * a * math.sin(2.0 * th)
            hw[i] += 20.0 * math.pi**2 * a * a * math.cos(2.0 * th)
        a = w[-1] - 1.0
        ph = 2.0 * math.pi * w[-1]
        hw[-1] += 2.0 * (1.0 + math.sin(ph) ** 2)
        hw[-1] += 8.0 * math.pi * a * math.sin(2.0 * ph)
        hw[-1] += 8.0 * math.pi**2 * a * a * math.cos(2.0 * ph)
        return np.diag(hw / 16.0)

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(np.ones(n), 0.0),
        domain_box=_box(n, -10.0, 10.0),
    )
    return TestFunction(
        name="levy",
        objective=obj,
        table1=Table1Params(0.01, 0.1, 0.05) if n == 2 else None,
    )


_BRANIN_A = 1.0
_BRANIN_B = 5.1 / (4.0 * math.pi**2)
_BRANIN_C = 5.0 / math.pi
_BRANIN_R = 6.0
_BRANIN_S = 10.0
_BRANIN_T = 1.0 / (8.0 * math.pi)


def _branin() -> TestFunction:
    a, b, c, r, s, t = _BRANIN_A, _BRANIN_B, _BRANIN_C, _BRANIN_R, _BRANIN_S, _BRANIN_T

    def value(x):
        u = x[1] - b * x[0] ** 2 + c * x[0] - r
        return a * u * u + s * (1.0 - t) * math.cos(x[0]) + s

    def gradient(x):
        u = x[1] - b * x[0] ** 2 + c * x[0] - r
        du = -2.0 * b * x[0] + c
        return np.array([2.0 * a * u * du - s * (1.0 - t) * math.sin(x[0]), 2.0 * a * u])

    def hessian(x):
        u = x[1] - b * x[0] ** 2 + c * x[0] - r
        du = -2.0 * b * x[0] + c
        h11 = 2.0 * a * du * du + 2.0 * a * u * (-2.0 * b) - s * (1.0 - t) * math.cos(x[0])
        h12 = 2.0 * a * du
        return np.array([[h11, h12], [h12, 2.0 * a]])

    x_star = np.array([math.pi, 2.275])
    obj = Objective(
        dim=2,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(x_star, s / (8.0 * math.pi)),  # = 0.39788735772973816
        domain_box=np.array([[-5.0, 10.0], [0.0, 15.0]]),
    )
    return TestFunction(name="branin", objective=obj, table1=Table1Params(0.07, None, 0.01))


def _griewank(n: int = 2) -> TestFunction:
    sq = np.sqrt(np.arange(1.0, n + 1.0))

    def value(x):
        return float(np.sum(x * x) / 4000.0 - np.prod(np.cos(x / sq)) + 1.0)

    def gradient(x):
        t = x / sq
        c = np.cos(t)
        s = np.sin(t)
        g = x / 2000.0
        for m in range(n):
            rest = np.prod(np.delete(c, m))
            g[m] += (s[m] / sq[m]) * rest
        return g

    def hessian(x):
        t = x / sq
        c = np.cos(t)
        s = np.sin(t)
        h = np.zeros((n, n))
        for m in range(n):
            rest = np.prod(np.delete(c, m))
            h[m, m] = 1.0 / 2000.0 + (c[m] / (sq[m] * sq[m])) * rest
            for p in range(m + 1, n):
                rest2 = np.prod(np.delete(c, [m, p]))
                h[m, p] = h[p, m] = -(s[m] / sq[m]) * (s[p] / sq[p]) * rest2
        return h

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(np.zeros(n), 0.0),
        domain_box=_box(n, -600.0, 600.0),
    )
    return TestFunction(
        name="griewank",
        objective=obj,
        table1=Table1Params(40.0, None, 0.01) if n == 2 else None,
    )


def _matyas() -> TestFunction:
    h = np.array([[0.52, -0.48], [-0.48, 0.52]])

    def value(x):
        return 0.26 * (x[0] ** 2 + x[1] ** 2) - 0.48 * x[0] * x[1]

    def gradient(x):
        return h @ x

    def hessian(x):
        return h.copy()

    obj = Objective(
        dim=2,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(np.zeros(2), 0.0),
        domain_box=_box(2, -10.0, 10.0),
    )
    return TestFunction(name="matyas", objective=obj, table1=Table1Params(10.0, None, 0.01))


def _zakharov(n: int = 2) -> TestFunction:
    w = 0.5 * np.arange(1.0, n + 1.0)

    # keep s as a numpy scalar: huge iterates then overflow to inf instead
    # of raising, and the runner reports the run as nonfinite
    def value(x):
        s = w @ x
        return float(x @ x + s * s + s**4)

    def gradient(x):
        s = w @ x
        return 2.0 * x + (2.0 * s + 4.0 * s**3) * w

    def hessian(x):
        s = w @ x
        return 2.0 * np.eye(n) + (2.0 + 12.0 * s * s) * np.outer(w, w)

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        known_minimum=(np.zeros(n), 0.0),
        domain_box=_box(n, -5.0, 10.0),
    )
    return TestFunction(name="zakharov", objective=obj)


def _drop_wave() -> TestFunction:
    # Hand-derived gradient; no analytic Hessian.
    def value(x):
        r2 = float(x @ x)
        if not math.isfinite(r2):
            return math.nan
        return -(1.0 + math.cos(12.0 * math.sqrt(r2))) / (0.5 * r2 + 2.0)

    def gradient(x):
        r2 = float(x @ x)
        if not math.isfinite(r2):
            return np.full(2, math.nan)
        if r2 == 0.0:
            return np.zeros(2)
        rho = math.sqrt(r2)
        num = 1.0 + math.cos(12.0 * rho)
        den = 0.5 * r2 + 2.0
        factor = (12.0 * math.sin(12.0 * rho) * den / rho + num) / (den * den)
        return factor * x

    obj = Objective(
        dim=2,
        value=value,
        gradient=gradient,
        hessian=None,
        known_minimum=(np.zeros(2), -1.0),
        domain_box=_box(2, -5.12, 5.12),
    )
    return TestFunction(name="drop-wave", objective=obj, aliases=("dropwave",))


def _eggholder() -> TestFunction:
    # Hand-derived gradient; no analytic Hessian. The published global
    # minimum sits on the domain-box boundary, so the gradient does not
    # vanish there (minimum_interior=False).
    def _terms(x):
        a = 0.5 * x[0] + x[1] + 47.0
        b = x[0] - (x[1] + 47.0)
        return a, b

    def value(x):
        a, b = _terms(x)
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.nan
        return -(x[1] + 47.0) * math.sin(math.sqrt(abs(a))) - x[0] * math.sin(math.sqrt(abs(b)))

    def _dsin_sqrt_abs(u):
        # d/du sin(sqrt(|u|)); unbounded near u=0, zero exactly at u=0
        if u == 0.0:
            return 0.0
        su = math.sqrt(abs(u))
        return math.cos(su) * math.copysign(0.5 / su, u)

    def gradient(x):
        a, b = _terms(x)
        if not (math.isfinite(a) and math.isfinite(b)):
            return np.full(2, math.nan)
        sa = math.sqrt(abs(a))
        sb = math.sqrt(abs(b))
        da = _dsin_sqrt_abs(a)
        db = _dsin_sqrt_abs(b)
        g1 = -(x[1] + 47.0) * da * 0.5 - math.sin(sb) - x[0] * db
        g2 = -math.sin(sa) - (x[1] + 47.0) * da + x[0] * db
        return np.array([g1, g2])

    x_star = np.array([512.0, 404.2319])
    obj = Objective(
        dim=2,
        value=value,
        gradient=gradient,
        hessian=None,
        known_minimum=(x_star, -959.6406627106155),
        domain_box=_box(2, -512.0, 512.0),
    )
    return TestFunction(
        name="eggholder",
        objective=obj,
        aliases=("egg-holder",),
        minimum_interior=False,
    )


def registry() -> list[TestFunction]:
    """The benchmark suite, in canonical order."""
    return [
        _quadratic10(),
        _rotated_hyper_ellipsoid(),
        _levy(2),
        _branin(),
        _griewank(2),
        _matyas(),
        _zakharov(2),
        _drop_wave(),
        _eggholder(),
    ]


def levy(n: int = 2) -> TestFunction:
    """Parametric-dimension levy family (benchmark row uses n=2)."""
    return _levy(n)


def griewank(n: int = 2) -> TestFunction:
    return _griewank(n)


def zakharov(n: int = 2) -> TestFunction:
    return _zakharov(n)


def _index() -> dict[str, TestFunction]:
    out: dict[str, TestFunction] = {}
    for fn in registry():
        out[fn.name] = fn
        for alias in fn.aliases:
            out[alias] = fn
    return out


def lookup(name: str) -> TestFunction:
    """Find a registered function by its lowercase hyphenated name or alias."""
    key = name.strip().lower()
    table = _index()
    if key not in table:
        known = ", ".join(fn.name for fn in registry())
        raise InputError(f"unknown function {name!r}; known: {known}")
    return table[key]


def sample_x0(fn, seed: int) -> Array:
    """Deterministic-in-seed uniform sample from the function's domain box."""
    obj = getattr(fn, "objective", fn)
    if obj.domain_box is None:
        raise InputError("objective has no domain box to sample from")
    box = np.asarray(obj.domain_box, dtype=float)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1])
