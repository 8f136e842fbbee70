"""Gradient-penalty line-search optimizers and a benchmark harness.

The core idea: descend on g(x) = f(x) + lam*||grad f(x)||^2 instead of f.
The penalty steepens the landscape while keeping the true stationary points,
so constant-step descent can make much larger early progress. Exact,
finite-difference, and quasi-Newton variants are provided, together with a
benchmark function suite, convergence-rate analysis helpers, an experiment
runner, an HTTP service, and a CLI client.
"""
from .core import (
    CapabilityError,
    CountingObjective,
    EvalCounter,
    InputError,
    IterateRecord,
    LambdaSchedule,
    NumericOverflowError,
    Objective,
    fd_gradient_check,
    penalized_gradient,
    penalized_value,
    schedule_at,
)
from .functions import TestFunction, lookup, make_quadratic, registry, sample_x0
from .optimizers import (
    METHODS,
    OptimizerConfig,
    QuasiNewtonState,
    Trace,
    cgd_direction,
    cgd_fd_direction,
    qn_hessian_update,
    qn_inverse_update,
    run,
    run_baseline,
    run_cgd,
    run_cgd_fd,
    run_cgd_qn,
)
from .analysis import (
    QuadraticRate,
    RateEnvelope,
    StationaryVerdict,
    classify_stationary,
    empirical_rate,
    pl_constant_quadratic,
    quadratic_rate,
    rate_envelope,
)
from .experiments import (
    ExperimentSpec,
    first_step_improvement,
    qn_suite,
    run_experiment,
    table1_suite,
)

__version__ = "0.1.0"
