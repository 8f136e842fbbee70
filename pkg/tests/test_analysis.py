import math

import numpy as np
import pytest

from cgdopt.analysis import (
    classify_stationary,
    empirical_rate,
    estimate_smoothness,
    pl_constant_quadratic,
    quadratic_rate,
    rate_envelope,
)
from cgdopt.core import InputError, LambdaSchedule, Objective
from cgdopt.functions import lookup, make_quadratic, registry
from cgdopt.optimizers import DIRECTION_FALLBACK, OptimizerConfig, run, run_cgd

DIAG24 = make_quadratic([2.0, 4.0])


def sine_objective():
    return Objective(
        dim=1,
        value=lambda x: math.sin(x[0]),
        gradient=lambda x: np.array([math.cos(x[0])]),
        hessian=lambda x: np.array([[-math.sin(x[0])]]),
    )


class TestClassifier:
    def test_fictitious_on_sine(self):
        obj = sine_objective()
        for x in (np.pi / 6, np.arcsin(0.5), np.pi / 6 + 2 * np.pi):
            v = classify_stationary(obj, [x], 1.0)
            assert v.kind == "fictitious"
            assert v.grad_norm > 1e-8
            assert v.eigen_residual <= 1e-6

    def test_true_stationary_on_sine(self):
        v = classify_stationary(sine_objective(), [np.pi / 2], 1.0)
        assert v.kind == "true_stationary"

    def test_not_stationary_on_sine(self):
        v = classify_stationary(sine_objective(), [0.1], 1.0)
        assert v.kind == "not_stationary"
        assert v.eigen_residual > 1e-6

    def test_spd_quadratic_has_no_fictitious_points(self):
        # 1 + 2*lam*H is positive definite, so only true stationary points
        for lam in (0.1, 0.4, 10.0):
            v = classify_stationary(DIAG24, [1.0, 1.0], lam)
            assert v.kind == "not_stationary"

    def test_lam_zero_has_no_fictitious_branch(self):
        v = classify_stationary(sine_objective(), [np.pi / 6], 0.0)
        assert v.kind == "not_stationary"
        assert v.eigen_residual is None

    @pytest.mark.parametrize(
        "name", [fn.name for fn in registry() if fn.minimum_interior and fn.objective.has_hessian]
    )
    def test_registered_minima_are_true_stationary(self, name):
        fn = lookup(name)
        for lam in (0.01, 0.4, 10.0):
            assert classify_stationary(fn.objective, fn.x_star, lam).kind == "true_stationary"

    def test_fictitious_point_forces_fallback_or_zero_direction(self):
        # consistency with the optimizer's descent check
        obj = sine_objective()
        for x in (np.pi / 6, np.arcsin(0.5)):
            v = classify_stationary(obj, [x], 1.0)
            assert v.kind == "fictitious"
            cfg = OptimizerConfig(method="cgd", alpha=0.1, lam=LambdaSchedule.constant(1.0), iters=1)
            tr = run_cgd(obj, cfg, [x])
            took_fallback = tr.records[0].direction_kind == DIRECTION_FALLBACK
            step_norm = float(np.linalg.norm(tr.final_x - tr.records[0].x))
            assert took_fallback or step_norm <= 1e-12


class TestRateEnvelope:
    def test_diag24_numbers(self):
        env = rate_envelope(4.0, 2.0, 0.4)
        assert env.alpha_max == pytest.approx(2 / 70.56, rel=1e-12)
        assert env.alpha_star == pytest.approx(1 / 70.56, rel=1e-12)
        assert env.rho == pytest.approx(1 - 2 / 70.56, rel=1e-12)

    def test_lam_zero_gives_classical_constants(self):
        env = rate_envelope(4.0, 2.0, 0.0)
        assert env.alpha_max == pytest.approx(0.5)
        assert env.rho == pytest.approx(0.5)

    def test_quadratic10_numbers(self):
        env = rate_envelope(10.0, 1.0, 0.4)
        assert env.alpha_max == pytest.approx(2 / 8100 * 10, rel=1e-12)  # 2/(10*81)
        assert env.alpha_max == pytest.approx(0.00246913580, rel=1e-8)

    def test_rho_nondecreasing_in_lam(self):
        lams = np.linspace(0.0, 5.0, 60)
        rhos = [rate_envelope(7.0, 2.5, lam).rho for lam in lams]
        assert all(b >= a for a, b in zip(rhos, rhos[1:]))

    def test_window_ordering(self):
        env = rate_envelope(3.0, 1.0, 0.7)
        assert 0 < env.alpha_star < env.alpha_max
        assert 0 <= env.rho < 1

    def test_validation(self):
        with pytest.raises(InputError):
            rate_envelope(0.0, 1.0, 0.4)
        with pytest.raises(InputError):
            rate_envelope(4.0, 5.0, 0.4)  # mu > L
        with pytest.raises(InputError):
            rate_envelope(4.0, 1.0, -0.1)


class TestQuadraticRate:
    def test_diag24_numbers(self):
        qr = quadratic_rate(2.0, 4.0, 0.4)
        assert qr.alpha_opt == pytest.approx(2 / 22, rel=1e-12)
        assert qr.kappa == pytest.approx(16.8 / 5.2, rel=1e-12)
        assert qr.factor == pytest.approx(0.527273, abs=1e-6)

    def test_lam_zero_classical(self):
        qr = quadratic_rate(2.0, 4.0, 0.0)
        assert qr.kappa == pytest.approx(2.0)
        assert qr.factor == pytest.approx((4 - 2) / (4 + 2), rel=1e-12)

    def test_equal_eigenvalues_contract_in_one_step(self):
        for lam in (0.0, 0.4, 3.0):
            assert quadratic_rate(3.0, 3.0, lam).factor == 0.0

    def test_penalty_worsens_conditioning(self):
        for lam in (0.01, 0.4, 10.0):
            assert quadratic_rate(1.0, 10.0, lam).kappa > 10.0

    def test_validation(self):
        with pytest.raises(InputError):
            quadratic_rate(0.0, 4.0, 0.4)
        with pytest.raises(InputError):
            quadratic_rate(5.0, 4.0, 0.4)


class TestPlConstant:
    def test_diagonal_cases(self):
        assert pl_constant_quadratic(np.diag([2.0, 4.0])) == pytest.approx(2.0)
        assert pl_constant_quadratic(np.diag(np.arange(1.0, 11.0))) == pytest.approx(1.0)

    def test_gradient_dominance_holds_at_sampled_points(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((5, 5))
        q = a @ a.T + 0.5 * np.eye(5)
        mu = pl_constant_quadratic(q)
        obj = make_quadratic(q, b=rng.standard_normal(5))
        _, f_star = obj.known_minimum
        for _ in range(100):
            x = rng.uniform(-10, 10, 5)
            g = obj.gradient(x)
            assert 0.5 * float(g @ g) >= mu * (obj.value(x) - f_star) - 1e-9

    def test_rejects_non_spd(self):
        with pytest.raises(InputError):
            pl_constant_quadratic(np.diag([1.0, -2.0]))
        with pytest.raises(InputError):
            pl_constant_quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(InputError):
            pl_constant_quadratic(np.ones((2, 3)))


class TestEmpiricalRate:
    def test_cgd_beats_envelope_rate(self):
        env = rate_envelope(4.0, 2.0, 0.4)
        cfg = OptimizerConfig(
            method="cgd", alpha=env.alpha_star, lam=LambdaSchedule.constant(0.4), iters=200
        )
        tr = run_cgd(DIAG24, cfg, [3.0, -2.0])
        assert empirical_rate(tr, 0.0) <= env.rho

    def test_gd_at_classical_optimum(self):
        # alpha = 2/(L+l) gives per-step f-ratio ((L-l)/(L+l))^2 on a quadratic
        cfg = OptimizerConfig(method="gd", alpha=2 / 6, iters=100)
        tr = run(DIAG24, cfg, [1.0, 1.0])
        assert empirical_rate(tr, 0.0) <= (2 / 6) ** 2 + 1e-9

    def test_collapsed_gap_returns_zero(self):
        cfg = OptimizerConfig(method="gd", alpha=0.25, iters=5, grad_tol=0.0)
        tr = run(DIAG24, cfg, [0.0, 0.0])  # starts at the minimum
        assert empirical_rate(tr, 0.0) == 0.0

    def test_empty_trace_rejected(self):
        cfg = OptimizerConfig(method="gd", alpha=0.25, iters=3)
        tr = run(DIAG24, cfg, [1.0, 1.0])
        tr.records = []
        with pytest.raises(InputError):
            empirical_rate(tr, 0.0)

    def test_run_example_envelope_over_200_iterations(self):
        # diag(2,4) at the mid-window step size follows the rate envelope
        alpha = 1 / 70.56
        cfg = OptimizerConfig(method="cgd", alpha=alpha, lam=LambdaSchedule.constant(0.4), iters=200)
        tr = run_cgd(DIAG24, cfg, [1.0, 1.0])
        fs = tr.f_values()
        rho = 1 - 2 / 70.56
        for k, f in enumerate(fs):
            assert f <= rho**k * fs[0] * (1 + 1e-9)


class TestSmoothnessEstimate:
    def test_exact_on_quadratic(self):
        assert estimate_smoothness(DIAG24, n_samples=3) == pytest.approx(4.0)

    def test_needs_hessian_and_box(self):
        with pytest.raises(InputError):
            estimate_smoothness(lookup("eggholder").objective, n_samples=3)
        with pytest.raises(InputError):
            estimate_smoothness(sine_objective(), n_samples=3)
