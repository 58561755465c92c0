"""Coefficient fitting and the control-variate integration loop."""

import numpy as np
import pytest

import qmcube as q
from qmcube.control_variates import (
    ControlVariateSpec,
    beta_mc,
    beta_qmc,
    cv_integrate,
)
from qmcube.ledger import build_ledger, fwht
from qmcube.sequences import make_generator


class TestBetaQmc:
    def test_perfect_control_gives_unit_coefficient(self):
        rng = np.random.default_rng(0)
        coef = rng.standard_normal(1 << 10)
        beta, fallback = beta_qmc(coef, coef[:, None], m=10, r=4)
        assert not fallback
        assert beta[0] == pytest.approx(1.0, rel=1e-12)

    def test_orthogonal_control_gives_zero(self):
        n = 1 << 10
        f = np.zeros(n)
        g = np.zeros((n, 1))
        f[33] = 1.0   # disjoint support inside the fitted range
        g[600, 0] = 1.0
        beta, fallback = beta_qmc(f, g, m=10, r=4)
        assert not fallback
        assert beta[0] == 0.0

    def test_rank_deficient_falls_back(self):
        n = 1 << 10
        f = np.random.default_rng(1).standard_normal(n)
        g = np.zeros((n, 1))   # no energy in the fitted range
        beta, fallback = beta_qmc(f, g, m=10, r=4)
        assert fallback
        assert beta[0] == 0.0

    def test_complex_coefficients_stacked(self):
        rng = np.random.default_rng(2)
        gc = rng.standard_normal(1 << 8) + 1j * rng.standard_normal(1 << 8)
        beta, fallback = beta_qmc(1.5 * gc, gc[:, None], m=8, r=4)
        assert not fallback
        assert beta[0] == pytest.approx(1.5, rel=1e-10)

    def test_least_squares_residual_never_worse_than_zero(self):
        # spectrum reduction: the fitted residual energy on the range is at
        # most the unfitted energy
        rng = np.random.default_rng(3)
        m, r = 9, 4
        f = rng.standard_normal(1 << m)
        g = np.stack([0.7 * f + rng.standard_normal(1 << m), rng.standard_normal(1 << m)], axis=1)
        beta, _ = beta_qmc(f, g, m=m, r=r)
        lo = 1 << (m - r - 1)
        resid = f[lo:] - g[lo:] @ beta
        assert (resid**2).sum() <= (f[lo:] ** 2).sum() + 1e-12


class TestBetaMc:
    def test_identical_control(self):
        vals = np.random.default_rng(4).standard_normal(4096)
        beta, fallback = beta_mc(vals, vals)
        assert not fallback
        assert beta[0] == pytest.approx(1.0, rel=1e-12)

    def test_independent_control_is_small(self):
        rng = np.random.default_rng(5)
        n = 1 << 14
        f = rng.standard_normal(n)
        g = rng.standard_normal(n)
        beta, _ = beta_mc(f, g)
        assert abs(beta[0]) < 3.0 / np.sqrt(n)

    def test_singular_variance_falls_back(self):
        f = np.random.default_rng(6).standard_normal(128)
        beta, fallback = beta_mc(f, np.full(128, 2.0))
        assert fallback
        assert beta[0] == 0.0

    def test_differs_from_qmc_fit_in_general(self):
        gen = make_generator("digital", 2, 7)
        pts = gen.points(0, 1 << 10).points
        f_vals = pts[:, 0] * pts[:, 1] + 0.1 * np.sin(20 * pts[:, 0])
        g_vals = pts[:, 0] * pts[:, 1]
        b_mc, _ = beta_mc(f_vals, g_vals)
        b_qmc, _ = beta_qmc(fwht(f_vals), fwht(g_vals)[:, None], m=10, r=4)
        assert abs(b_mc[0] - b_qmc[0]) > 1e-4


class TestCvIntegrate:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ControlVariateSpec(controls=lambda x: x, means=[np.nan])
        with pytest.raises(ValueError):
            ControlVariateSpec(controls=lambda x: x, means=[0.5], policy="anneal")

    def test_control_equal_to_integrand_collapses(self):
        f = lambda x: np.sin(x @ np.array([2.0, 3.0]))
        gen = make_generator("digital", 2, 8)
        ref = float(f(gen.points(0, 1 << 16).points).mean())
        spec = ControlVariateSpec(controls=lambda x: f(x)[:, None], means=[ref])
        out = cv_integrate(f, 2, spec, q.Tolerance(1e-6), seed=9)
        assert out.result.n == 1024
        assert out.beta[0] == pytest.approx(1.0, rel=1e-9)
        assert out.result.estimate.err[0] < 1e-12
        assert out.result.v_hat == pytest.approx(ref, abs=1e-9)

    def test_offset_identity(self):
        # the combined values differ from the raw ones by exactly
        # beta . (mu_g - g) pointwise, so the means obey the same identity
        f = lambda x: x[:, 0] ** 2
        g = lambda x: x[:, 0][:, None]
        spec = ControlVariateSpec(controls=g, means=[0.5])
        gen = make_generator("digital", 1, 10)
        out = cv_integrate(f, 1, spec, q.Tolerance(1e-3), generator=gen)
        pts = gen.points(0, out.result.n).points
        lhs = out.result.estimate.mu[0]
        rhs = f(pts).mean() + out.beta[0] * (0.5 - g(pts)[:, 0].mean())
        assert lhs == pytest.approx(rhs, abs=1e-14)

    def test_constructed_pair_needs_fewer_points(self):
        freq, amp = 40, 0.01

        def g(x):
            return x[:, 0] * x[:, 1]

        def f(x):
            square = 1.0 - 2.0 * (np.floor(x[:, 0] * freq * 2) % 2)
            return g(x) + amp * square

        spec = ControlVariateSpec(controls=lambda x: g(x)[:, None], means=[0.25])
        tol = q.Tolerance(1e-4)
        for seed in (0, 1, 2):
            plain = q.integrate_scalar(f, 2, tol, seed=seed)
            cv = cv_integrate(f, 2, spec, tol, seed=seed)
            assert cv.result.n < plain.n

    def test_refresh_policy_runs(self):
        f = lambda x: np.prod(2.0 * x, axis=1)
        g = lambda x: x[:, :1]
        spec = ControlVariateSpec(controls=g, means=[0.5], policy="refresh-each-level")
        out = cv_integrate(f, 3, spec, q.Tolerance(1e-4), seed=11)
        assert out.result.status == "tolerance-met"
        assert abs(out.result.v_hat - 1.0) <= 1e-3

    def test_lattice_family(self):
        f = lambda x: np.cos(2 * np.pi * x[:, 0]) + x[:, 1]
        g = lambda x: np.cos(2 * np.pi * x[:, 0])[:, None]
        spec = ControlVariateSpec(controls=g, means=[0.0])
        out = cv_integrate(f, 2, spec, q.Tolerance(1e-4), family="lattice", seed=12)
        assert out.result.status == "tolerance-met"
        assert abs(out.result.v_hat - 0.5) <= 1e-3
