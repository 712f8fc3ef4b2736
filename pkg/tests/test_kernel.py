import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmchaos.kernel import (GammaWeight, HurstParam, Interval, QuadratureError, QuadratureSpec,
                             covariance_R, fractional_integral, gamma1_indicator, gamma1_l2_inner,
                             indicator_inner_product, kernel_K, kernel_K_array, kernel_l2_norm_sq,
                             kernel_table, normalizing_constant, psi, psi_double_integral)


def mp_kernel(H, t, s):
    """Closed form through the Gauss hypergeometric function, in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    H, t, s = mpmath.mpf(H), mpmath.mpf(t), mpmath.mpf(s)
    b = H - mpmath.mpf(1) / 2
    cH = mpmath.sqrt(2 * H * mpmath.gamma(mpmath.mpf(3) / 2 - H)
                     / (mpmath.gamma(H + mpmath.mpf(1) / 2) * mpmath.gamma(2 - 2 * H)))
    # c_H b s^(-b) int_s^t u^b (u-s)^(b-1) du
    integral = s ** b * (t - s) ** b / b * mpmath.hyp2f1(-b, b, b + 1, -(t - s) / s)
    return float(cH * b * s ** (-b) * integral)


class TestHurstAndInterval:
    def test_regimes(self):
        assert HurstParam(0.5).is_brownian
        assert HurstParam(0.75).chaos_capable
        assert not HurstParam(0.3).chaos_capable
        with pytest.raises(ValueError):
            HurstParam(0.3).require_chaos()

    @pytest.mark.parametrize("H", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_out_of_range(self, H):
        with pytest.raises(ValueError):
            HurstParam(H)

    def test_interval(self):
        assert Interval(0.3, 0.3).is_empty
        assert Interval(0.2, 0.6).clip(0.4) == Interval(0.2, 0.4)
        assert Interval(0.5, 0.6).clip(0.4).is_empty
        with pytest.raises(ValueError):
            Interval(0.6, 0.2)
        with pytest.raises(ValueError):
            Interval(-0.1, 0.2)


class TestNormalizingConstant:
    def test_brownian(self):
        assert normalizing_constant(0.5) == pytest.approx(1.0, abs=1e-15)

    def test_high_precision(self):
        mpmath.mp.dps = 40
        H = mpmath.mpf("0.75")
        ref = mpmath.sqrt(2 * H * mpmath.gamma(1.5 - H) / (mpmath.gamma(H + 0.5) * mpmath.gamma(2 - 2 * H)))
        assert normalizing_constant(0.75) == pytest.approx(float(ref), rel=1e-14)

    def test_limit_at_one(self):
        # Gamma(2-2H) ~ 1/(2-2H) so c_H ~ sqrt(8(1-H))
        for h in (1e-3, 1e-5, 1e-7):
            assert normalizing_constant(1 - h) / math.sqrt(8 * h) == pytest.approx(1.0, rel=1e-2)
        assert normalizing_constant(1 - 1e-7) < normalizing_constant(1 - 1e-3)

    def test_rejects(self):
        with pytest.raises(ValueError):
            normalizing_constant(1.0)


class TestKernel:
    def test_brownian_is_one(self):
        assert kernel_K(0.5, 0.8, 0.3) == 1.0

    @pytest.mark.parametrize("H", [0.55, 0.6, 0.75, 0.9, 0.97])
    @pytest.mark.parametrize("t,s", [(1.0, 0.5), (0.7, 0.01), (0.3, 0.29), (1.0, 1e-4)])
    def test_matches_hypergeometric_closed_form(self, H, t, s):
        assert kernel_K(H, t, s) == pytest.approx(mp_kernel(H, t, s), rel=1e-9)

    def test_small_hurst_point_evaluation(self):
        # for H < 1/2 the kernel is still defined pointwise; compare to the same closed form
        assert kernel_K(0.3, 1.0, 0.4) == pytest.approx(mp_kernel(0.3, 1.0, 0.4), rel=1e-7)

    @pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_l2_identity(self, H, t):
        assert kernel_l2_norm_sq(H, t) == pytest.approx(t ** (2 * H), abs=1e-10)

    def test_vanishes_at_diagonal(self):
        vals = [kernel_K(0.75, 1.0, 1.0 - h) for h in (1e-2, 1e-4, 1e-6)]
        assert vals[0] > vals[1] > vals[2] > 0
        # leading behaviour c_H (t-s)^(H-1/2)
        assert vals[2] == pytest.approx(normalizing_constant(0.75) * 1e-6 ** 0.25, rel=1e-3)

    def test_support_convention(self):
        out = kernel_K_array(0.75, 0.5, np.array([0.2, 0.5, 0.7]))
        assert out[0] > 0 and out[1] == 0 and out[2] == 0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            kernel_K(0.75, 0.5, 0.5)
        with pytest.raises(ValueError):
            kernel_K(0.75, 0.5, 0.0)

    def test_tolerance_failure_is_reported(self):
        q = QuadratureSpec(nodes=2, tol=1e-15)
        with pytest.raises(QuadratureError):
            kernel_K(0.75, 1.0, 0.5, q)


class TestCovarianceAndPsi:
    def test_examples(self):
        assert covariance_R(0.75, 0.6, 0.6) == pytest.approx(0.6 ** 1.5)
        assert covariance_R(0.75, 0.6, 0.0) == 0.0
        assert covariance_R(0.5, 0.3, 0.8) == pytest.approx(0.3)

    @given(st.floats(0.5, 0.99), st.floats(0, 1), st.floats(0, 1))
    def test_R_is_indicator_inner_product(self, H, t, s):
        lhs = covariance_R(H, t, s)
        rhs = indicator_inner_product(H, Interval(0, t), Interval(0, s))
        assert lhs == pytest.approx(rhs, abs=1e-14)

    def test_psi_examples(self):
        assert psi(0.75, 0.0, 1.0) == pytest.approx(0.375)
        assert psi(0.75, 0.5, 0.75) == pytest.approx(0.75)

    @given(st.floats(0.51, 0.99), st.floats(0, 1), st.floats(0, 1))
    def test_psi_symmetric_positive(self, H, s, t):
        if s == t:
            return
        assert psi(H, s, t) == psi(H, t, s) > 0

    def test_psi_rejects(self):
        with pytest.raises(ValueError):
            psi(0.75, 0.3, 0.3)
        with pytest.raises(ValueError):
            psi(0.5, 0.3, 0.4)


class TestIndicatorInnerProduct:
    def test_self(self):
        assert indicator_inner_product(0.75, Interval(0.2, 0.7), Interval(0.2, 0.7)) == pytest.approx(0.5 ** 1.5)

    def test_empty(self):
        assert indicator_inner_product(0.75, Interval(0.3, 0.3), Interval(0.1, 0.9)) == 0.0

    def test_brownian_overlap(self):
        assert indicator_inner_product(0.5, Interval(0.1, 0.6), Interval(0.4, 0.9)) == pytest.approx(0.2)
        assert indicator_inner_product(0.5, Interval(0.0, 0.5), Interval(0.5, 1.0)) == 0.0

    @pytest.mark.parametrize("I1,I2", [((0, 0.5), (0.5, 1)), ((0.1, 0.4), (0.2, 0.9)),
                                       ((0.3, 0.35), (0.8, 0.95))])
    def test_against_psi_quadrature(self, I1, I2):
        I1, I2 = Interval(*I1), Interval(*I2)
        assert indicator_inner_product(0.75, I1, I2) == pytest.approx(
            psi_double_integral(0.75, I1, I2), rel=1e-8)


class TestFractionalIntegral:
    def test_zero(self):
        assert fractional_integral(0.3, lambda u: 0 * u, 1.0, 0.2) == 0.0

    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.7])
    @pytest.mark.parametrize("x", [0.0, 0.3])
    def test_constant(self, alpha, x):
        ref = (0.9 - x) ** alpha / math.gamma(alpha + 1)
        assert fractional_integral(alpha, lambda u: 1 + 0 * u, 0.9, x) == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
    def test_kernel_identity(self, H):
        t = 0.8
        cH = normalizing_constant(H)
        for s in np.linspace(0.02, 0.78, 9):
            frac = fractional_integral(H - 0.5, lambda u: u ** (H - 0.5) * (u <= t), 1.0, s,
                                       breakpoints=(t,))
            via = cH * math.gamma(H + 0.5) * s ** (0.5 - H) * frac
            assert via == pytest.approx(kernel_K(H, t, s), abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            fractional_integral(1.2, lambda u: u, 1.0, 0.2)
        with pytest.raises(ValueError):
            fractional_integral(0.3, lambda u: u, 0.5, 0.5)


class TestGamma1:
    def test_support(self):
        assert gamma1_indicator(0.75, Interval(0.2, 0.6), 1.0, 0.6) == 0.0
        assert gamma1_indicator(0.75, Interval(0.2, 0.6), 0.4, 0.45) == 0.0

    def test_brownian_indicator(self):
        I = Interval(0.2, 0.6)
        assert gamma1_indicator(0.5, I, 1.0, 0.3) == 1.0
        assert gamma1_indicator(0.5, I, 1.0, 0.1) == 0.0
        assert gamma1_indicator(0.5, I, 0.4, 0.5) == 0.0

    @pytest.mark.parametrize("I1,I2,t", [((0.2, 0.6), (0.2, 0.6), 1.0), ((0.0, 0.5), (0.5, 1.0), 1.0),
                                         ((0.1, 0.9), (0.3, 0.7), 0.6)])
    def test_isometry(self, I1, I2, t):
        I1, I2 = Interval(*I1), Interval(*I2)
        ref = indicator_inner_product(0.75, I1.clip(t), I2.clip(t))
        assert gamma1_l2_inner(0.75, I1, I2, t) == pytest.approx(ref, rel=1e-6, abs=1e-12)

    def test_weight_nonnegative_and_pointwise(self):
        w = GammaWeight(0.75, Interval(0.3, 0.7))
        s = np.linspace(0.001, 0.999, 200)
        assert np.all(w(s) >= 0)
        assert w(np.array([0.5]))[0] == pytest.approx(gamma1_indicator(0.75, Interval(0.3, 0.7), 1.0, 0.5))


class TestKernelTable:
    @pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
    @pytest.mark.parametrize("t", [0.3, 1.0])
    def test_total_closed_form(self, H, t):
        # int_0^t K = c_H (H-1/2) B(3/2-H, H-1/2) t^(H+1/2) / (H+1/2)
        from scipy.special import beta
        ref = normalizing_constant(H) * (H - 0.5) * beta(1.5 - H, H - 0.5) * t ** (H + 0.5) / (H + 0.5)
        assert kernel_table(H, t).total == pytest.approx(ref, abs=1e-10)

    def test_primitive_vs_quadrature(self):
        from fbmchaos._quad import graded_integral
        tab = kernel_table(0.75, 1.0)
        for a, b in [(0.0, 0.1), (0.2, 0.21), (0.5, 0.99), (0.9, 1.0)]:
            ref = graded_integral(lambda s: kernel_K_array(0.75, 1.0, s), a, b,
                                  left_exponent=-0.25 if a == 0 else 0.0,
                                  right_exponent=0.25 if b == 1.0 else 0.0)
            assert tab.integral(a, b) == pytest.approx(ref, abs=1e-10)

    def test_primitive_is_flat_beyond_support(self):
        tab = kernel_table(0.75, 0.4)
        assert tab.primitive(0.7) == pytest.approx(tab.total)
        assert tab.primitive(0.0) == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_primitive_monotone(self, x, y):
        tab = kernel_table(0.75, 1.0)
        lo, hi = min(x, y), max(x, y)
        assert tab.primitive(hi) >= tab.primitive(lo) - 1e-14
