import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lobq.errors import ConvergenceError, DomainError, PrecisionError
from lobq.specfun import (
    QuadratureSpec,
    g_delta,
    g_delta_ext,
    g_delta_parts,
    gamma_ratio_f,
    gauss_2f1,
    integrate,
    log_hyp2f1_size_kernel,
    log_lower_inc_gamma,
    lower_inc_gamma,
)

# Reference values computed once with 50-digit arithmetic, frozen here.
G_10_40 = 1.2276020527682901160934903e-08
G_1_8 = 0.0026846016067299596484469777
G_16_8 = 0.54829105595577449017576107
G_25_03 = 0.91595621597242928625458196
GAMMA_40_10 = 14975383182744147674635399991161411.78
KERNEL_2_30_025 = -5.6312117818213656339780353


def simpson(f, a, b, n=20000):
    """Composite Simpson rule, the independent oracle for smooth integrands."""
    x = np.linspace(a, b, n + 1)
    y = f(x)
    return (b - a) / (3 * n) * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def adaptive_simpson(f, a, b, tol, depth=50):
    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth)


class TestIncompleteGamma:
    def test_half_order_matches_erf(self):
        assert lower_inc_gamma(0.5, 2.0) == pytest.approx(math.sqrt(math.pi) * math.erf(math.sqrt(2.0)), rel=1e-14)

    def test_against_simpson(self):
        # substitute u = t**2 to remove the t**-0.5 endpoint singularity
        ref = simpson(lambda u: 2.0 * np.exp(-u * u), 0.0, math.sqrt(2.0))
        assert lower_inc_gamma(0.5, 2.0) == pytest.approx(ref, rel=1e-12)
        ref = adaptive_simpson(lambda u: 2.0 * math.exp(-u * u), 0.0, math.sqrt(2.0), 1e-13)
        assert lower_inc_gamma(0.5, 2.0) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(0.1, 30), st.floats(0.1, 100), st.floats(0.01, 5))
    def test_increasing_in_y(self, x, y, dy):
        lo, hi = log_lower_inc_gamma(x, y), log_lower_inc_gamma(x, y + dy)
        assert hi >= lo
        # strict once the increment is representable relative to the value
        # lower bound on the gain relative to Gamma(x) (integrand minimum on [y, y+dy], x >= 1)
        gap = math.exp(-(y + dy) + (x - 1) * math.log(y) - math.lgamma(x)) * dy
        if x >= 1 and gap > 1e-12:
            assert hi > lo

    def test_integer_order_closed_form(self):
        y = 3.3
        assert lower_inc_gamma(1.0, y) == pytest.approx(-math.expm1(-y), rel=1e-15)
        # gamma(3, y) = 2 - e^-y (y^2 + 2y + 2)
        assert lower_inc_gamma(3.0, y) == pytest.approx(2 - math.exp(-y) * (y * y + 2 * y + 2), rel=1e-14)

    def test_large_values_in_log_space(self):
        assert math.exp(log_lower_inc_gamma(40.0, 10.0) - math.log(GAMMA_40_10)) == pytest.approx(1.0, abs=1e-13)
        assert math.isfinite(log_lower_inc_gamma(500.0, 2000.0))

    def test_zero_and_domain(self):
        assert lower_inc_gamma(2.0, 0.0) == 0.0
        for bad in [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5), (math.nan, 1.0), (1.0, math.inf)]:
            with pytest.raises(DomainError):
                lower_inc_gamma(*bad)

    @given(st.floats(0.05, 60), st.floats(0.01, 300))
    def test_recurrence(self, x, y):
        # gamma(x+1, y) = x gamma(x, y) - y^x e^-y, checked in log space
        lhs = log_lower_inc_gamma(x + 1, y)
        rhs_terms = math.log(x) + log_lower_inc_gamma(x, y)
        sub = x * math.log(y) - y
        assert sub < rhs_terms
        rhs = rhs_terms + math.log1p(-math.exp(sub - rhs_terms))
        # cancellation in the difference limits the achievable accuracy
        amp = 1.0 / max(1e-300, -math.expm1(sub - rhs_terms))
        assert abs(lhs - rhs) <= 1e-13 * amp + 1e-13 * abs(lhs)


class TestGDelta:
    @pytest.mark.parametrize(
        "delta,y,ref",
        [(10.0, 40.0, G_10_40), (1.0, 8.0, G_1_8), (16.0, 8.0, G_16_8), (2.5, 0.3, G_25_03)],
    )
    def test_reference_values(self, delta, y, ref):
        assert g_delta(delta, y) == pytest.approx(ref, rel=1e-13)

    def test_delta_one_closed_form(self):
        # g_1(y) = y e^-y / (1 - e^-y)
        y = 8.0
        assert g_delta(1.0, y) == pytest.approx(y * math.exp(-y) / -math.expm1(-y), rel=1e-14)

    def test_extended_conventions(self):
        assert g_delta_ext(3.0, 0.0) == 1.0
        assert g_delta_ext(0.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
        with pytest.raises(DomainError):
            g_delta(0.0, 1.0)

    def test_parts_at_zero(self):
        assert g_delta_parts(4.0, 0.0) == (1.0, 0.0, pytest.approx(1 / 5.0))

    @given(st.floats(0.01, 50), st.floats(1e-6, 500))
    def test_parts_consistent(self, delta, y):
        g, one_minus, over_y = g_delta_parts(delta, y)
        assert 0.0 < g <= 1.0
        assert g + one_minus == pytest.approx(1.0, abs=1e-14)
        assert over_y * y == pytest.approx(one_minus, rel=1e-12, abs=1e-300)

    @given(st.floats(0.01, 50), st.floats(1e-4, 200))
    def test_empty_probability_is_series_reciprocal(self, delta, y):
        # 1/g = sum_n y^n / (delta+1)_n
        n = np.arange(0, 4000)
        log_terms = n * math.log(y) - np.array([math.lgamma(delta + 1 + k) for k in n]) + math.lgamma(delta + 1)
        m = log_terms.max()
        log_s = m + math.log(np.exp(log_terms - m).sum())
        assert math.log(g_delta(delta, y)) == pytest.approx(-log_s, abs=1e-11 * max(1.0, log_s))

    def test_small_delta_limit(self):
        assert g_delta(1e-8, 2.0) == pytest.approx(math.exp(-2.0), abs=1e-6)

    @given(st.floats(0.01, 40), st.floats(0.01, 400))
    def test_bounds(self, delta, y):
        g = g_delta(delta, y)
        assert 0.0 < g < 1.0
        f = gamma_ratio_f(delta, y)
        assert 0.0 < f <= delta
        if g > 1e-15:
            assert f < delta

    def test_gamma_ratio_closed_forms(self):
        y = 2.0
        assert gamma_ratio_f(1.0, y) == pytest.approx((1 - (1 + y) * math.exp(-y)) / -math.expm1(-y), rel=1e-14)
        assert gamma_ratio_f(3.5, 700.0) == pytest.approx(3.5, abs=1e-9)
        assert gamma_ratio_f(2.5, 3.0) == pytest.approx(lower_inc_gamma(3.5, 3.0) / lower_inc_gamma(2.5, 3.0), rel=1e-13)
        with pytest.raises(DomainError):
            gamma_ratio_f(0.0, 1.0)

    def test_gamma_ratio_identity(self):
        x, y = 3.5, 7.25
        assert gamma_ratio_f(x, y) == pytest.approx(
            math.exp(log_lower_inc_gamma(x + 1, y) - log_lower_inc_gamma(x, y)), rel=1e-13
        )


class TestHypergeometric:
    def exact(self, a, b, c, x):
        x = Fraction(x)
        term = total = Fraction(1)
        for n in range(-b):
            term *= Fraction((a + n) * (b + n), (c + n) * (n + 1)) * x
            total += term
        return total

    def test_terminating_series_exact(self):
        ref = float(self.exact(10, -20, 11, Fraction(1, 2)))
        assert ref == pytest.approx(3.3353278073862884e-05, rel=1e-15)
        # the alternating series loses about log10(1e7) digits
        assert gauss_2f1(10, -20, 11, 0.5) == pytest.approx(ref, rel=1e-8)

    def test_amplification_guard(self):
        with pytest.raises(PrecisionError):
            gauss_2f1(10, -20, 11, 0.5, max_amplification=1e6)

    def test_log_closed_form(self):
        x = 0.5
        assert gauss_2f1(1, 1, 2, x) == pytest.approx(-math.log1p(-x) / x, rel=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            gauss_2f1(1, -1, 0.0, 0.5)
        with pytest.raises(DomainError):
            gauss_2f1(1, -1, 2, 1.0)
        assert gauss_2f1(3, 0, 2, 0.7) == 1.0

    def test_log_kernel_reference(self):
        assert log_hyp2f1_size_kernel(2.0, 30.0, 0.25) == pytest.approx(KERNEL_2_30_025, rel=1e-13)

    @given(st.floats(0.05, 12), st.floats(0.01, 800), st.floats(0.05, 0.99))
    def test_log_kernel_matches_mpmath(self, delta, s, q):
        with mpmath.workdps(40):
            ref = float(mpmath.log(mpmath.hyp2f1(delta, -s, 1 + delta, 1 - mpmath.mpf(q))))
        assert log_hyp2f1_size_kernel(delta, s, q) == pytest.approx(ref, abs=1e-11 * max(1.0, abs(ref)))

    def test_log_kernel_negative_s(self):
        # terms are all positive for s < 0; compare with the integral form
        delta, s, q = 2.0, -3.5, 0.4
        ref = delta * integrate(lambda v: v ** (delta - 1) * (1 - (1 - q) * v) ** s, 0.0, 1.0, vectorized=True)
        assert log_hyp2f1_size_kernel(delta, s, q) == pytest.approx(math.log(ref), rel=1e-13)


class TestQuadrature:
    def test_simple_integrals(self):
        assert integrate(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, rel=1e-15)
        assert integrate(math.exp, -2.0, 0.0) == pytest.approx(-math.expm1(-2.0), rel=1e-14)
        assert integrate(lambda v: math.exp(-v), 0.0, 2.0) == pytest.approx(-math.expm1(-2.0), rel=1e-14)

    def test_polynomial_exact(self):
        assert integrate(lambda x: 3 * x**2, 0.0, 2.0) == pytest.approx(8.0, rel=1e-15)

    def test_endpoint_singularity(self):
        f = lambda x: x**-0.5
        assert integrate(f, 0.0, 1.0) == pytest.approx(2.0, rel=1e-10)
        assert integrate(f, 0.0, 1.0, singular_exponent=0.5) == pytest.approx(2.0, rel=1e-13)

    def test_breakpoints(self):
        f = lambda x: np.where(x < 1.0, 1.0, 0.0)
        assert integrate(f, 0.0, 3.0, points=[1.0], vectorized=True) == pytest.approx(1.0, abs=1e-14)

    def test_non_finite_rejected(self):
        with pytest.raises((DomainError, ConvergenceError)):
            integrate(lambda x: 1.0 / (x - 0.5) if x != 0.5 else math.inf, 0.0, 1.0)

    def test_budget_exhaustion(self):
        spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-15, max_subdivisions=2)
        with pytest.raises(ConvergenceError):
            integrate(lambda x: math.sin(200 * x) ** 2, 0.0, 10.0, spec)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(rel_tol=-1.0)
