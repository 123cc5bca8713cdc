import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lobq.discrete_book import (
    DiscreteParams,
    cancel_fraction,
    cum_shape,
    empty_prob,
    normalize,
    price_distribution,
    price_moments,
    queue_distribution,
    shape,
    stationary_dist,
)
from lobq.errors import DegenerateError, DomainError
from lobq.oracles import discrete_book_oracle, queue_oracle, solve_stationary, truncated_generator

rates = st.floats(0.0, 3.0)
books = st.builds(
    lambda lam, mu, theta: DiscreteParams(tuple(lam), mu, theta),
    st.lists(rates, min_size=1, max_size=6).filter(lambda l: any(v > 0.01 for v in l)),
    st.floats(0.0, 5.0),
    st.floats(0.2, 3.0),
)


class TestParams:
    def test_normalize(self):
        n = normalize(DiscreteParams((1, 1, 1), 2, 1))
        assert n.nu_cum == (1, 2, 3) and n.delta == 2
        n = normalize(DiscreteParams((0, 5), 0, 2))
        assert n.nu_cum == (0, 2.5) and n.delta == 0
        assert normalize(DiscreteParams((8,), 8, 1)).delta == 8

    @pytest.mark.parametrize(
        "lam,mu,theta",
        [((), 1, 1), ((-1, 1), 1, 1), ((0, 0), 1, 1), ((1,), -1, 1), ((1,), 1, 0), ((math.nan,), 1, 1)],
    )
    def test_validation(self, lam, mu, theta):
        with pytest.raises(DomainError):
            DiscreteParams(lam, mu, theta)

    def test_tick_index_checked(self):
        p = DiscreteParams((1, 1), 1, 1)
        with pytest.raises(DomainError):
            cum_shape(p, 3)
        with pytest.raises(DomainError):
            stationary_dist(p, 0)


class TestQueue:
    def test_no_arrivals(self):
        assert list(queue_distribution(0.0, 2.0)) == [1.0]

    def test_empty_probability_delta_one(self):
        pi = queue_distribution(8.0, 1.0)
        assert pi[0] == pytest.approx(8 * math.exp(-8) / -math.expm1(-8), rel=1e-14)

    def test_matches_linear_solve(self):
        ref = solve_stationary(truncated_generator(2.0, 3.0, 1.0, 200))
        pi = queue_distribution(2.0, 3.0)
        np.testing.assert_allclose(pi[:11], ref[:11], rtol=1e-10, atol=1e-15)

    @given(st.floats(0.0, 60), st.floats(0.0, 20))
    def test_normalized_and_mean(self, nu, delta):
        pi = queue_distribution(nu, delta)
        assert pi.sum() == pytest.approx(1.0, abs=1e-10)
        p = DiscreteParams((nu,), delta, 1.0) if nu > 0 else None
        if p is not None:
            assert np.arange(len(pi)) @ pi == pytest.approx(cum_shape(p, 1), abs=1e-8)


class TestShapes:
    def test_reference_value(self):
        # nu = 8, delta = 1: 8 - (1 - 9 e^-8) / (1 - e^-8)
        p = DiscreteParams((8.0,), 1.0, 1.0)
        ref = 8 - (1 - 9 * math.exp(-8)) / (1 - math.exp(-8))
        assert cum_shape(p, 1) == pytest.approx(ref, rel=1e-14)
        assert ref == pytest.approx(7.0027, abs=5e-5)

    def test_trivial_cases(self):
        assert cum_shape(DiscreteParams((5.0,), 0.0, 1.0), 1) == 5.0
        p = DiscreteParams((0.0, 2.0), 1.0, 1.0)
        assert cum_shape(p, 1) == 0.0 and cum_shape(p, 0) == 0.0
        assert shape(p, 1) == 0.0

    def test_shape_two_chains(self):
        p = DiscreteParams((1, 1, 1), 1, 1)
        o = discrete_book_oracle(p.lam, p.mu, p.theta)
        assert shape(p, 2) == pytest.approx(o["mean"][1] - o["mean"][0], abs=1e-10)
        assert shape(p, 1) == cum_shape(p, 1)

    def test_cancel_fraction(self):
        assert cancel_fraction(DiscreteParams((1, 2), 0.0, 1.0), 2) == 1.0
        with pytest.raises(DomainError):
            cancel_fraction(DiscreteParams((1, 0), 1.0, 1.0), 2)

    @given(books)
    def test_conservation(self, p):
        for k in range(1, p.K + 1):
            arr = math.fsum(p.lam[:k])
            served = p.theta * cum_shape(p, k) + p.mu * (1 - empty_prob(p, k))
            assert served == pytest.approx(arr, abs=1e-10 * max(1.0, arr))

    @given(books)
    def test_cancel_in_unit_interval_and_shape_non_negative(self, p):
        for k in range(1, p.K + 1):
            assert shape(p, k) >= -1e-12
            if p.lam[k - 1] > 0:
                assert 0.0 < cancel_fraction(p, k) <= 1.0 + 1e-12

    @given(books)
    def test_cancel_fraction_is_flow_ratio(self, p):
        # cancelled share flow at k is theta * shape(k)
        for k in range(1, p.K + 1):
            if p.lam[k - 1] > 1e-3:
                assert cancel_fraction(p, k) == pytest.approx(p.theta * shape(p, k) / p.lam[k - 1], abs=1e-9)


class TestPrice:
    def test_single_tick(self):
        p = DiscreteParams((3.0,), 2.0, 1.0)
        d = price_distribution(p)
        assert d.probs[0] == pytest.approx(1 - empty_prob(p, 1), rel=1e-15)
        assert d.empty_book_prob == empty_prob(p, 1)
        assert price_moments(p) == (1.0, 0.0)

    def test_zero_rate_tick_has_no_mass(self):
        d = price_distribution(DiscreteParams((1.0, 0.0, 2.0), 1.0, 1.0))
        assert d.probs[1] == 0.0

    def test_symmetric_two_point(self):
        # choose lambda_2 so that both prices are equally likely
        from scipy.optimize import brentq

        def gap(l2):
            d = price_distribution(DiscreteParams((1.0, l2), 1.0, 1.0))
            return d.probs[0] - d.probs[1]

        l2 = brentq(gap, 0.01, 50)
        assert price_moments(DiscreteParams((1.0, l2), 1.0, 1.0))[0] == pytest.approx(1.5, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            price_moments(DiscreteParams((1e-320,), 1e300, 1.0))

    @given(books)
    def test_probabilities_sum_to_one(self, p):
        d = price_distribution(p)
        assert d.probs.sum() + d.empty_book_prob == pytest.approx(1.0, abs=1e-14)
        assert np.all(d.probs >= 0)

    def test_against_oracle(self):
        p = DiscreteParams((1, 1, 1, 1, 1), 2.0, 0.5)
        o = discrete_book_oracle(p.lam, p.mu, p.theta)
        np.testing.assert_allclose(price_distribution(p).probs, o["price_probs"], atol=1e-10)


class TestOracle:
    def test_generator_rows_sum_to_zero(self):
        Q = truncated_generator(2.0, 1.0, 0.5, 30, [0.5, 0.5])
        np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)

    def test_mm_infinity(self):
        # mu = 0: Poisson(nu) stationary law
        pi = queue_oracle(3.0, 0.0, 1.0)
        n = np.arange(10)
        ref = np.exp(-3.0 + n * math.log(3.0) - np.array([math.lgamma(k + 1) for k in n]))
        np.testing.assert_allclose(pi[:10], ref, rtol=1e-10)
