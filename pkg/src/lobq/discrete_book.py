"""One-sided book on a tick grid with unit-size orders.

Limit orders arrive at tick ``i`` at rate ``lambda_i``, unit market orders
at rate ``mu`` and every standing share is cancelled at rate ``theta``. The
number of shares standing at ticks ``1..k`` is an M/M/1+M queue with arrival
rate ``lambda_{1->k}``, service rate ``mu`` and reneging rate ``theta``, so
all quantities below are closed forms in ``nu_{1->k} = lambda_{1->k}/theta``
and ``delta = mu/theta``.

Tick indices are 1-based throughout, matching the price in ticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, DomainError
from .specfun import g_delta_ext, g_delta_parts


@dataclass(frozen=True)
class DiscreteParams:
    """Order flow rates of the discrete book.

    ``lam`` holds the per-tick limit order rates (orders per unit time),
    ``mu`` the market order rate, ``theta`` the per-share cancellation rate
    and ``tick_size`` the currency value of one tick.
    """

    lam: tuple[float, ...]
    mu: float
    theta: float
    tick_size: float = 1.0

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        object.__setattr__(self, "lam", lam)
        if len(lam) < 1:
            raise DomainError("need at least one tick")
        if any(not math.isfinite(v) or v < 0 for v in lam):
            raise DomainError("limit order rates must be finite and >= 0")
        if not any(v > 0 for v in lam):
            raise DomainError("at least one limit order rate must be positive")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise DomainError("market order rate must be finite and >= 0")
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise DomainError("cancellation rate must be positive")
        if not self.tick_size > 0:
            raise DomainError("tick size must be positive")

    @property
    def K(self) -> int:
        return len(self.lam)

    @property
    def delta(self) -> float:
        return self.mu / self.theta

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise DomainError(f"tick index {k} outside 1..{self.K}")


@dataclass(frozen=True)
class NormalizedParams:
    nu_cum: tuple[float, ...]
    delta: float


@dataclass(frozen=True)
class PriceDistribution:
    """Stationary law of the best ask; ``probs[k-1]`` is P(price = k)."""

    probs: np.ndarray
    empty_book_prob: float


def normalize(p: DiscreteParams) -> NormalizedParams:
    nu = np.cumsum(p.lam) / p.theta
    return NormalizedParams(tuple(float(v) for v in nu), p.delta)


def _nu(p: DiscreteParams, k: int) -> float:
    """nu_{1->k}; k = 0 gives the empty prefix."""
    return math.fsum(p.lam[:k]) / p.theta


def queue_distribution(nu: float, delta: float, tail_tol: float = 1e-12) -> np.ndarray:
    """Stationary law of the M/M/1+M queue with normalized rates (nu, delta).

    ``pi(n) = pi(0) prod_{i<=n} nu/(i + delta)`` with ``pi(0) = g_delta(nu)``.
    Truncated at ``mean + 12 sqrt(mean) + 50`` and extended until the
    geometric bound on the remaining tail drops below ``tail_tol``.
    """
    if nu == 0.0:
        return np.array([1.0])
    pi0 = g_delta_ext(delta, nu)
    mean = max(nu - delta * (1.0 - pi0), 0.0)
    n = int(mean + 12.0 * math.sqrt(mean) + 50)
    out = [pi0]
    i = 1
    term = pi0
    while True:
        term *= nu / (i + delta)
        out.append(term)
        if i >= n:
            r = nu / (i + 1 + delta)
            if r < 1.0 and term * r / (1.0 - r) < tail_tol:
                break
        i += 1
    return np.array(out)


def stationary_dist(p: DiscreteParams, k: int, tail_tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of the number of shares at ticks ``1..k``."""
    p._check_k(k)
    return queue_distribution(_nu(p, k), p.delta, tail_tol)


def empty_prob(p: DiscreteParams, k: int) -> float:
    """P(no shares at ticks 1..k); equals 1 for k = 0."""
    if k == 0:
        return 1.0
    p._check_k(k)
    return g_delta_ext(p.delta, _nu(p, k))


def price_distribution(p: DiscreteParams) -> PriceDistribution:
    """Law of the best ask: P(price = k) = P(empty up to k-1) - P(empty up to k)."""
    g = np.array([empty_prob(p, k) for k in range(p.K + 1)])
    probs = g[:-1] - g[1:]
    return PriceDistribution(np.clip(probs, 0.0, None), float(g[-1]))


def cum_shape(p: DiscreteParams, k: int) -> float:
    """Mean number of shares standing at ticks ``1..k``.

    ``nu - Gamma_nu(1+delta)/Gamma_nu(delta) = nu - delta (1 - g_delta(nu))``.
    ``k = 0`` gives 0.
    """
    if k == 0:
        return 0.0
    p._check_k(k)
    nu = _nu(p, k)
    if nu == 0.0:
        return 0.0
    if p.delta == 0.0:
        return nu
    return nu - p.delta * g_delta_parts(p.delta, nu)[1]


def shape(p: DiscreteParams, k: int) -> float:
    """Mean number of shares standing at tick ``k``."""
    p._check_k(k)
    if p.lam[k - 1] == 0.0:
        return 0.0
    return cum_shape(p, k) - cum_shape(p, k - 1)


def cancel_fraction(p: DiscreteParams, k: int) -> float:
    """Fraction of limit orders submitted at tick ``k`` that end up cancelled."""
    p._check_k(k)
    lam_k = p.lam[k - 1]
    if lam_k == 0.0:
        raise DomainError(f"no limit orders arrive at tick {k}; cancel fraction undefined")
    if p.delta == 0.0:
        return 1.0
    nu_k = lam_k / p.theta
    return 1.0 - p.delta / nu_k * (empty_prob(p, k - 1) - empty_prob(p, k))


def price_moments(p: DiscreteParams) -> tuple[float, float]:
    """Mean and standard deviation (ticks) of the price given a non-empty book."""
    dist = price_distribution(p)
    mass = 1.0 - dist.empty_book_prob
    if mass <= 1e-300:
        raise DegenerateError("the book is almost surely empty; price moments undefined")
    w = dist.probs / dist.probs.sum()
    ks = np.arange(1, p.K + 1, dtype=float)
    mean = float(w @ ks)
    var = float(w @ (ks - mean) ** 2)
    return mean, math.sqrt(max(var, 0.0))
