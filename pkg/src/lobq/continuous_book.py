"""Continuous-price book with spatial Poisson limit order arrivals.

Limit orders arrive at price ``p`` with intensity ``alpha * h_lambda(p)``.
The book up to price ``p`` is again an M/M/1+M queue whose normalized arrival
rate is ``H(p) = int_0^p alpha h_lambda(u) du / theta``, which yields the
cumulative shape ``B``, the shape ``b = dB/dp`` and the cancellation
probability ``C = b / h``.

Prices are in currency units, ``b`` in shares per unit price and ``B`` in
shares. A tick of width ``dp`` therefore holds about ``b(p) * dp`` shares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .discrete_book import DiscreteParams
from .errors import DomainError
from .specfun import DEFAULT_QUADRATURE, QuadratureSpec, g_delta_parts, integrate

PROFILE_KINDS = ("constant", "exponential", "power_law", "custom")


@dataclass(frozen=True)
class IntensityProfile:
    """Price profile of limit order arrivals, ``alpha * h_lambda(p)``.

    ========== ============================ ==============================
    kind       h_lambda(p)                  int_0^p h_lambda
    ========== ============================ ==============================
    constant   1                            p
    exponential beta exp(-beta p)           1 - exp(-beta p)
    power_law  (gamma-1) (1+p)**(-gamma)    1 - (1+p)**(1-gamma)
    custom     ``custom_h``                 ``custom_H`` or quadrature
    ========== ============================ ==============================

    ``support_cap`` zeroes the profile at and beyond that price (the
    ``1_(0,K)`` indicator of a truncated constant profile).
    """

    kind: str
    alpha: float
    beta: float = 1.0
    gamma: float = 2.0
    support_cap: float | None = None
    custom_h: Callable[[float], float] | None = field(default=None, compare=False)
    custom_H: Callable[[float], float] | None = field(default=None, compare=False)
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError("profile scale alpha must be positive")
        if self.kind == "exponential" and not self.beta > 0:
            raise DomainError("exponential profile needs beta > 0")
        if self.kind == "power_law" and not self.gamma > 1:
            raise DomainError("power-law profile needs gamma > 1")
        if self.kind == "custom" and self.custom_h is None:
            raise DomainError("custom profile needs custom_h")
        if self.support_cap is not None and not self.support_cap > 0:
            raise DomainError("support_cap must be positive")

    # -- shape without the alpha scale --------------------------------------
    def h_lambda(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise DomainError("price must be >= 0")
        if self.kind == "constant":
            out = np.ones_like(p)
        elif self.kind == "exponential":
            out = self.beta * np.exp(-self.beta * p)
        elif self.kind == "power_law":
            out = (self.gamma - 1.0) * (1.0 + p) ** (-self.gamma)
        else:
            out = np.vectorize(self.custom_h, otypes=[float])(p)
        if self.support_cap is not None:
            out = np.where(p < self.support_cap, out, 0.0)
        return out if out.ndim else float(out)

    def H_lambda(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise DomainError("price must be >= 0")
        if self.support_cap is not None:
            p = np.minimum(p, self.support_cap)
        if self.kind == "constant":
            out = p.copy()
        elif self.kind == "exponential":
            out = -np.expm1(-self.beta * p)
        elif self.kind == "power_law":
            out = -np.expm1((1.0 - self.gamma) * np.log1p(p))
        elif self.custom_H is not None:
            out = np.vectorize(self.custom_H, otypes=[float])(p)
        else:
            out = np.vectorize(
                lambda x: integrate(self.custom_h, 0.0, x, self.quadrature), otypes=[float]
            )(p)
        return out if out.ndim else float(out)

    def H_lambda_total(self) -> float:
        """``int_0^inf h_lambda``; ``inf`` for the uncapped constant profile."""
        if self.support_cap is not None:
            return float(self.H_lambda(self.support_cap))
        if self.kind == "constant":
            return math.inf
        if self.kind in ("exponential", "power_law"):
            return 1.0
        raise DomainError("total mass of an uncapped custom profile is unknown")

    # -- scaled by alpha -----------------------------------------------------
    def rate(self, p):
        """Arrival intensity ``alpha h_lambda(p)`` (orders per unit price and time)."""
        return self.alpha * self.h_lambda(p)

    def mass(self, p):
        """``alpha int_0^p h_lambda`` (orders per unit time)."""
        return self.alpha * self.H_lambda(p)

    def bucket_mass(self, lo, hi):
        """Arrival rate of orders priced in ``[lo, hi)``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.support_cap is not None:
            lo = np.minimum(lo, self.support_cap)
            hi = np.minimum(hi, self.support_cap)
        if self.kind == "exponential":
            out = self.alpha * np.exp(-self.beta * lo) * -np.expm1(-self.beta * (hi - lo))
        else:
            out = self.mass(hi) - self.mass(lo)
        return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ContinuousParams:
    profile: IntensityProfile
    mu: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise DomainError("cancellation rate theta must be positive")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise DomainError("market order rate mu must be >= 0")

    @property
    def delta(self) -> float:
        return self.mu / self.theta


@dataclass(frozen=True)
class ShapeCurve:
    """Book profile sampled on a price grid."""

    grid: np.ndarray
    b: np.ndarray
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 1:
            raise DomainError("shape curve needs a non-empty 1-d grid")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("shape curve grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        for name in ("b", "B", "C", "h"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != grid.shape:
                    raise DomainError(f"{name} has shape {v.shape}, grid has {grid.shape}")
                object.__setattr__(self, name, v)


class TailCancellation(NamedTuple):
    """Limit of ``C(p)`` as ``p -> inf``.

    ``finite_mass`` is False when ``H(inf)`` diverges, in which case the tail
    behaves as if there were no market orders and ``value`` is exactly 1.
    """

    value: float
    finite_mass: bool


def normalized_intensity(cp: ContinuousParams, p):
    """``h(p) = alpha h_lambda(p) / theta``."""
    return cp.profile.rate(p) / cp.theta


def cumulative_intensity(cp: ContinuousParams, p):
    """``H(p) = int_0^p h``."""
    return cp.profile.mass(p) / cp.theta


def _cancel_from_H(delta: float, H: float) -> float:
    if delta == 0.0:
        return 1.0
    if H == 0.0:
        return 1.0 / (1.0 + delta)
    g, _, one_minus_over_y = g_delta_parts(delta, H)
    return 1.0 - delta * g * (1.0 - delta * one_minus_over_y)


def _cum_from_H(delta: float, H: float) -> float:
    if H == 0.0:
        return 0.0
    if delta == 0.0:
        return H
    return H - delta * g_delta_parts(delta, H)[1]


def cum_shape_B(cp: ContinuousParams, p: float) -> float:
    """Mean number of shares priced in ``[0, p]``: ``H - f(delta, H)``."""
    return _cum_from_H(cp.delta, float(cumulative_intensity(cp, p)))


def cancel_prob_C(cp: ContinuousParams, p: float) -> float:
    """Probability that a limit order submitted at ``p`` is cancelled, not executed.

    ``C = 1 - delta g (1 - (delta/H)(1 - g))`` with ``g = g_delta(H(p))``;
    ``C(0) = 1/(1 + delta)``.
    """
    return _cancel_from_H(cp.delta, float(cumulative_intensity(cp, p)))


def shape_b(cp: ContinuousParams, p: float) -> float:
    """Average shape ``b(p) = h(p) C(p)``."""
    return float(normalized_intensity(cp, p)) * cancel_prob_C(cp, p)


def c_infinity(cp: ContinuousParams) -> TailCancellation:
    total = cp.profile.H_lambda_total()
    if math.isinf(total):
        return TailCancellation(1.0, False)
    return TailCancellation(_cancel_from_H(cp.delta, cp.profile.alpha * total / cp.theta), True)


def shape_curve(cp: ContinuousParams, grid) -> ShapeCurve:
    grid = np.asarray(grid, dtype=float)
    H = np.atleast_1d(cumulative_intensity(cp, grid))
    h = np.atleast_1d(normalized_intensity(cp, grid))
    C = np.array([_cancel_from_H(cp.delta, float(y)) for y in H])
    B = np.array([_cum_from_H(cp.delta, float(y)) for y in H])
    return ShapeCurve(grid=grid, b=h * C, B=B, C=C, h=h)


def discretize(cp: ContinuousParams, tick: float, K: int) -> DiscreteParams:
    """Tick-grid version: tick ``i`` collects the orders priced in ``[(i-1) tick, i tick)``."""
    if not tick > 0 or K < 1:
        raise DomainError("discretize needs tick > 0 and K >= 1")
    edges = tick * np.arange(K + 1, dtype=float)
    lam = np.atleast_1d(cp.profile.bucket_mass(edges[:-1], edges[1:]))
    return DiscreteParams(tuple(lam), cp.mu, cp.theta, tick_size=tick)


def characteristic_scaling(cp: ContinuousParams) -> tuple[float, float]:
    """Characteristic price and depth-density units for a constant profile.

    Returns ``(p_c, d_c)`` with ``p_c = mu / rate`` and ``d_c = rate / theta``;
    in these units the shape is ``b/d_c = C`` as a function of ``p/p_c``,
    which is the dimensionless frame in which flat-profile books with
    different market order rates are usually compared.
    """
    if cp.profile.kind != "constant":
        raise DomainError("the characteristic scaling is defined for constant profiles")
    if cp.mu <= 0:
        raise DomainError("the characteristic price needs mu > 0")
    rate = cp.profile.alpha
    return cp.mu / rate, rate / cp.theta
