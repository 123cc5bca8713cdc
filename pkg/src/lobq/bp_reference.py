"""Diffusive-price reference shape and its comparison with the queueing model.

The reference shape for a limit order profile ``h_lambda`` and a price that
diffuses with constant ``D`` is, up to a multiplicative constant,

    b_ref(p) = exp(-s p) int_0^p h(u) sinh(s u) du + sinh(s p) int_p^inf h(u) exp(-s u) du

with ``s = sqrt(D / (2 theta))``. Both integrals are evaluated with the
exponentials folded into the integrand so that nothing overflows.

``sigma_form="reciprocal"`` uses ``s = sqrt(2 theta / D)`` instead, the
inverse length that a balance between price diffusion and cancellation
produces; it is offered for comparison only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .continuous_book import ContinuousParams, IntensityProfile, ShapeCurve, discretize
from .discrete_book import price_moments
from .errors import CalibrationError, ConvergenceError, DomainError
from .specfun import QuadratureSpec, integrate

_QUAD = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, max_subdivisions=1000)
_TAIL_CUTOFF = 1e-14
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BPParams:
    profile: IntensityProfile
    D: float
    theta: float
    scale: float = 1.0
    sigma_form: str = "stated"

    def __post_init__(self):
        for name in ("D", "theta", "scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")
        if self.sigma_form not in ("stated", "reciprocal"):
            raise DomainError(f"unknown sigma_form {self.sigma_form!r}")

    @property
    def sigma(self) -> float:
        if self.sigma_form == "reciprocal":
            return math.sqrt(2.0 * self.theta / self.D)
        return math.sqrt(self.D / (2.0 * self.theta))


def _breaks(profile: IntensityProfile, lo: float, hi: float) -> list[float]:
    cap = profile.support_cap
    return [cap] if cap is not None and lo < cap < hi else []


def _upper_tail(bpp: BPParams, p: float) -> float:
    """int_p^inf h(u) sinh(s p) exp(-s u) du, truncated once negligible."""
    s = bpp.sigma
    h = bpp.profile.h_lambda

    def f(u):
        return h(u) * 0.5 * (np.exp(-s * (u - p)) - np.exp(-s * (u + p)))

    cap = bpp.profile.support_cap
    if cap is not None:
        if p >= cap:
            return 0.0
        return integrate(f, p, cap, _QUAD, vectorized=True)
    span = 40.0 / s
    probe = p + span * np.concatenate([np.geomspace(1e-9, 1e-2, 60), np.linspace(0.0, 1.0, 401)[1:]])
    peak = float(np.max(f(probe)))
    if peak == 0.0:
        return 0.0
    upper = p + span
    prev_tail = math.inf
    for _ in range(60):
        tail = float(f(np.array([upper]))[0])
        if tail <= _TAIL_CUTOFF * peak:
            break
        if tail >= prev_tail:
            raise DomainError("limit order profile grows faster than exp(sigma p); reference shape diverges")
        prev_tail = tail
        upper = p + 2.0 * (upper - p)
    else:
        raise ConvergenceError("reference shape tail never became negligible")
    return integrate(f, p, upper, _QUAD, points=_breaks(bpp.profile, p, upper), vectorized=True)


def bp_shape(bpp: BPParams, p: float) -> float:
    """Diffusive reference shape at price ``p``; exactly 0 at ``p = 0``."""
    if p < 0:
        raise DomainError("price must be >= 0")
    if p == 0.0:
        return 0.0
    s = bpp.sigma
    h = bpp.profile.h_lambda

    def inner(u):
        return h(u) * 0.5 * (np.exp(-s * (p - u)) - np.exp(-s * (p + u)))

    lower = integrate(inner, 0.0, p, _QUAD, points=_breaks(bpp.profile, 0.0, p), vectorized=True)
    return bpp.scale * (lower + _upper_tail(bpp, p))


def bp_curve(bpp: BPParams, grid) -> np.ndarray:
    return np.array([bp_shape(bpp, float(p)) for p in np.asarray(grid, dtype=float)])


def proxy_D(cp: ContinuousParams, tick: float = 1e-2, K: int | None = None, proxy: str = "std") -> float:
    """Diffusion proxy from the stationary price law of the discretized model.

    ``proxy="std"`` returns the price standard deviation (currency units),
    ``proxy="variance"`` its square. ``K`` defaults to 1000 ticks.
    """
    if proxy not in ("std", "variance"):
        raise DomainError(f"unknown proxy {proxy!r}")
    if K is None:
        K = 1000
    dp = discretize(cp, tick, K)
    _, std_ticks = price_moments(dp)
    std = std_ticks * tick
    return std if proxy == "std" else std * std


def _golden_max(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol * max(1.0, abs(c) + abs(d)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def find_peak(grid, values, fn: Callable[[float], float] | None = None) -> tuple[float, float]:
    """Locate the interior maximum of a sampled curve.

    The grid argmax brackets the peak; with ``fn`` the bracket is refined by
    golden-section search, otherwise by the vertex of the parabola through
    the three bracketing samples. Raises `CalibrationError` when the largest
    sample sits at either end of the grid.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    if i == 0 or i == len(values) - 1:
        raise CalibrationError("curve has no interior maximum on the grid")
    a, b = grid[i - 1], grid[i + 1]
    if fn is not None:
        return _golden_max(fn, float(a), float(b))
    x0, x1, x2 = grid[i - 1 : i + 2]
    y0, y1, y2 = values[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    C = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
    if A >= 0:
        return float(x1), float(y1)
    x = -B / (2 * A)
    return float(x), float(A * x * x + B * x + C)


def calibrate_scale(
    bpp: BPParams,
    target: ShapeCurve,
    target_fn: Callable[[float], float] | None = None,
) -> float:
    """Multiplicative constant making the reference peak height match ``target``.

    The normalization is arbitrary by construction: only the heights of the
    two maxima are matched, not their locations or the curves' mass.
    """
    _, target_max = find_peak(target.grid, target.b, target_fn)
    unit = BPParams(bpp.profile, bpp.D, bpp.theta, 1.0, bpp.sigma_form)
    _, ref_max = find_peak(target.grid, bp_curve(unit, target.grid), lambda p: bp_shape(unit, p))
    return target_max / ref_max
