"""Book with random limit order sizes (bulk arrivals), unit market orders.

Shares standing at ticks ``1..k`` form an M^X/M/1+M queue: bulk arrivals at
rate ``lambda_{1->k}`` whose sizes follow the rate-weighted mixture of the
per-tick size laws, one share removed per market order or per-share
cancellation. Its generating function solves a first-order linear ODE whose
solution involves ``Phi(v, z) = int_v^z H(u) du`` with
``H(u) = (1 - G(u)) / (1 - u)``, ``G`` the size PGF:

    I(z)   = int_0^z v**(delta-1) exp(nu Phi(v, z)) dv
    Pi(z)  = z**-delta I(z) / I(1)
    E[L]   = nu * mean_size - delta + 1 / I(1)

For geometric sizes ``I(1)`` is a Gauss hypergeometric function, which gives
closed forms for the discrete and the continuous-price book.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import continuous_book
from .continuous_book import ContinuousParams
from .discrete_book import DiscreteParams, cum_shape as _unit_cum_shape
from .errors import DomainError, PrecisionError
from .specfun import QuadratureSpec, g_delta_parts, integrate, log_hyp2f1_size_kernel

# q above this is treated as unit size; the hypergeometric form degenerates.
Q_UNIT_CROSSOVER = 1.0 - 1e-6

_INNER_QUADRATURE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-13, max_subdivisions=200)
_OUTER_QUADRATURE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, max_subdivisions=2000)


@dataclass(frozen=True)
class SizeDistribution:
    """Law of the number of shares in one limit order (support 1, 2, ...).

    Build with `unit`, `geometric` or `table`; ``probs[j]`` is P(size = j+1).
    """

    kind: str
    q: float = 1.0
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "unit":
            return
        if self.kind == "geometric":
            if not 0.0 < self.q <= 1.0:
                raise DomainError(f"geometric size parameter must be in (0, 1], got {self.q}")
            return
        if self.kind == "table":
            probs = tuple(float(v) for v in self.probs)
            if not probs or any(v < 0 for v in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
                raise DomainError("size table must be non-negative and sum to 1")
            object.__setattr__(self, "probs", probs)
            return
        raise DomainError(f"unknown size distribution kind {self.kind!r}")

    @classmethod
    def unit(cls) -> "SizeDistribution":
        return cls("unit")

    @classmethod
    def geometric(cls, q: float) -> "SizeDistribution":
        return cls("geometric", q=q)

    @classmethod
    def table(cls, probs: Sequence[float]) -> "SizeDistribution":
        return cls("table", probs=tuple(probs))

    @property
    def is_unit(self) -> bool:
        return (
            self.kind == "unit"
            or (self.kind == "geometric" and self.q == 1.0)
            or (self.kind == "table" and len(self.probs) == 1)
        )

    @property
    def mean(self) -> float:
        if self.kind == "unit":
            return 1.0
        if self.kind == "geometric":
            return 1.0 / self.q
        return float(np.arange(1, len(self.probs) + 1) @ np.array(self.probs))

    def pmf(self, tail_tol: float = 1e-16) -> np.ndarray:
        """Probabilities of sizes ``1..n`` (geometric truncated at ``tail_tol``)."""
        if self.kind == "unit":
            return np.array([1.0])
        if self.kind == "table":
            return np.array(self.probs)
        if self.q == 1.0:
            return np.array([1.0])
        n = int(math.ceil(math.log(tail_tol) / math.log1p(-self.q))) + 1
        pmf = self.q * (1.0 - self.q) ** np.arange(n)
        return pmf / pmf.sum()

    def pgf(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "unit":
            return z
        if self.kind == "geometric":
            return self.q * z / (1.0 - (1.0 - self.q) * z)
        return np.polyval(np.r_[self.probs[::-1], 0.0], z)

    def _tail_coeffs(self) -> np.ndarray:
        # P(size > j), j = 0..n-1
        return 1.0 - np.concatenate([[0.0], np.cumsum(self.probs)[:-1]])

    def tail_pgf(self, z):
        """``H(z) = (1 - G(z)) / (1 - z)``, continuous at ``z = 1`` (value: mean)."""
        z = np.asarray(z, dtype=float)
        if self.is_unit and self.kind != "table":
            return np.ones_like(z)
        if self.kind == "geometric":
            return 1.0 / (1.0 - (1.0 - self.q) * z)
        return np.polyval(self._tail_coeffs()[::-1], z)

    def tail_pgf_integral(self, v, z=1.0):
        """``int_v^z H(u) du`` in closed form."""
        v = np.asarray(v, dtype=float)
        if self.kind == "unit" or (self.kind == "geometric" and self.q == 1.0):
            return z - v
        if self.kind == "geometric":
            r = 1.0 - self.q
            return (np.log1p(-r * v) - math.log1p(-r * z)) / r
        t = self._tail_coeffs()
        j = np.arange(1, len(t) + 1)
        return (z ** j - np.power.outer(v, j)) @ (t / j)


@dataclass(frozen=True)
class BulkParams:
    """Discrete book plus per-tick (or shared) limit order size laws."""

    base: DiscreteParams
    sizes: SizeDistribution | tuple[SizeDistribution, ...]

    def __post_init__(self):
        if not isinstance(self.sizes, SizeDistribution):
            sizes = tuple(self.sizes)
            if len(sizes) != self.base.K:
                raise DomainError(f"need {self.base.K} size laws, got {len(sizes)}")
            object.__setattr__(self, "sizes", sizes)

    @property
    def delta(self) -> float:
        return self.base.delta

    def size_at(self, i: int) -> SizeDistribution:
        """Size law at tick ``i`` (1-based)."""
        return self.sizes if isinstance(self.sizes, SizeDistribution) else self.sizes[i - 1]

    def _mixture(self, k: int) -> list[tuple[float, SizeDistribution]]:
        self.base._check_k(k)
        lam = self.base.lam[:k]
        tot = math.fsum(lam)
        if tot == 0.0:
            raise DomainError(f"no limit orders arrive at ticks 1..{k}")
        if isinstance(self.sizes, SizeDistribution):
            return [(1.0, self.sizes)]
        return [(l / tot, self.sizes[i]) for i, l in enumerate(lam) if l > 0]

    def nu(self, k: int) -> float:
        return math.fsum(self.base.lam[:k]) / self.base.theta

    def mean_size(self, k: int) -> float:
        """Rate-weighted mean order size over ticks ``1..k``."""
        return math.fsum(w * s.mean for w, s in self._mixture(k))

    def phi(self, k: int, v, z: float = 1.0, method: str = "closed"):
        """``int_v^z H^{1->k}(u) du`` (closed form, or nested quadrature)."""
        mix = self._mixture(k)
        if method == "closed":
            return sum(w * s.tail_pgf_integral(v, z) for w, s in mix)
        if method != "quadrature":
            raise DomainError(f"unknown method {method!r}")

        def H(u):
            return sum(w * s.tail_pgf(u) for w, s in mix)

        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.array([integrate(H, float(x), z, _INNER_QUADRATURE, vectorized=True) for x in v])
        return out


def _log_weighted_integral(delta: float, psi, z: float) -> float:
    """``log int_0^z v**(delta-1) exp(psi(v)) dv`` for decreasing ``psi``.

    ``delta < 1`` uses ``v = z w**(1/delta)``, which absorbs the endpoint
    singularity; otherwise the integrand is rescaled by its maximum located
    on a trial grid.
    """
    if delta < 1.0:
        top = float(psi(np.array([0.0]))[0])

        def f(w):
            return np.exp(psi(z * w ** (1.0 / delta)) - top)

        val = integrate(f, 0.0, 1.0, _OUTER_QUADRATURE, vectorized=True)
        return delta * math.log(z) - math.log(delta) + top + math.log(val)

    trial = z * np.concatenate([np.geomspace(1e-12, 1e-2, 60), np.linspace(1e-2, 1.0, 200)])
    ell = (delta - 1.0) * np.log(trial) + psi(trial)
    i = int(np.argmax(ell))
    top = float(ell[i])

    def f(v):
        with np.errstate(divide="ignore"):
            return np.exp((delta - 1.0) * np.log(v) + psi(v) - top)

    points = [float(trial[i])] if 0 < i < len(trial) - 1 else []
    lo = float(trial[i - 1]) if i > 0 else None
    hi = float(trial[i + 1]) if i < len(trial) - 1 else None
    points += [x for x in (lo, hi) if x is not None]
    val = integrate(f, 0.0, z, _OUTER_QUADRATURE, points=points, vectorized=True)
    return top + math.log(val)


def mixed_size_pgf_H(bp: BulkParams, k: int, z: float) -> float:
    """``(1 - G^{1->k}(z)) / (1 - z)`` for the rate-weighted size mixture."""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"z must lie in [0, 1], got {z}")
    return float(sum(w * s.tail_pgf(z) for w, s in bp._mixture(k)))


def _log_I(bp: BulkParams, k: int, z: float, method: str) -> float:
    nu = bp.nu(k)
    return _log_weighted_integral(bp.delta, lambda v: nu * bp.phi(k, v, z, method), z)


def stationary_pgf(bp: BulkParams, k: int, z: float, method: str = "closed") -> float:
    """Generating function of the stationary number of shares at ticks ``1..k``."""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"z must lie in [0, 1], got {z}")
    bp.base._check_k(k)
    if bp.nu(k) == 0.0 or z == 1.0:
        return 1.0
    nu = bp.nu(k)
    if bp.delta == 0.0:
        return math.exp(-nu * float(np.asarray(bp.phi(k, np.array([z]), 1.0, method))[0]))
    log_i1 = _log_I(bp, k, 1.0, method)
    if z == 0.0:
        return math.exp(-log_i1) / bp.delta
    return math.exp(-bp.delta * math.log(z) + _log_I(bp, k, z, method) - log_i1)


def empty_prob(bp: BulkParams, k: int, method: str = "closed") -> float:
    """P(no shares at ticks ``1..k``) = Pi(0)."""
    return stationary_pgf(bp, k, 0.0, method)


def cum_shape_general(bp: BulkParams, k: int, method: str = "closed") -> float:
    """Mean shares at ticks ``1..k`` from the integral formula."""
    bp.base._check_k(k)
    nu = bp.nu(k)
    if nu == 0.0:
        return 0.0
    gbar = bp.mean_size(k)
    if bp.delta == 0.0:
        return nu * gbar
    return nu * gbar - bp.delta + math.exp(-_log_I(bp, k, 1.0, method))


def cum_shape(bp: BulkParams, k: int) -> float:
    """Mean shares at ticks ``1..k``, using the fastest exact route available."""
    bp.base._check_k(k)
    if isinstance(bp.sizes, SizeDistribution):
        if bp.sizes.is_unit and bp.sizes.kind != "table":
            return _unit_cum_shape(bp.base, k)
        if bp.sizes.kind == "geometric":
            return cum_shape_geometric(bp.nu(k), bp.delta, bp.sizes.q)
    return cum_shape_general(bp, k)


def _geometric_correction(y: float, delta: float, q: float) -> float:
    """``delta q**(y/(1-q)) / 2F1(delta, -y/(1-q); 1+delta; 1-q)`` (any real y)."""
    s = y / (1.0 - q)
    return math.exp(math.log(delta) + s * math.log(q) - log_hyp2f1_size_kernel(delta, s, q))


def cum_shape_geometric(nu: float, delta: float, q: float) -> float:
    """Mean standing shares with geometric(q) order sizes, hypergeometric form."""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    if nu < 0 or delta < 0:
        raise DomainError("nu and delta must be >= 0")
    if nu == 0.0:
        return 0.0
    if q >= Q_UNIT_CROSSOVER:
        if delta == 0.0:
            return nu
        return nu - delta * g_delta_parts(delta, nu)[1]
    if delta == 0.0:
        return nu / q
    return nu / q - delta + _geometric_correction(nu, delta, q)


def cum_shape_continuous_geometric(cp: ContinuousParams, q: float, p: float) -> float:
    """Cumulative shape ``B(p)`` of the continuous book with geometric sizes."""
    y = float(continuous_book.cumulative_intensity(cp, p))
    if y == 0.0:
        return 0.0
    return cum_shape_geometric(y, cp.delta, q)


def _richardson_derivative(fn, y: float, step: float) -> tuple[float, float]:
    """Two successive Richardson-extrapolated central differences."""
    def central(h):
        return (fn(y + h) - fn(y - h)) / (2.0 * h)

    d1, d2, d3 = central(step), central(step / 2), central(step / 4)
    return (4.0 * d2 - d1) / 3.0, (4.0 * d3 - d2) / 3.0


def correction_derivative(y: float, delta: float, q: float) -> float:
    """d/dy of the hypergeometric correction term, by Richardson differences."""
    step = 0.02 * max(1.0, math.sqrt(abs(y)))
    coarse, fine = _richardson_derivative(lambda t: _geometric_correction(t, delta, q), y, step)
    if abs(coarse - fine) > 1e-6 * (abs(fine) + 1.0 / q):
        raise PrecisionError(
            f"finite-difference derivative unstable at y={y} (delta={delta}, q={q}): "
            f"{coarse!r} vs {fine!r}"
        )
    return fine


def shape_continuous_geometric(cp: ContinuousParams, q: float, p: float) -> float:
    """Shape ``b(p)`` of the continuous book with geometric sizes."""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    h = float(continuous_book.normalized_intensity(cp, p))
    if h == 0.0:
        return 0.0
    if q >= Q_UNIT_CROSSOVER:
        return continuous_book.shape_b(cp, p)
    if cp.delta == 0.0:
        return h / q
    y = float(continuous_book.cumulative_intensity(cp, p))
    return h / q + h * correction_derivative(y, cp.delta, q)
