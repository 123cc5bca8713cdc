"""Special functions and quadrature used by the order book formulas.

The lower incomplete gamma function is evaluated through the regularized
pair P/Q (power series below ``y = x + 1``, Lentz continued fraction above)
and un-regularized in log space, so that quantities such as
``exp(-y) y**x / Gamma_y(x)`` stay finite even when ``y**x`` overflows.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, PrecisionError

_EPS = 2.0**-53
_TINY = 1e-300
_MAX_ITER = 100_000


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite argument: {v!r}")


# ---------------------------------------------------------------------------
# incomplete gamma
# ---------------------------------------------------------------------------


def _series_tail(x: float, y: float) -> float:
    """Return T = sum_{n>=0} y**n / ((x+1)(x+2)...(x+n+1)).

    The regularized series is ``S = 1 + y*T`` with
    ``P(x, y) = exp(-y) y**x S / Gamma(x+1)``. Keeping ``T`` separate gives
    ``1 - 1/S`` without cancellation at small ``y``.
    """
    term = 1.0 / (x + 1.0)
    total = term
    n = 1
    while n < _MAX_ITER:
        term *= y / (x + 1.0 + n)
        total += term
        if term < total * _EPS:
            return total
        n += 1
    raise ConvergenceError(f"incomplete gamma series did not converge (x={x}, y={y})")


def _log_cf_q(x: float, y: float) -> float:
    """log Q(x, y) by the modified Lentz continued fraction (y >= x + 1)."""
    b = y + 1.0 - x
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - x)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return -y + x * math.log(y) - math.lgamma(x) + math.log(h)
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge (x={x}, y={y})")


def _use_series(x: float, y: float) -> bool:
    return y < x + 1.0


def log_lower_inc_gamma(x: float, y: float) -> float:
    """Natural log of the lower incomplete gamma function (``-inf`` at y=0)."""
    _check_finite(x, y)
    if x <= 0.0 or y < 0.0:
        raise DomainError(f"lower_inc_gamma needs x > 0, y >= 0 (got x={x}, y={y})")
    if y == 0.0:
        return -math.inf
    if _use_series(x, y):
        s = 1.0 + y * _series_tail(x, y)
        return -y + x * math.log(y) - math.log(x) + math.log(s)
    return math.lgamma(x) + math.log1p(-math.exp(_log_cf_q(x, y)))


def lower_inc_gamma(x: float, y: float) -> float:
    """Lower incomplete gamma ``int_0^y t**(x-1) exp(-t) dt``.

    >>> round(lower_inc_gamma(1.0, 2.0), 12) == round(1 - math.exp(-2.0), 12)
    True
    """
    v = log_lower_inc_gamma(x, y)
    return 0.0 if v == -math.inf else math.exp(v)


def _g_parts(delta: float, y: float) -> tuple[float, float, float]:
    """Return ``(g, 1 - g, (1 - g) / y)`` for ``g = g_delta(y)``.

    Each piece is computed without subtractive cancellation: in the series
    region ``g = 1/(1 + yT)`` so ``1 - g = yT/(1 + yT)``.
    """
    if _use_series(delta, y):
        t = _series_tail(delta, y)
        s = 1.0 + y * t
        return 1.0 / s, y * t / s, t / s
    log_g = -y + delta * math.log(y) - math.lgamma(delta + 1.0) - math.log1p(-math.exp(_log_cf_q(delta, y)))
    g = math.exp(log_g)
    one_minus = -math.expm1(log_g)
    return g, one_minus, one_minus / y


def g_delta(delta: float, y: float) -> float:
    """Empty-queue probability ``exp(-y) y**delta / (delta Gamma_y(delta))``.

    ``delta`` is the normalized market-order rate and ``y`` the normalized
    cumulative limit-order rate. The value is the stationary probability that
    an M/M/1+M queue with these parameters is empty.
    """
    _check_finite(delta, y)
    if delta <= 0.0 or y <= 0.0:
        raise DomainError(f"g_delta needs delta > 0, y > 0 (got delta={delta}, y={y})")
    return _g_parts(delta, y)[0]


def g_delta_ext(delta: float, y: float) -> float:
    """``g_delta`` extended to the model boundary.

    ``g(0) = 1`` (no arrivals means an empty sub-book) and ``delta = 0`` gives
    the pure immigration-death limit ``exp(-y)``.
    """
    _check_finite(delta, y)
    if delta < 0.0 or y < 0.0:
        raise DomainError(f"g_delta_ext needs delta >= 0, y >= 0 (got delta={delta}, y={y})")
    if y == 0.0:
        return 1.0
    if delta == 0.0:
        return math.exp(-y)
    return _g_parts(delta, y)[0]


def g_delta_parts(delta: float, y: float) -> tuple[float, float, float]:
    """``(g, 1 - g, (1 - g)/y)`` with the boundary conventions of `g_delta_ext`.

    At ``y = 0`` the last entry is its limit ``1/(1 + delta)``.
    """
    _check_finite(delta, y)
    if delta < 0.0 or y < 0.0:
        raise DomainError(f"g_delta_parts needs delta >= 0, y >= 0 (got delta={delta}, y={y})")
    if y == 0.0:
        return 1.0, 0.0, 1.0 / (1.0 + delta)
    if delta == 0.0:
        one_minus = -math.expm1(-y)
        return math.exp(-y), one_minus, one_minus / y
    return _g_parts(delta, y)


def gamma_ratio_f(x: float, y: float) -> float:
    """``Gamma_y(1 + x) / Gamma_y(x)``.

    Uses ``Gamma_y(x+1) = x Gamma_y(x) - y**x exp(-y)``, i.e.
    ``f = x (1 - g_x(y))``, with ``1 - g`` formed without cancellation.
    """
    _check_finite(x, y)
    if x <= 0.0 or y <= 0.0:
        raise DomainError(f"gamma_ratio_f needs x > 0, y > 0 (got x={x}, y={y})")
    return x * _g_parts(x, y)[1]


# ---------------------------------------------------------------------------
# Gauss hypergeometric series
# ---------------------------------------------------------------------------


def _hyp2f1_terms(a: float, b: float, c: float, x: float, rel_tol: float) -> tuple[float, float]:
    """Sum the 2F1 power series in double precision.

    Returns ``(sum, largest |partial sum or term|)``.
    """
    total = 1.0
    term = 1.0
    peak = 1.0
    n = 0
    while n < _MAX_ITER:
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x
        term *= ratio
        total += term
        peak = max(peak, abs(term), abs(total))
        n += 1
        if term == 0.0:
            return total, peak
        r = abs((a + n) * (b + n) / ((c + n) * (n + 1.0)) * x)
        if n > -b and r < 1.0 and abs(term) * r / (1.0 - r) <= rel_tol * abs(total):
            return total, peak
    raise ConvergenceError(f"2F1 series did not converge (a={a}, b={b}, c={c}, x={x})")


def gauss_2f1(
    a: float,
    b: float,
    c: float,
    x: float,
    *,
    rel_tol: float = 1e-13,
    max_amplification: float = 1e8,
) -> float:
    """Gauss hypergeometric function by direct power-series summation.

    Restricted to ``c > 0`` and ``0 <= x < 1``; the book formulas only need
    ``b <= 0``. When ``b`` is negative the leading terms alternate in sign;
    if the largest term exceeds the final sum by more than
    ``max_amplification`` the result is rejected with `PrecisionError`.
    """
    _check_finite(a, b, c, x)
    if c <= 0.0:
        raise DomainError(f"gauss_2f1 needs c > 0 (got {c})")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"gauss_2f1 needs 0 <= x < 1 (got {x})")
    if x == 0.0 or b == 0.0:
        return 1.0
    total, peak = _hyp2f1_terms(a, b, c, x, rel_tol)
    if total == 0.0 or peak / abs(total) > max_amplification:
        raise PrecisionError(
            f"2F1({a}, {b}; {c}; {x}): cancellation amplifies rounding by "
            f"{peak / abs(total) if total else math.inf:.3g}"
        )
    return total


def _log_hyp2f1_mp(a: float, b: float, c: float, x: float, rel_tol: float) -> float:
    """log 2F1 by the same series in extended precision (mpmath arithmetic)."""
    import mpmath

    dps = 40
    while True:
        with mpmath.workdps(dps):
            A, B, C, X = (mpmath.mpf(v) for v in (a, b, c, x))
            total = mpmath.mpf(1)
            term = mpmath.mpf(1)
            peak = mpmath.mpf(1)
            tol = mpmath.mpf(rel_tol) * mpmath.mpf(10) ** -3
            n = 0
            while True:
                term *= (A + n) * (B + n) / ((C + n) * (n + 1)) * X
                total += term
                n += 1
                if abs(term) > peak:
                    peak = abs(term)
                if term == 0:
                    break
                r = abs((A + n) * (B + n) / ((C + n) * (n + 1)) * X)
                if n > -b and r < 1 and abs(term) * r / (1 - r) <= tol * abs(total):
                    break
                if n > _MAX_ITER:
                    raise ConvergenceError(f"2F1 series did not converge (a={a}, b={b}, c={c}, x={x})")
            if total <= 0:
                lost = dps
            else:
                lost = float(mpmath.log10(peak / total))
            if lost + 25 < dps:
                return float(mpmath.log(total))
            dps = int(lost) + 40
            if dps > 20_000:
                raise PrecisionError(f"2F1({a}, {b}; {c}; {x}) needs more than 20000 digits")


def log_hyp2f1_size_kernel(delta: float, s: float, q: float) -> float:
    """``log 2F1(delta, -s; 1 + delta; 1 - q)`` for any real ``s``.

    This is the hypergeometric factor of the geometric-size book
    (``s = nu/(1-q)``). It equals ``delta * int_0^1 v**(delta-1)
    (1-(1-q)v)**s dv`` and is therefore positive. Evaluation order:

    1. ``s < 0``: the power series, whose terms are then all positive;
    2. ``s > 0``: the integral as an incomplete beta function,
       ``delta (1-q)**-delta B(delta, 1+s) I_{1-q}(delta, 1+s)``;
    3. if that underflows and ``q <= 1/2``, the ``x -> 1 - x`` connection
       formula ``B(1+delta, 1+s)-type term - delta/(1+s) q**(1+s) 2F1(1, 1+delta+s; 2+s; q)``,
       whose series in ``q`` has positive terms;
    4. otherwise the direct series in extended precision.
    """
    x = 1.0 - q
    if x == 0.0 or s == 0.0:
        return 0.0
    if s < 0.0:
        total, _ = _hyp2f1_terms(delta, -s, 1.0 + delta, x, 1e-16)
        return math.log(total)
    ib = float(special.betainc(delta, 1.0 + s, x))
    if ib > 0.0 and math.isfinite(ib):
        return math.log(delta) - delta * math.log(x) + float(special.betaln(delta, 1.0 + s)) + math.log(ib)
    if q <= 0.5:
        log_t1 = (
            math.lgamma(1.0 + delta) + math.lgamma(1.0 + s) - math.lgamma(1.0 + delta + s)
            - delta * math.log1p(-q)
        )
        f2, _ = _hyp2f1_terms(1.0, 1.0 + delta + s, 2.0 + s, q, 1e-16)
        log_t2 = math.log(delta / (1.0 + s)) + (1.0 + s) * math.log(q) + math.log(f2)
        ratio = math.exp(log_t2 - log_t1)
        if ratio < 0.5:
            return log_t1 + math.log1p(-ratio)
    return _log_hyp2f1_mp(delta, -s, 1.0 + delta, x, 1e-15)


# ---------------------------------------------------------------------------
# adaptive quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerance policy for `integrate`."""

    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    max_subdivisions: int = 400

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise DomainError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")


DEFAULT_QUADRATURE = QuadratureSpec()

# 21-point Gauss-Kronrod rule (QUADPACK qk21); nodes on [0, 1] half-line.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980373391,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 21 nodes in [-1, 1]
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]


def _gk21(f: Callable, a: float, b: float, vectorized: bool) -> tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _NODES
    if vectorized:
        fx = np.asarray(f(x), dtype=float)
    else:
        fx = np.array([f(float(t)) for t in x], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise DomainError(f"integrand is not finite on [{a}, {b}]")
    k = half * float(_KW @ fx)
    g = half * float(_GW @ fx)
    return k, abs(k - g)


def integrate(
    f: Callable,
    a: float,
    b: float,
    spec: QuadratureSpec | None = None,
    *,
    points: Sequence[float] = (),
    vectorized: bool = False,
    singular_exponent: float | None = None,
) -> float:
    """Adaptive 21-point Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    Parameters
    ----------
    points:
        Interior break points (kinks, discontinuities) used as the initial
        partition.
    vectorized:
        ``f`` accepts and returns numpy arrays.
    singular_exponent:
        If ``f(x) ~ (x - a)**(d - 1)`` with ``0 < d < 1`` near ``a``, pass
        ``d``; the substitution ``x = a + (b-a) w**(1/d)`` removes the
        singularity before integration.
    """
    spec = spec or DEFAULT_QUADRATURE
    _check_finite(a, b)
    if a > b:
        raise DomainError(f"integrate needs a <= b (got a={a}, b={b})")
    if a == b:
        return 0.0

    if singular_exponent is not None and 0.0 < singular_exponent < 1.0:
        d = singular_exponent
        width = b - a
        inner = f

        def transformed(w):
            w = np.asarray(w, dtype=float) if vectorized else w
            x = a + width * w ** (1.0 / d)
            jac = width / d * w ** (1.0 / d - 1.0)
            return (inner(x) if vectorized else inner(float(x))) * jac

        mapped = [((p - a) / width) ** d for p in points if a < p < b]
        return integrate(transformed, 0.0, 1.0, spec, points=mapped, vectorized=vectorized)

    edges = [a] + sorted(p for p in set(points) if a < p < b) + [b]
    heap = []
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _gk21(f, lo, hi, vectorized)
        heapq.heappush(heap, (-e, lo, hi, val))
        total += val
        err += e
    n_sub = len(heap)
    while err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if n_sub >= spec.max_subdivisions:
            raise ConvergenceError(
                f"quadrature on [{a}, {b}] not converged after {n_sub} subdivisions "
                f"(estimate {total!r}, error {err:.3g})"
            )
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise ConvergenceError(f"quadrature interval collapsed near {lo!r}")
        v1, e1 = _gk21(f, lo, mid, vectorized)
        v2, e2 = _gk21(f, mid, hi, vectorized)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_sub += 1
    # re-sum to shed accumulated rounding from the running updates
    return math.fsum(item[3] for item in heap)
