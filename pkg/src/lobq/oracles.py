"""Brute-force stationary solves of truncated generators.

These never touch the incomplete gamma or hypergeometric machinery, which is
what makes them usable as independent checks of the closed forms.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def truncated_generator(arrival_rate, mu, theta, n_max, size_pmf=None):
    """Generator of the shares-in-queue chain on ``{0, ..., n_max}``.

    Bulk arrivals of ``j`` shares happen at rate ``arrival_rate * size_pmf[j-1]``
    (unit sizes when ``size_pmf`` is None); arrivals past ``n_max`` are lumped
    into the last state. In state ``n >= 1`` one share leaves at rate
    ``mu + n theta``.
    """
    pmf = np.array([1.0]) if size_pmf is None else np.asarray(size_pmf, dtype=float)
    n = n_max + 1
    Q = np.zeros((n, n))
    for j, g in enumerate(pmf, start=1):
        if g == 0.0:
            continue
        rate = arrival_rate * g
        src = np.arange(n)
        dst = np.minimum(src + j, n_max)
        np.add.at(Q, (src, dst), rate)
    states = np.arange(1, n)
    Q[states, states - 1] += mu + states * theta
    np.fill_diagonal(Q, 0.0)
    Q[np.arange(n), np.arange(n)] = -Q.sum(axis=1)
    return Q


def solve_stationary(Q):
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` by a dense linear solve."""
    n = Q.shape[0]
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    return np.clip(pi, 0.0, None)


def queue_oracle(arrival_rate, mu, theta, size_pmf=None, tail_tol=1e-13, n_start=64, n_limit=20000):
    """Stationary law of the (bulk) M/M/1+M queue by growing truncation.

    The truncation level doubles until the mass in the top tenth of the state
    space falls below ``tail_tol``.
    """
    if arrival_rate == 0.0:
        return np.array([1.0])
    mean_size = 1.0 if size_pmf is None else float(np.arange(1, len(size_pmf) + 1) @ np.asarray(size_pmf))
    n_max = max(n_start, int(4 * arrival_rate * mean_size / theta) + 40)
    while n_max <= n_limit:
        pi = solve_stationary(truncated_generator(arrival_rate, mu, theta, n_max, size_pmf))
        top = pi[-(n_max // 10 + 1):].sum()
        if top < tail_tol:
            return pi
        n_max *= 2
    raise ConvergenceError("truncated generator did not capture the stationary mass")


def discrete_book_oracle(lam, mu, theta, size_pmf=None, tail_tol=1e-13):
    """Per-prefix oracle quantities for a discrete book.

    Returns a dict with, for ``k = 1..K``: ``dists`` (stationary laws),
    ``empty`` (P(empty up to k)), ``mean`` (mean shares up to k), plus the
    derived ``price_probs`` and ``cancel`` (cancelled share fraction per tick,
    NaN where no orders arrive).
    """
    lam = np.asarray(lam, dtype=float)
    mean_size = 1.0 if size_pmf is None else float(np.arange(1, len(size_pmf) + 1) @ np.asarray(size_pmf))
    dists, empty, mean = [], [1.0], [0.0]
    for k in range(1, len(lam) + 1):
        pi = queue_oracle(float(lam[:k].sum()), mu, theta, size_pmf, tail_tol)
        dists.append(pi)
        empty.append(float(pi[0]))
        mean.append(float(np.arange(len(pi)) @ pi))
    empty = np.array(empty)
    mean = np.array(mean)
    with np.errstate(invalid="ignore", divide="ignore"):
        cancel = np.where(lam > 0, theta * np.diff(mean) / (lam * mean_size), np.nan)
    return {
        "dists": dists,
        "empty": empty[1:],
        "mean": mean[1:],
        "price_probs": empty[:-1] - empty[1:],
        "cancel": cancel,
    }
