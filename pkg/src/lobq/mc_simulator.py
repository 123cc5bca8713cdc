"""Exact event-by-event simulation of the one-sided book.

Competing exponential clocks: limit orders at tick ``i`` (rate ``lambda_i``,
size drawn from that tick's size law, all shares placed at ``i``), unit
market orders (rate ``mu``, one share taken at the best tick, lost on an
empty book) and cancellations (rate ``theta * N``, one uniformly chosen
standing share; exact by memorylessness of the per-share lifetimes).

Uniforms come from a numpy ``Generator`` seeded with ``SimConfig.seed`` and
are consumed three per event by a compiled kernel, so a run is bit-for-bit
reproducible. Statistics are time averages over ``(burn_in, horizon]`` split
into equal batches; standard errors are batch-means standard errors.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bulk_book import BulkParams, SizeDistribution
from .discrete_book import DiscreteParams
from .errors import DomainError

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-Python fallback, same results
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

CHUNK_EVENTS = 1 << 16
SUBMITTED, CANCELLED, EXECUTED = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Simulation run description.

    ``params`` may be a `DiscreteParams` (unit sizes) or a `BulkParams`.
    ``burn_in`` defaults to 10% of ``horizon``.
    """

    params: BulkParams | DiscreteParams
    horizon: float
    burn_in: float | None = None
    seed: int = 0
    n_batches: int = 20

    def __post_init__(self):
        if isinstance(self.params, DiscreteParams):
            object.__setattr__(self, "params", BulkParams(self.params, SizeDistribution.unit()))
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", 0.1 * self.horizon)
        if not (math.isfinite(self.horizon) and self.horizon > self.burn_in >= 0):
            raise DomainError("need horizon > burn_in >= 0")
        if self.n_batches < 2:
            raise DomainError("need at least two batches")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")


def expected_event_rate(params: BulkParams | DiscreteParams) -> float:
    """Stationary mean event rate ``lambda + mu + theta E[N]`` of the whole book."""
    from .bulk_book import cum_shape

    if isinstance(params, DiscreteParams):
        params = BulkParams(params, SizeDistribution.unit())
    base = params.base
    return math.fsum(base.lam) + base.mu + base.theta * cum_shape(params, base.K)


def horizon_for_events(params: BulkParams | DiscreteParams, n_events: float) -> float:
    """Time horizon that yields about ``n_events`` events in stationarity."""
    return n_events / expected_event_rate(params)


# ---------------------------------------------------------------------------
# compiled kernel
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _fenwick_add(tree, i, delta):
    i += 1
    n = tree.shape[0]
    while i < n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True, nogil=True)
def _fenwick_find(tree, j):
    """Smallest index i with prefix count(0..i) > j."""
    n = tree.shape[0] - 1
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= j:
            pos = nxt
            j -= tree[nxt]
        step //= 2
    return pos


@njit(cache=True, nogil=True)
def _flush(counts, last, t, depth, batch, credit):
    for i in range(counts.shape[0]):
        if credit:
            depth[batch, i] += counts[i] * (t - last[i])
        last[i] = t


@njit(cache=True, nogil=True)
def _run_chunk(
    u, cum_lam, mu, theta, size_cdf, window, n_batches,
    counts, tree, last, fstate, istate,
    depth, price_time, flows, totals,
):
    """Consume uniforms ``u`` three per event; return the number used.

    ``fstate = [t]``, ``istate = [N, best, done, batch]`` (batch -1 in burn-in). ``window = [w0, w1]``.
    """
    K = counts.shape[0]
    lam_tot = cum_lam[K - 1]
    w0 = window[0]
    w1 = window[1]
    blen = (w1 - w0) / n_batches
    t = fstate[0]
    N = istate[0]
    best = istate[1]
    b = istate[3]
    k = 0
    n_u = u.shape[0]
    while k + 3 <= n_u:
        rate = lam_tot + mu + theta * N
        t_next = t - math.log1p(-u[k]) / rate
        # advance the clock across window and batch edges
        stop = min(t_next, w1)
        cur = t
        while cur < stop:
            if b < 0:
                seg = min(stop, w0)
                if seg == w0:
                    _flush(counts, last, w0, depth, 0, False)
                    b = 0
                cur = seg
                continue
            edge = w1 if b == n_batches - 1 else w0 + (b + 1) * blen
            seg = min(stop, edge)
            price_time[b, best] += seg - cur
            if seg == edge:
                _flush(counts, last, edge, depth, b, True)
                if b == n_batches - 1:
                    break
                b += 1
            cur = seg
        if t_next >= w1:
            istate[2] = 1
            t = w1
            k += 3
            break
        t = t_next
        x = u[k + 1] * rate
        if x < lam_tot:
            i = 0
            while cum_lam[i] <= x and i < K - 1:
                i += 1
            row = size_cdf[i]
            v = u[k + 2]
            lo = 0
            hi = row.shape[0] - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if row[mid] > v:
                    hi = mid
                else:
                    lo = mid + 1
            size = lo + 1
            if b >= 0:
                depth[b, i] += counts[i] * (t - last[i])
            last[i] = t
            counts[i] += size
            _fenwick_add(tree, i, size)
            N += size
            if i < best:
                best = i
            totals[i, SUBMITTED] += size
            if b >= 0:
                flows[b, i, SUBMITTED] += size
        elif x < lam_tot + mu:
            if N > 0:
                i = best
                if b >= 0:
                    depth[b, i] += counts[i] * (t - last[i])
                last[i] = t
                counts[i] -= 1
                _fenwick_add(tree, i, -1)
                N -= 1
                totals[i, EXECUTED] += 1
                if b >= 0:
                    flows[b, i, EXECUTED] += 1
                while best < K and counts[best] == 0:
                    best += 1
        else:
            j = int(u[k + 2] * N)
            if j >= N:
                j = N - 1
            i = _fenwick_find(tree, j)
            if b >= 0:
                depth[b, i] += counts[i] * (t - last[i])
            last[i] = t
            counts[i] -= 1
            _fenwick_add(tree, i, -1)
            N -= 1
            totals[i, CANCELLED] += 1
            if b >= 0:
                flows[b, i, CANCELLED] += 1
            if i == best:
                while best < K and counts[best] == 0:
                    best += 1
        k += 3
    fstate[0] = t
    istate[0] = N
    istate[1] = best
    istate[3] = b
    return k


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def _batch_se(batches: np.ndarray) -> np.ndarray:
    return batches.std(axis=0, ddof=1) / math.sqrt(batches.shape[0])


def _group_means(values: np.ndarray, n_groups: int) -> np.ndarray:
    return values.reshape((n_groups, -1) + values.shape[1:]).mean(axis=1)


@dataclass(frozen=True)
class SimStats:
    """Batch-level output of one or more simulation runs.

    ``depth_batches[b, i]`` is the time-averaged number of shares at tick
    ``i+1`` in batch ``b``; ``price_batches[b, i]`` the fraction of the batch
    with best price ``i+1`` (last column: empty book); ``flow_batches[b, i]``
    the submitted / cancelled / executed share counts. ``flow_totals`` and
    ``standing_end`` cover the whole run from the empty initial book, so per
    tick ``submitted == cancelled + executed + standing`` exactly (summed over
    replicates for pooled stats).

    Standard errors come from batch means for a single run
    (``se_mode="batch"``) and from the spread of replicate means for pooled
    runs (``se_mode="replicate"``); `with_se_mode` switches between them.
    """

    depth_batches: np.ndarray
    price_batches: np.ndarray
    flow_batches: np.ndarray
    flow_totals: np.ndarray
    standing_end: np.ndarray
    n_reps: int = 1
    n_events: int = 0
    se_mode: str = "batch"

    def __post_init__(self):
        if self.se_mode not in ("batch", "replicate"):
            raise DomainError(f"unknown se_mode {self.se_mode!r}")
        if self.se_mode == "replicate" and self.n_reps < 2:
            raise DomainError("replicate standard errors need n_reps >= 2")
        for a in (self.depth_batches, self.price_batches, self.flow_batches,
                  self.flow_totals, self.standing_end):
            a.setflags(write=False)

    def with_se_mode(self, mode: str) -> "SimStats":
        return replace(self, se_mode=mode)

    def _se(self, batches: np.ndarray) -> np.ndarray:
        if self.se_mode == "replicate":
            return _batch_se(_group_means(batches, self.n_reps))
        return _batch_se(batches)

    @property
    def K(self) -> int:
        return self.depth_batches.shape[1]

    @property
    def avg_depth(self) -> np.ndarray:
        return self.depth_batches.mean(axis=0)

    @property
    def avg_depth_se(self) -> np.ndarray:
        return self._se(self.depth_batches)

    @property
    def avg_cum_depth(self) -> np.ndarray:
        return np.cumsum(self.depth_batches, axis=1).mean(axis=0)

    @property
    def avg_cum_depth_se(self) -> np.ndarray:
        return self._se(np.cumsum(self.depth_batches, axis=1))

    @property
    def price_hist(self) -> np.ndarray:
        """Time fraction per best tick ``1..K`` followed by the empty-book fraction."""
        return self.price_batches.mean(axis=0)

    @property
    def price_hist_se(self) -> np.ndarray:
        return self._se(self.price_batches)

    @property
    def empty_fraction(self) -> float:
        return float(self.price_hist[-1])

    @property
    def flow_counts(self) -> dict[str, np.ndarray]:
        return {
            "submitted": self.flow_totals[:, SUBMITTED],
            "cancelled": self.flow_totals[:, CANCELLED],
            "executed": self.flow_totals[:, EXECUTED],
        }

    def cancel_ratio(self, lo: int = 1, hi: int | None = None) -> tuple[float, float]:
        """Cancelled / submitted shares over ticks ``lo..hi`` and its standard error.

        Ratio-of-means estimator over batches with a delta-method error.
        """
        hi = lo if hi is None else hi
        sub = self.flow_batches[:, lo - 1 : hi, SUBMITTED].sum(axis=1).astype(float)
        can = self.flow_batches[:, lo - 1 : hi, CANCELLED].sum(axis=1).astype(float)
        if self.se_mode == "replicate":
            sub = _group_means(sub, self.n_reps)
            can = _group_means(can, self.n_reps)
        if sub.sum() == 0:
            return math.nan, math.nan
        r = can.mean() / sub.mean()
        resid = can - r * sub
        se = resid.std(ddof=1) / math.sqrt(len(sub)) / sub.mean()
        return float(r), float(se)

    def bucket_depth(self, lo: int, hi: int) -> tuple[float, float]:
        """Mean shares standing at ticks ``lo..hi`` and its standard error."""
        b = self.depth_batches[:, lo - 1 : hi].sum(axis=1)
        return float(b.mean()), float(self._se(b))

    def price_moments(self) -> tuple[float, float]:
        """Mean and std (ticks) of the best price while the book is non-empty."""
        w = self.price_hist[:-1]
        w = w / w.sum()
        k = np.arange(1, len(w) + 1)
        m = float(w @ k)
        return m, math.sqrt(float(w @ (k - m) ** 2))

    def price_variance_se(self) -> tuple[float, float]:
        """Conditional price variance (ticks^2) with a batch-means error."""
        p = self.price_batches[:, :-1]
        p = p / p.sum(axis=1, keepdims=True)
        k = np.arange(1, p.shape[1] + 1)
        m = p @ k
        var = p @ (k * k) - m * m
        return float(var.mean()), float(self._se(var))


def simulate(cfg: SimConfig) -> SimStats:
    """Run one replicate."""
    bp = cfg.params
    base = bp.base
    K = base.K
    cum_lam = np.cumsum(np.asarray(base.lam, dtype=float))
    pmfs = [bp.size_at(i).pmf() for i in range(1, K + 1)]
    width = max(len(p) for p in pmfs)
    size_cdf = np.ones((K, width))
    for i, p in enumerate(pmfs):
        c = np.cumsum(p)
        c[-1] = 1.0
        size_cdf[i, : len(c)] = c

    B = int(cfg.n_batches)
    counts = np.zeros(K, dtype=np.int64)
    tree = np.zeros(K + 1, dtype=np.int64)
    last = np.zeros(K)
    fstate = np.zeros(1)
    istate = np.array([0, K, 0, -1 if cfg.burn_in > 0 else 0], dtype=np.int64)
    depth = np.zeros((B, K))
    price_time = np.zeros((B, K + 1))
    flows = np.zeros((B, K, 3), dtype=np.int64)
    totals = np.zeros((K, 3), dtype=np.int64)
    window = np.array([float(cfg.burn_in), float(cfg.horizon)])

    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    n_events = 0
    while not istate[2]:
        u = rng.random(3 * CHUNK_EVENTS)
        used = _run_chunk(
            u, cum_lam, float(base.mu), float(base.theta), size_cdf, window, B,
            counts, tree, last, fstate, istate, depth, price_time, flows, totals,
        )
        n_events += used // 3
    blen = (cfg.horizon - cfg.burn_in) / B
    return SimStats(
        depth_batches=depth / blen,
        price_batches=price_time / blen,
        flow_batches=flows,
        flow_totals=totals,
        standing_end=counts.copy(),
        n_reps=1,
        n_events=n_events,
    )


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("LOBQ_THREADS", "0")) or (os.cpu_count() or 1))
    except ValueError:
        return os.cpu_count() or 1


def replicate(cfg: SimConfig, n_reps: int, max_workers: int | None = None) -> SimStats:
    """Independent replicates with seeds ``seed, seed+1, ...``, pooled.

    Batches of all replicates are stacked, so pooled means equal the mean of
    the replicate means; standard errors are between-replicate by default
    (``with_se_mode("batch")`` gives the pooled batch-means version). Replicates may run concurrently (bounded by ``LOBQ_THREADS``);
    the result does not depend on scheduling.
    """
    if n_reps < 2:
        raise DomainError("replicate needs n_reps >= 2")
    cfgs = [
        SimConfig(cfg.params, cfg.horizon, cfg.burn_in, (int(cfg.seed) + r) % 2**64, cfg.n_batches)
        for r in range(n_reps)
    ]
    workers = min(n_reps, max_workers or _thread_cap())
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(simulate, cfgs))
    else:
        runs = [simulate(c) for c in cfgs]
    return pool_stats(runs)


def pool_stats(runs: list[SimStats]) -> SimStats:
    """Stack runs with equal batch counts; replicate-mode standard errors."""
    return SimStats(
        depth_batches=np.concatenate([r.depth_batches for r in runs]),
        price_batches=np.concatenate([r.price_batches for r in runs]),
        flow_batches=np.concatenate([r.flow_batches for r in runs]),
        flow_totals=sum(r.flow_totals for r in runs),
        standing_end=sum(r.standing_end for r in runs),
        n_reps=sum(r.n_reps for r in runs),
        n_events=sum(r.n_events for r in runs),
        se_mode="replicate",
    )
