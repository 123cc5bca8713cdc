"""Monte Carlo check of the cumulative depth on a 0.05 tick grid.

Run: python3 demos/simulate_vs_formula.py
"""

import numpy as np

from lobq.continuous_book import ContinuousParams, IntensityProfile, cum_shape_B, discretize
from lobq.mc_simulator import SimConfig, horizon_for_events, replicate

TICK, K = 0.05, 80

for delta in (1.0, 16.0):
    cp = ContinuousParams(IntensityProfile("constant", 8.0), delta, 1.0)
    dp = discretize(cp, TICK, K)
    stats = replicate(SimConfig(dp, horizon=horizon_for_events(dp, 1e6), seed=7), 5).with_se_mode("batch")
    print(f"\ndelta = {delta:g}  ({stats.n_events} events over 5 replicates)")
    print("   p    simulated      formula     z")
    for k in (2, 10, 20, 40, 80):
        B = cum_shape_B(cp, k * TICK)
        z = (stats.avg_cum_depth[k - 1] - B) / stats.avg_cum_depth_se[k - 1]
        print(f"{k * TICK:5.2f} {stats.avg_cum_depth[k - 1]:11.4f} {B:12.4f} {z:6.2f}")
    ratio, se = stats.cancel_ratio(1, 10)
    print(f"cancelled share of orders in the first 10 ticks: {ratio:.4f} +- {se:.4f}")
    print(f"empty book fraction: {stats.empty_fraction:.5f}")
