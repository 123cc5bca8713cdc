"""Queueing shape against the diffusive-price reference for an exponential profile.

Prints the two calibrated curves and their peaks under both sigma conventions.
Run: python3 demos/diffusive_overlay.py
"""

import numpy as np

from lobq.bp_reference import BPParams, bp_curve, bp_shape, calibrate_scale, find_peak, proxy_D
from lobq.continuous_book import ContinuousParams, IntensityProfile, shape_b, shape_curve

cp = ContinuousParams(IntensityProfile("exponential", 40.0, beta=0.5), 10.0, 1.0)
grid = np.linspace(0.0, 10.0, 401)
model = shape_curve(cp, grid)
D = proxy_D(cp)
p_model, _ = find_peak(grid, model.b, lambda p: shape_b(cp, p))
print(f"D = {D:.4f} (price std), model peak at p = {p_model:.3f}")

for form in ("stated", "reciprocal"):
    unit = BPParams(cp.profile, D, cp.theta, sigma_form=form)
    bpp = BPParams(cp.profile, D, cp.theta, calibrate_scale(unit, model), form)
    p_ref, _ = find_peak(grid, bp_curve(bpp, grid), lambda p: bp_shape(bpp, p))
    print(f"{form:>10}: sigma = {bpp.sigma:.4f}, reference peak at p = {p_ref:.3f} "
          f"({100 * abs(p_ref - p_model) / p_model:.0f}% from the model)")

ref = bp_curve(BPParams(cp.profile, D, cp.theta, calibrate_scale(BPParams(cp.profile, D, cp.theta), model)), grid)
print("\n   p     model      reference")
for i in range(0, 401, 40):
    print(f"{grid[i]:5.2f} {model.b[i]:9.4f} {ref[i]:12.4f}")
