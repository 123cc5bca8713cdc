"""Flat limit order profile: how the market order rate thins the book near the bid.

Run: python3 demos/flat_profile_shapes.py
"""

import numpy as np

from lobq.continuous_book import ContinuousParams, IntensityProfile, shape_curve, characteristic_scaling

ALPHA = 8.0
grid = np.linspace(0.0, 4.0, 9)

print("shape b(p) for alpha = 8, theta = 1")
print("p      " + "".join(f"{p:>9.2f}" for p in grid))
for delta in (1.0, 2.0, 6.0, 16.0):
    cp = ContinuousParams(IntensityProfile("constant", ALPHA), delta, 1.0)
    b = shape_curve(cp, grid).b
    print(f"d={delta:<5g}" + "".join(f"{v:9.4f}" for v in b))
    assert abs(b[0] - ALPHA / (1.0 + delta)) < 1e-12

# Same curves in characteristic units: the busier book catches up faster.
x = np.array([0.5, 1.0, 2.0, 4.0])
print("\nscaled depth b/(alpha/theta) at scaled price p/(mu/alpha)")
for delta in (1.0, 16.0):
    cp = ContinuousParams(IntensityProfile("constant", ALPHA), delta, 1.0)
    pc, dc = characteristic_scaling(cp)
    print(f"d={delta:<5g}" + "".join(f"{v:9.4f}" for v in shape_curve(cp, x * pc).b / dc))
