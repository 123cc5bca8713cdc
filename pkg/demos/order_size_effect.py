"""Geometric order sizes on a flat, capped profile with fixed mean volume.

Smaller q means fewer but larger orders; total submitted volume per unit
price is held at alpha / K. Run: python3 demos/order_size_effect.py
"""

from lobq.bulk_book import cum_shape_continuous_geometric, shape_continuous_geometric
from lobq.continuous_book import ContinuousParams, IntensityProfile

ALPHA, CAP, MU = 40.0, 8.0, 10.0

print("   q      B(1)      B(4)      b(1)")
for q in (0.99, 0.5, 0.25, 0.1, 0.05):
    cp = ContinuousParams(IntensityProfile("constant", ALPHA / (CAP * q), support_cap=CAP), MU, 1.0)
    B1 = cum_shape_continuous_geometric(cp, q, 1.0)
    B4 = cum_shape_continuous_geometric(cp, q, 4.0)
    print(f"{q:5.2f} {B1:9.3f} {B4:9.3f} {shape_continuous_geometric(cp, q, 1.0):9.3f}")
