"""Relaxed cost of three equidistant charges, primal and dual side by side."""

import numpy as np

from relaxed_mmot import DiscreteMeasure, dual_lp, relaxed_cost

# %% three points at mutual distance one
pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]])

# %% scale the uniform weights and watch the cost switch on at mass 1/3
print(f"{'mass':>6} {'primal':>10} {'dual':>10}")
for s in np.linspace(0.0, 1.0, 11):
    rho = DiscreteMeasure(pts, np.full(3, s / 3))
    p, plan = relaxed_cost(rho, 3)
    d, _ = dual_lp(rho, 3)
    print(f"{s:6.2f} {p:10.6f} {d:10.6f}")

# kinks at 1/3 (a second electron appears) and 2/3 (a third one)

# %% a single atom heavier than 1/N has to sit on itself
heavy = DiscreteMeasure([[0.0]], [0.6])
print("one atom of mass 0.6, N=2:", relaxed_cost(heavy, 2)[0])

# %% the plan itself: multisets of atom indices, -1 is the point at infinity
rho = DiscreteMeasure(pts, [0.25, 0.2, 0.15])
value, plan = relaxed_cost(rho, 3)
print("cost", value)
for S, p in sorted(plan.entries.items()):
    print("  ", S, round(p, 6))
