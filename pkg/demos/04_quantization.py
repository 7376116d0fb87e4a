"""Minimal mass of minimisers under an attracting potential, and a charge sweep."""

import numpy as np

from relaxed_mmot import DualPotential, charge_sweep, k_N, minimize, nonexistence_bound

# %% two wells of depth h at distance L
def wells(h, L=1.0):
    return DualPotential([[0.0], [L]], [h, h])

for h in (1.0, 4.0):
    rep = k_N(wells(h), 2)
    print(f"h={h}: ladder {rep.ladder}  minimal mass {rep.minimal_mass}")

# shallow wells keep one electron, deep ones bind both

# %% sweep the charge Z; the jump sits at Z = 2/(hL)
h, L = 2.0, 1.0
rows, drops = charge_sweep(wells(h, L), 2, np.linspace(0.2, 3.0, 15))
for r in rows:
    print(f"Z={r.Z:5.2f}  mass {r.mass}")
print("expected jump at", 2 / (h * L), "drops:", drops)

# %% a weak potential cannot hold a full probability
rng = np.random.default_rng(1)
pts = rng.uniform(-1, 1, size=(4, 2))
V = DualPotential(pts, rng.uniform(0.5, 1.5, size=4))
t_star = nonexistence_bound(V, float(np.linalg.norm(pts, axis=1).max()), 3)
value, witness = minimize(V.with_values(0.5 * t_star * V.values, 0.0), 3)
print("t_* =", t_star, " witness mass at t_*/2:", witness.total_mass)
