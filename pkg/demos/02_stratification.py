"""Split an optimal plan into k-electron layers and check the bookkeeping."""

import numpy as np

from relaxed_mmot import DiscreteMeasure, partial_cost, relaxed_cost, stratify

rng = np.random.default_rng(0)
N = 3
rho = DiscreteMeasure(rng.normal(size=(4, 2)), [0.25, 0.2, 0.2, 0.15])
value, plan = relaxed_cost(rho, N)
dec = stratify(rho, plan)

# %% one layer per number of electrons at finite positions
for k, layer in enumerate(dec.layers, start=1):
    c = partial_cost(layer, k)[0] if k > 1 and layer.total_mass > 0 else 0.0
    print(f"k={k}: mass {layer.total_mass:.4f}  cost {c:.6f}")

# %% layers recombine to rho, their costs add up, their masses sum to one
print("relaxed cost      ", value)
print("sum of layer costs", dec.total_cost())
print("recombination err ", np.abs(dec.recombined() - rho.weights).max())
print("sum of masses     ", dec.masses().sum())

# below mass 1/N only one-electron layers appear and the masses sum to N*mass
small = rho.scaled(0.3 / rho.total_mass)
print("small measure:", stratify(small, relaxed_cost(small, N)[1]).masses())
