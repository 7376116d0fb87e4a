"""Smooth a spiky optimal dual potential into a Lipschitz one on a 1-D grid."""

import numpy as np

from relaxed_mmot import DiscreteMeasure, GridFunction, check_admissible, dual_lp, iterate_potential

grid = GridFunction.zeros([(-4.0, 4.0)], [128])
x = grid.points[:, 0]

# %% three charges sitting on grid nodes, total mass 0.8
idx = [np.argmin(np.abs(x - a)) for a in (-1.5, 0.0, 1.2)]
rho = DiscreteMeasure(grid.points[idx], [0.3, 0.3, 0.2])
target, start = dual_lp(rho, 2)

# %% averaged regularisation starting from the LP optimum
res = iterate_potential(rho, N=2, grid=grid, tol=1e-8)
print("converged:", res.converged, "after", len(res.trace) - 1, "steps")
print("dual LP value", target, " final I_N", res.I_N)
print("Lipschitz", res.lipschitz, "<= bound", res.lipschitz_bound)

for row in res.trace[:: max(1, len(res.trace) // 6)]:
    print(f"  step {row.iteration:3d}  I_N {row.I_N:.10f}  Delta_N {row.delta_N:.1e}  "
          f"move {row.step:.1e}  sup {row.sup_u:.4f}")

# I_N stays at the optimum while the spikes of the LP start flatten out

# %% shifted form is admissible: (1/N) sum psi <= cost on every pair
adm = check_admissible(res.admissible_form(), 2)
print("admissible:", adm.admissible, "max violation", adm.max_violation)

# %% coarse picture of the potential
vals = res.potential.values
for i in range(0, len(x), 8):
    print(f"{x[i]:6.2f} " + "#" * int(40 * vals[i] / vals.max()))
