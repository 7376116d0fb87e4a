"""Relaxed multi-marginal optimal transport with repulsive costs."""

from .cost import COULOMB, Kernel, c_k, c_tilde, kernel_from_tag, pair_cost, power_kernel
from .dual import (DualPotential, M_k, check_optimality, delta_N, dual_energy, dual_lp,
                   dual_objective, ladder, positive_part)
from .lp import LinearProgram, LpSolution, certify, solve
from .measures import (OMEGA, CompactifiedMeasure, DiscreteMeasure, MeasureError, compactify,
                       concentration, measure_from_json, variance)
from .potential import (GridFunction, M_N_profile, ball_potential, check_admissible, gamma_N,
                        hat, iterate_potential, truncate_at_infinity)
from .primal import (Decomposition, TransportPlan, brute_force_cost, partial_cost,
                     relaxed_cost, stratify)
from .quantize import (QuantizationReport, beta_estimate, charge_sweep, k_N, minimize,
                       nonexistence_bound, strict_gap)

__all__ = [name for name in dir() if not name.startswith("_")]
