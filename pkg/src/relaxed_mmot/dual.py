"""Dual side: the excess functionals M_k, the gap Delta_N, the finite dual LP
and a primal-dual optimality report.

Potentials are anything with ``points`` (m, d), ``values`` (m,) and
``value_at_infinity``.  The functionals act on the part vanishing at
infinity, ``values - value_at_infinity``, and always allow OMEGA as a
candidate point (value 0, no interaction).  On a finite domain this is the
exact supremum over the compactified space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Any

import numpy as np

from . import lp as _lp
from ._excess import max_excess
from .cost import COULOMB, Kernel, interaction_matrix, multiset_cost
from .measures import DiscreteMeasure, restrict_to
from .primal import OMEGA_INDEX, _compact_multisets

MAX_DUAL_CONSTRAINTS = 10 ** 6
OPTIMALITY_TOL = 1e-6
HAS_MASS = 1e-9


@dataclass(frozen=True)
class DualPotential:
    """Values on a finite set of points plus a value at OMEGA."""

    points: np.ndarray
    values: np.ndarray
    value_at_infinity: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != pts.shape[0]:
            raise ValueError("one value per point is required")
        if not (np.all(np.isfinite(vals)) and np.isfinite(self.value_at_infinity)):
            raise ValueError("potential values must be finite")
        for name, arr in (("points", pts), ("values", vals)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "value_at_infinity", float(self.value_at_infinity))

    def with_values(self, values, value_at_infinity: float = 0.0) -> "DualPotential":
        return DualPotential(self.points, values, value_at_infinity)

    def to_json(self) -> dict:
        vals = {str(i): float(v) for i, v in enumerate(self.values)}
        vals["omega"] = self.value_at_infinity
        return {"points": self.points.tolist(), "values": vals}

    @classmethod
    def from_json(cls, data: Any) -> "DualPotential":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        vals = dict(data["values"])
        omega = float(vals.pop("omega", 0.0))
        idx = sorted(int(k) for k in vals)
        if idx != list(range(len(idx))):
            raise ValueError("potential indices must be 0..m-1")
        return cls(np.asarray(data["points"], dtype=float),
                   [float(vals[str(i)]) for i in idx], omega)


# ---------------------------------------------------------------------------
# helpers shared with the potential and quantize modules

@lru_cache(maxsize=16)
def _cached_matrix(key: bytes, shape: tuple, tag: str, kernel: Kernel) -> np.ndarray:
    K = interaction_matrix(np.frombuffer(key).reshape(shape), kernel)
    K.setflags(write=False)
    return K


def domain_matrix(phi, kernel: Kernel = COULOMB) -> np.ndarray:
    pts = np.ascontiguousarray(phi.points, dtype=float)
    return _cached_matrix(pts.tobytes(), pts.shape, kernel.tag, kernel)


def c0_part(phi) -> np.ndarray:
    return np.asarray(phi.values, dtype=float) - phi.value_at_infinity


# ---------------------------------------------------------------------------
# functionals

def M_k(phi, k: int, kernel: Kernel = COULOMB) -> float:
    """``max (1/k) sum phi - c_k`` over k-multisets of the domain and OMEGA."""
    if k == 0:
        raise ValueError("M_0 is only defined for the zero potential (as 0)")
    return max_excess(c0_part(phi), domain_matrix(phi, kernel), k)[0]


def M_k_argmax(phi, k: int, kernel: Kernel = COULOMB) -> tuple[float, tuple]:
    """Value of ``M_k`` and the indices of the finite points of a maximiser."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return max_excess(c0_part(phi), domain_matrix(phi, kernel), k)


def ladder(phi, N: int, kernel: Kernel = COULOMB) -> np.ndarray:
    """``[M_k(k phi / N) for k = 0..N]`` with ``M_0 = 0``."""
    v = c0_part(phi)
    K = domain_matrix(phi, kernel)
    return np.array([0.0] + [max_excess(k * v / N, K, k)[0] for k in range(1, N + 1)])


def delta_N(phi, N: int, kernel: Kernel = COULOMB) -> float:
    if N < 2:
        raise ValueError("N must be at least 2")
    v = c0_part(phi)
    K = domain_matrix(phi, kernel)
    return max_excess(v, K, N)[0] - max_excess((N - 1) * v / N, K, N - 1)[0]


def positive_part(phi):
    """Positive part of the potential's part vanishing at infinity."""
    return phi.with_values(np.maximum(c0_part(phi), 0.0), 0.0)


def _measure_indices(phi, rho: DiscreteMeasure) -> np.ndarray:
    return restrict_to(phi.points, rho)


def dual_objective(phi, rho: DiscreteMeasure, N: int, kernel: Kernel = COULOMB) -> float:
    """``int phi drho - M_N(phi)`` with phi taken relative to its value at OMEGA."""
    idx = _measure_indices(phi, rho)
    return float(rho.weights @ c0_part(phi)[idx]) - M_k(phi, N, kernel)


def dual_energy(psi, rho: DiscreteMeasure) -> float:
    """``int psi drho + (1 - ||rho||) psi(OMEGA)`` for an admissible psi."""
    idx = _measure_indices(psi, rho)
    return (float(rho.weights @ np.asarray(psi.values)[idx])
            + (1.0 - rho.total_mass) * psi.value_at_infinity)


# ---------------------------------------------------------------------------
# finite dual LP

def dual_lp(rho: DiscreteMeasure, N: int, kernel: Kernel = COULOMB,
            backend: str = "simplex") -> tuple[float, DualPotential]:
    """Maximise ``sum w_i y_i + (1 - ||rho||) y_omega`` under one constraint per
    finite-cost N-multiset of the support and OMEGA."""
    if N < 2:
        raise ValueError("N must be at least 2")
    K = len(rho)
    if comb(K + N, N) > MAX_DUAL_CONSTRAINTS:
        raise ValueError(f"C({K}+{N},{N}) multisets exceed {MAX_DUAL_CONSTRAINTS}")
    Kmat = interaction_matrix(rho.atoms, kernel) if K else np.zeros((0, 0))
    rows, rhs = [], []
    for S in _compact_multisets(K, N):
        row = np.zeros(K + 1)
        for i in S:
            row[i if i != OMEGA_INDEX else K] += 1.0 / N
        rows.append(row)
        rhs.append(multiset_cost(S, Kmat))
    obj = np.append(rho.weights, max(0.0, 1.0 - rho.total_mass))
    prob = _lp.LinearProgram(obj, np.array(rows), np.array(rhs), (_lp.LE,) * len(rows),
                             sense="max", lb=np.full(K + 1, -np.inf))
    sol = _lp.solve(prob, backend=backend)
    if sol.status == "unbounded":
        # dual unbounded <=> primal infeasible
        return float("inf"), DualPotential(rho.atoms.reshape(K, rho.dim), np.zeros(K), 0.0)
    if not sol.optimal:
        raise _lp.LPError(f"dual LP ended with status {sol.status}")
    y = sol.x
    return sol.value, DualPotential(rho.atoms.reshape(K, rho.dim), y[:K], float(y[K]))


# ---------------------------------------------------------------------------
# optimality report

@dataclass
class OptimalityReport:
    mass_deficit: float
    layer_gaps: list
    ladder_gaps: list
    total: float
    primal_value: float
    dual_value: float
    passed: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"term_i": self.mass_deficit, "term_ii": self.layer_gaps,
                "term_iii": self.ladder_gaps, "total": self.total,
                "primal_value": self.primal_value, "dual_value": self.dual_value,
                "passed": self.passed, "notes": self.notes}


def check_optimality(rho: DiscreteMeasure, decomposition, phi, N: int,
                     kernel: Kernel = COULOMB, tol: float = OPTIMALITY_TOL) -> OptimalityReport:
    """Split ``C(rho) - I_N(phi)`` into three nonnegative pieces.

    * term i: ``1 - sum ||rho_k||``
    * term ii: per layer, ``C_k(rho_k) - int (k phi/N) drho_k + M_k(k phi/N) ||rho_k||``
    * term iii: per layer with mass, ``M_N(phi) - M_k(k phi/N)``

    The total is ``M_N(phi) * i + sum ii + sum ||rho_k|| * iii``.
    """
    notes = []
    if rho.total_mass <= 1.0 / N:
        notes.append("mass at most 1/N: the conditions need not hold")
    v = c0_part(phi)
    idx = _measure_indices(phi, rho)
    lad = ladder(phi, N, kernel)
    masses = np.array([layer.total_mass for layer in decomposition.layers])
    deficit = 1.0 - float(masses.sum())
    layer_gaps, ladder_gaps = [], []
    weighted = 0.0
    for k in range(1, N + 1):
        layer = decomposition.layers[k - 1]
        cost_k = decomposition.layer_costs[k - 1]
        gap = cost_k - (k / N) * float(layer.weights @ v[idx]) + lad[k] * masses[k - 1]
        layer_gaps.append(float(gap))
        if masses[k - 1] > HAS_MASS:
            ladder_gaps.append(float(lad[N] - lad[k]))
            weighted += masses[k - 1] * (lad[N] - lad[k])
        else:
            ladder_gaps.append(0.0)
    total = lad[N] * deficit + sum(layer_gaps) + weighted
    primal = float(sum(decomposition.layer_costs))
    dual = float(rho.weights @ v[idx]) - lad[N]
    passed = bool(abs(deficit) <= tol and max(np.abs(layer_gaps)) <= tol
                  and max(ladder_gaps) <= tol and abs(total) <= tol)
    return OptimalityReport(deficit, layer_gaps, ladder_gaps, float(total),
                            primal, dual, passed, notes)
