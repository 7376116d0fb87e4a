"""Minimisers of ``C(rho) - int V drho`` over sub-probabilities and their mass.

On a finite domain the problem is linear over plans, so its value is
``-M_N(V)`` and it is attained by single multisets.  The smallest mass of a
minimiser is ``k/N`` where ``k`` is the last strict rise of the ladder
``k -> M_k(k V / N)``.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._excess import max_excess
from .cost import COULOMB, Kernel
from .dual import c0_part, domain_matrix
from .measures import DiscreteMeasure, variance

GAP_TOL = 1e-8


def _values(V) -> np.ndarray:
    if V.value_at_infinity != 0.0:
        raise ValueError("V must vanish at OMEGA")
    return c0_part(V)


def _witness(V, idx, N: int) -> DiscreteMeasure:
    pts = np.asarray(V.points, dtype=float)
    dim = pts.shape[1]
    if not idx:
        return DiscreteMeasure.zero(dim)
    return DiscreteMeasure(pts[list(idx)], np.full(len(idx), 1.0 / N), dim=dim)


def minimize(V, N: int, kernel: Kernel = COULOMB) -> tuple[float, DiscreteMeasure]:
    """Minimum value ``-M_N(V)`` and a minimiser putting ``1/N`` on each point of a best multiset."""
    v = _values(V)
    val, idx = max_excess(v, domain_matrix(V, kernel), N)
    return -val, _witness(V, idx, N)


@dataclass
class QuantizationReport:
    N: int
    k_N: int
    minimal_mass: Fraction
    ladder: list
    min_value: float
    witness_rho: DiscreteMeasure
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"N": self.N, "k_N": self.k_N,
                "minimal_mass": f"{self.minimal_mass.numerator}/{self.minimal_mass.denominator}",
                "minimal_mass_float": float(self.minimal_mass),
                "ladder": list(self.ladder), "min_value": self.min_value,
                "witness": self.witness_rho.to_dict(), "diagnostics": self.diagnostics}


def k_N(V, N: int, kernel: Kernel = COULOMB, gap_tol: float = GAP_TOL) -> QuantizationReport:
    v = _values(V)
    K = domain_matrix(V, kernel)
    steps = [(0.0, ())] + [max_excess(k * v / N, K, k) for k in range(1, N + 1)]
    lad = [s[0] for s in steps]
    k = 0
    for j in range(1, N + 1):
        if lad[j] > lad[j - 1] + gap_tol:
            k = j
    idx = steps[k][1]
    witness = _witness(V, idx, N)
    diag = {"strict_gap": bool(lad[N] > lad[N - 1] + gap_tol),
            "ladder_monotone": bool(all(b >= a - 1e-10 for a, b in zip(lad, lad[1:])))}
    return QuantizationReport(N, k, Fraction(k, N), lad, -lad[N], witness, diag)


def strict_gap(V, N: int, kernel: Kernel = COULOMB,
               gap_tol: float = GAP_TOL) -> tuple[bool, np.ndarray | None]:
    """Whether ``M_N(V)`` beats ``M_{N-1}((N-1)V/N)``; if so, the N maximising points."""
    v = _values(V)
    K = domain_matrix(V, kernel)
    top, idx = max_excess(v, K, N)
    below = max_excess((N - 1) * v / N, K, N - 1)[0]
    if top > below + gap_tol:
        return True, np.asarray(V.points)[list(idx)]
    return False, None


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepRow:
    Z: float
    k_N: int
    mass: Fraction
    min_value: float


class MonotonicityViolation(RuntimeError):
    pass


def charge_sweep(V, N: int, Z_grid, kernel: Kernel = COULOMB, gap_tol: float = GAP_TOL,
                 workers: int = 1) -> tuple[list, list]:
    """Minimal mass of ``Z V`` along ``Z_grid``.

    Returns the rows and a list of places where the mass dropped.  For
    ``N = 2`` a drop raises :class:`MonotonicityViolation`.
    """
    Z = [float(z) for z in Z_grid]
    if any(b < a for a, b in zip(Z, Z[1:])):
        raise ValueError("Z_grid must be sorted ascending")

    def one(z):
        rep = k_N(V.with_values(z * np.asarray(V.values), 0.0), N, kernel, gap_tol)
        return SweepRow(z, rep.k_N, rep.minimal_mass, rep.min_value)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, Z))
    else:
        rows = [one(z) for z in Z]
    drops = [(a.Z, b.Z) for a, b in zip(rows, rows[1:]) if b.mass < a.mass]
    if drops and N == 2:
        raise MonotonicityViolation(f"mass decreased between Z values {drops[0]}")
    return rows, drops


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Z", "k_N", "mass", "min_value"])
    for r in rows:
        w.writerow([f"{r.Z:.17g}", r.k_N, f"{float(r.mass):.17g}", f"{r.min_value:.17g}"])
    return buf.getvalue()


def strict_gap_threshold(V, N: int, Z_grid, kernel: Kernel = COULOMB,
                         gap_tol: float = GAP_TOL) -> float | None:
    """Smallest Z on the grid from which on every ``Z V`` has the strict gap."""
    found = None
    for z in sorted(float(z) for z in Z_grid):
        ok = strict_gap(V.with_values(z * np.asarray(V.values), 0.0), N, kernel, gap_tol)[0]
        if ok and found is None:
            found = z
        elif not ok:
            found = None
    return found


# ---------------------------------------------------------------------------
# existence diagnostics

def nonexistence_bound(V, R_support: float, N: int) -> float:
    """Below ``t_* = N^2 / (4 R sup V)`` no probability minimises ``C - t int V``."""
    sup_v = float(np.max(V.values)) if hasattr(V, "values") else float(np.max(V))
    if sup_v <= 0:
        raise ValueError("sup V must be positive")
    if R_support <= 0:
        raise ValueError("support radius must be positive")
    return N ** 2 / (4.0 * R_support * sup_v)


def variance_bound(rho: DiscreteMeasure, N: int) -> float:
    """Lower bound ``N(N-1) / (4 sqrt(Var rho))`` on the cost of a probability."""
    return N * (N - 1) / (4.0 * np.sqrt(variance(rho)))


@dataclass
class BetaEstimate:
    value: float
    per_radius: list
    threshold: float
    fast_decay_flag: bool
    surrogate: bool = True

    def to_json(self) -> dict:
        return {"value": self.value, "per_radius": self.per_radius,
                "threshold": self.threshold, "flag": self.fast_decay_flag,
                "surrogate": self.surrogate}


def beta_estimate(V, sample_radii, N: int) -> BetaEstimate:
    """Finite-radius stand-in for ``limsup |x| V(x)``: the max over shells."""
    pts = np.asarray(V.points, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    width = float(np.max(V.spacing)) if hasattr(V, "spacing") else 1e-9
    vals = c0_part(V)
    per = []
    for rad in sample_radii:
        shell = np.abs(r - rad) <= width / 2 + 1e-12
        if not shell.any():
            raise ValueError(f"no domain point at radius {rad}")
        per.append(float((r[shell] * vals[shell]).max()))
    est = max(per) if per else 0.0
    thr = float(N * (N - 1))
    return BetaEstimate(est, per, thr, est > thr)


# ---------------------------------------------------------------------------
# enumeration oracle

def minimal_mass_bruteforce(V, N: int, kernel: Kernel = COULOMB,
                            tol: float = GAP_TOL) -> tuple[float, Fraction]:
    """``(M_N(V), smallest j/N)`` over every N-multiset of the domain and OMEGA attaining it."""
    v = _values(V)
    K = domain_matrix(V, kernel)
    m = v.shape[0]
    scores = []
    for j in range(0, min(m, N) + 1):
        for T in itertools.combinations(range(m), j):
            s = v[list(T)].sum() / N - sum(K[a, b] for a, b in itertools.combinations(T, 2))
            scores.append((s, j))
    best = max(s for s, _ in scores)
    j_min = min(j for s, j in scores if s >= best - tol)
    return best, Fraction(j_min, N)
