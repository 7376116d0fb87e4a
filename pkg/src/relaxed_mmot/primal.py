"""Multi-marginal transport LPs on finitely supported measures.

Plans are stored on multisets rather than ordered tuples.  A multiset ``S``
carrying mass ``p`` stands for the symmetric plan spreading ``p`` evenly
over the orderings of ``S``; each coordinate marginal then puts
``p * multiplicity(a, S) / N`` on point ``a``.  Multisets repeating a
finite atom have infinite cost and are never created.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import lp as _lp
from .cost import COULOMB, INF, Kernel, interaction_matrix, multiset_cost
from .measures import DiscreteMeasure, compactify

OMEGA_INDEX = -1
MAX_ORACLE_TUPLES = 10 ** 6


class InstanceTooLarge(ValueError):
    pass


@dataclass
class TransportPlan:
    """Mass on size-N multisets of atom indices (``-1`` is OMEGA)."""

    N: int
    atoms: np.ndarray
    entries: dict
    optimal: bool = False

    def total_mass(self) -> float:
        return float(sum(self.entries.values()))

    def marginal(self) -> np.ndarray:
        """Coordinate marginal: weights on the atoms followed by the OMEGA weight."""
        K = self.atoms.shape[0]
        out = np.zeros(K + 1)
        for S, p in self.entries.items():
            for i in S:
                out[i if i >= 0 else K] += p / self.N
        return out

    def cost(self, kernel: Kernel = COULOMB) -> float:
        Kmat = interaction_matrix(self.atoms, kernel) if len(self.atoms) else np.zeros((0, 0))
        return float(sum(p * multiset_cost(S, Kmat) for S, p in self.entries.items()))

    def to_json(self) -> list:
        return [{"multiset": list(S), "mass": p} for S, p in sorted(self.entries.items())]


@dataclass
class Decomposition:
    """Layers rho_1..rho_N with ``sum (k/N) rho_k = rho``."""

    N: int
    layers: list
    layer_costs: list
    plan_costs: list = field(default_factory=list)
    certified: bool = False

    def masses(self) -> np.ndarray:
        return np.array([layer.total_mass for layer in self.layers])

    def total_cost(self) -> float:
        return float(sum(self.layer_costs))

    def recombined(self) -> np.ndarray:
        """Atom weights of ``sum (k/N) rho_k``."""
        return sum((k + 1) / self.N * layer.weights for k, layer in enumerate(self.layers))

    def to_json(self) -> dict:
        return {"N": self.N,
                "layers": [{"k": k + 1, "measure": layer.to_dict(),
                            "mass": layer.total_mass, "cost": self.layer_costs[k]}
                           for k, layer in enumerate(self.layers)],
                "total_cost": self.total_cost(),
                "certified": self.certified}


# ---------------------------------------------------------------------------
# LP construction

def _compact_multisets(K: int, N: int):
    """Multisets of size N with distinct finite atoms, padded with OMEGA."""
    for j in range(min(K, N) + 1):
        for S in itertools.combinations(range(K), j):
            yield S + (OMEGA_INDEX,) * (N - j)


def _relaxed_lp(rho: DiscreteMeasure, N: int, kernel: Kernel):
    K = len(rho)
    Kmat = interaction_matrix(rho.atoms, kernel) if K else np.zeros((0, 0))
    sets = list(_compact_multisets(K, N))
    A = np.zeros((K + 1, len(sets)))
    cost = np.empty(len(sets))
    for col, S in enumerate(sets):
        for i in S:
            A[i if i >= 0 else K, col] += 1.0 / N
        cost[col] = multiset_cost(S, Kmat)
    b = compactify(rho).weights
    return sets, cost, A, b


def _plan_from(sets, x, N, atoms, optimal):
    entries = {S: float(p) for S, p in zip(sets, x) if p > 0}
    return TransportPlan(N, np.asarray(atoms), entries, optimal)


def relaxed_cost(rho: DiscreteMeasure, N: int, kernel: Kernel = COULOMB,
                 backend: str = "simplex") -> tuple[float, TransportPlan]:
    """Relaxed N-marginal cost of a sub-probability, with an optimal plan.

    Solved as the transport problem on the atoms plus OMEGA with all
    marginals equal to the compactified measure.  Returns ``inf`` and an
    empty plan when every admissible plan would stack an atom on itself.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    sets, cost, A, b = _relaxed_lp(rho, N, kernel)
    sol = _lp.solve(_lp.LinearProgram(cost, A, b, (_lp.EQ,) * A.shape[0]),
                    backend=backend)
    if sol.status == "infeasible":
        return INF, TransportPlan(N, rho.atoms, {}, False)
    if not sol.optimal:
        raise _lp.LPError(f"relaxed cost LP ended with status {sol.status}")
    return sol.value, _plan_from(sets, sol.x, N, rho.atoms, True)


def partial_cost(mu: DiscreteMeasure, k: int, kernel: Kernel = COULOMB,
                 backend: str = "simplex") -> tuple[float, TransportPlan]:
    """k-point interaction cost of ``mu``: plans of mass ||mu|| on (R^d)^k, all marginals mu."""
    if k < 1:
        raise ValueError("k must be at least 1")
    Kn = len(mu)
    if k == 1:
        return 0.0, TransportPlan(1, mu.atoms, {(i,): float(w) for i, w in
                                                enumerate(mu.weights) if w > 0}, True)
    if mu.total_mass == 0:
        return 0.0, TransportPlan(k, mu.atoms, {}, True)
    Kmat = interaction_matrix(mu.atoms, kernel)
    sets = list(itertools.combinations(range(Kn), k))
    if not sets:
        return INF, TransportPlan(k, mu.atoms, {}, False)
    A = np.zeros((Kn, len(sets)))
    cost = np.empty(len(sets))
    for col, S in enumerate(sets):
        A[list(S), col] = 1.0 / k
        cost[col] = multiset_cost(S, Kmat)
    sol = _lp.solve(_lp.LinearProgram(cost, A, mu.weights, (_lp.EQ,) * Kn), backend=backend)
    if sol.status == "infeasible":
        return INF, TransportPlan(k, mu.atoms, {}, False)
    if not sol.optimal:
        raise _lp.LPError(f"partial cost LP ended with status {sol.status}")
    return sol.value, _plan_from(sets, sol.x, k, mu.atoms, True)


# ---------------------------------------------------------------------------
# stratification

def stratify(rho: DiscreteMeasure, plan: TransportPlan, kernel: Kernel = COULOMB,
             backend: str = "simplex") -> Decomposition:
    """Split a compactified plan into layers by number of finite points.

    A multiset with ``j`` distinct finite atoms and mass ``p`` contributes
    ``p / j`` to each of its atoms in layer ``j``.
    """
    N = plan.N
    K = len(rho)
    if plan.atoms.shape != rho.atoms.shape or not np.allclose(plan.atoms, rho.atoms, atol=1e-12):
        raise ValueError("plan and measure live on different atoms")
    w = np.zeros((N, K))
    plan_costs = np.zeros(N)
    Kmat = interaction_matrix(rho.atoms, kernel) if K else np.zeros((0, 0))
    for S, p in plan.entries.items():
        fin = [i for i in S if i >= 0]
        j = len(fin)
        if len(S) != N:
            raise ValueError(f"multiset {S} does not have {N} entries")
        if j == 0:
            continue
        w[j - 1, fin] += p / j
        plan_costs[j - 1] += p * multiset_cost(S, Kmat)
    marg = plan.marginal()[:K]
    if not np.allclose(marg, rho.weights, atol=1e-9):
        raise ValueError("plan marginal does not match the measure")
    layers, costs = [], []
    for k in range(1, N + 1):
        layer = DiscreteMeasure(rho.atoms, np.maximum(w[k - 1], 0.0), dim=rho.dim)
        layers.append(layer)
        costs.append(partial_cost(layer, k, kernel, backend)[0])
    dec = Decomposition(N, layers, costs, plan_costs.tolist())
    dec.certified = bool(plan.optimal and np.all(np.isfinite(costs))
                         and abs(sum(costs) - plan_costs.sum()) <= 1e-7)
    return dec


# ---------------------------------------------------------------------------
# vertex-enumeration oracle

def brute_force_cost(rho: DiscreteMeasure, N: int, kernel: Kernel = COULOMB) -> float:
    """Relaxed cost by enumerating every basic solution of the transport LP.

    Shares no code with the simplex: every choice of ``rank`` columns is
    solved directly and the cheapest nonnegative one wins.
    """
    K = len(rho)
    if (K + 1) ** N > MAX_ORACLE_TUPLES:
        raise InstanceTooLarge(f"(atoms+1)^N = {(K + 1) ** N} exceeds {MAX_ORACLE_TUPLES}")
    sets, cost, A, b = _relaxed_lp(rho, N, kernel)
    # keep an independent set of rows
    rows = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[rows + [i]]) == len(rows) + 1:
            rows.append(i)
    if not rows:
        return 0.0
    A_r, b_r = A[rows], b[rows]
    r = len(rows)
    n = A.shape[1]
    if comb(n, r) > 5 * 10 ** 6:
        raise InstanceTooLarge("too many candidate bases")
    best = INF
    for cols in _chunks(itertools.combinations(range(n), r), 4096):
        C = np.array(cols)
        Bs = A_r[:, C].transpose(1, 0, 2)                  # (batch, r, r)
        det = np.linalg.det(Bs)
        ok = np.abs(det) > 1e-12
        if not ok.any():
            continue
        xs = np.linalg.solve(Bs[ok], np.broadcast_to(b_r, (int(ok.sum()), r))[..., None])[..., 0]
        feas = np.all(xs >= -1e-12, axis=1)
        if not feas.any():
            continue
        Cf, xf = C[ok][feas], xs[feas]
        full = np.zeros((Cf.shape[0], n))
        np.put_along_axis(full, Cf, np.maximum(xf, 0.0), axis=1)
        resid = np.abs(full @ A.T - b).max(axis=1)
        vals = (np.maximum(xf, 0.0) * cost[Cf]).sum(axis=1)
        vals = np.where(resid <= 1e-9, vals, INF)
        best = min(best, float(vals.min()))
    return best


def _chunks(it, size):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def plan_to_json(plan: TransportPlan) -> str:
    return json.dumps(plan.to_json())
