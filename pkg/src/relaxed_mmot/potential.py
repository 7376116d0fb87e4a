"""Lipschitz dual potentials on uniform grids.

The regularisation ``phi -> hat(phi)`` and the averaged iteration
``u_{n+1} = hat(u_n)/N + (N-1) u_n / N`` are run on grid nodes with OMEGA as
an extra candidate point.  On this augmented domain the identities

    M_N(u_{n+1}) = M_{N-1}((N-1) u_n / N)
    I_N(u_{n+1}) >= I_N(u_n) + (1 - ||rho||) Delta_N(u_n)
    u_{n+1} >= u_n - Delta_N(u_n)

hold exactly, so every step is checked against them.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from math import comb
from typing import Any, Sequence

import numpy as np

from ._excess import NEG, dense_max, dense_tuple_values, max_excess, profile
from .cost import COULOMB, Kernel, interaction_matrix
from .dual import c0_part, domain_matrix, dual_lp
from .measures import DiscreteMeasure, MeasureError, restrict_to
from .primal import relaxed_cost

INVARIANT_TOL = 1e-9
HAT_AGREEMENT_TOL = 1e-10
DEFAULT_ADMISSIBLE_BUDGET = 5 * 10 ** 6


class InvariantViolation(AssertionError):
    """An identity that must hold exactly on the grid failed its tolerance."""


@dataclass(frozen=True)
class GridFunction:
    """Values on a uniform box grid (row-major) and a value at OMEGA."""

    box: tuple
    shape: tuple
    values: np.ndarray
    value_at_infinity: float = 0.0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        shape = tuple(int(s) for s in self.shape)
        if len(box) != len(shape) or not box:
            raise ValueError("box and shape must have one entry per axis")
        if any(s < 2 for s in shape):
            raise ValueError("at least two nodes per axis are required")
        if any(hi <= lo for lo, hi in box):
            raise ValueError("box bounds must satisfy lo < hi")
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} values, got {vals.shape[0]}")
        if not (np.all(np.isfinite(vals)) and np.isfinite(self.value_at_infinity)):
            raise ValueError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "value_at_infinity", float(self.value_at_infinity))

    @classmethod
    def zeros(cls, box: Sequence, shape: Sequence) -> "GridFunction":
        return cls(box, shape, np.zeros(int(np.prod(shape))), 0.0)

    @classmethod
    def from_function(cls, box, shape, f, value_at_infinity: float = 0.0) -> "GridFunction":
        g = cls.zeros(box, shape)
        return g.with_values(np.array([f(p) for p in g.points], dtype=float),
                             value_at_infinity)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (s - 1) for (lo, hi), s in zip(self.box, self.shape)])

    def axes(self) -> list:
        return [np.linspace(lo, hi, s) for (lo, hi), s in zip(self.box, self.shape)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def points(self) -> np.ndarray:
        pts = self.__dict__.get("_points")
        if pts is None:
            pts = self.nodes()
            pts.setflags(write=False)
            object.__setattr__(self, "_points", pts)
        return pts

    def with_values(self, values, value_at_infinity: float = 0.0) -> "GridFunction":
        return GridFunction(self.box, self.shape, values, value_at_infinity)

    def lipschitz_constant(self) -> float:
        """Largest ``|difference| / spacing`` over axis-neighbour pairs."""
        v = self.values.reshape(self.shape)
        h = self.spacing
        return float(max(np.abs(np.diff(v, axis=a)).max() / h[a] for a in range(self.dim)))

    def to_json(self) -> dict:
        return {"box": [list(b) for b in self.box], "shape": list(self.shape),
                "values": self.values.tolist(),
                "value_at_infinity": self.value_at_infinity}

    @classmethod
    def from_json(cls, data: Any) -> "GridFunction":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        return cls(data["box"], data["shape"], data["values"],
                   data.get("value_at_infinity", 0.0))


def gamma_N(R: float, N: int) -> float:
    """Lipschitz bound for the regularised potential of any ``phi <= R``."""
    if R <= 0 or N < 2:
        raise ValueError("need R > 0 and N >= 2")
    return 16.0 * (N - 1) * (1.0 + (N - 1) * R) ** 2 / (9.0 * N)


# ---------------------------------------------------------------------------
# profile and regularisation

def M_N_profile(phi: GridFunction, N: int, kernel: Kernel = COULOMB) -> GridFunction:
    """Per node x, the best ``(1/N) sum phi - c_N`` over tuples starting at x."""
    if N < 2:
        raise ValueError("N must be at least 2")
    v = c0_part(phi)
    K = domain_matrix(phi, kernel)
    prof = profile(v, K, N)
    at_inf = max_excess((N - 1) * v / N, K, N - 1)[0]
    return phi.with_values(prof, at_inf)


def _hat_from_profile(v: np.ndarray, prof: np.ndarray, m_lower: float, N: int) -> np.ndarray:
    return v + N * (m_lower - prof)


def _hat_by_partners(v: np.ndarray, K: np.ndarray, N: int, chunk: int = 16) -> np.ndarray:
    """Infimum formula over partner multisets, evaluated by dense enumeration."""
    m = v.shape[0]
    r = N - 1
    Ka = np.zeros((m, m + 1))
    Ka[:, :m] = K
    best = np.full(m, NEG)
    # (1/N) sum_T phi - c(T) - sum_{t in T} K[x, t], maximised over T
    for prefix, arr in dense_tuple_values(v, K, r, 1.0 / N):
        pre = Ka[:, list(prefix)].sum(axis=1) if prefix else np.zeros(m)
        if r == 1:
            best = np.maximum(best, (arr[None, :] - Ka - pre[:, None]).max(axis=1))
            continue
        for s in range(0, m, chunk):
            Ks = Ka[s:s + chunk]
            tot = arr[None] - Ks[:, :, None] - Ks[:, None, :] - pre[s:s + chunk, None, None]
            best[s:s + chunk] = np.maximum(best[s:s + chunk],
                                           tot.reshape(tot.shape[0], -1).max(axis=1))
    m_lower = dense_max(v, K, r, 1.0 / N)
    return -N * best + N * m_lower


def hat(phi: GridFunction, N: int, kernel: Kernel = COULOMB,
        cross_check: bool = False) -> GridFunction:
    """Regularised potential; its value at OMEGA is 0.

    With ``cross_check`` the infimum formula is evaluated independently and
    must agree within ``HAT_AGREEMENT_TOL``.
    """
    v = c0_part(phi)
    K = domain_matrix(phi, kernel)
    prof = profile(v, K, N)
    m_lower = max_excess((N - 1) * v / N, K, N - 1)[0]
    out = _hat_from_profile(v, prof, m_lower, N)
    if cross_check:
        other = _hat_by_partners(v, K, N)
        err = float(np.abs(out - other).max())
        if err > HAT_AGREEMENT_TOL:
            raise InvariantViolation(f"hat formulas disagree by {err:.3e}")
    return phi.with_values(out, 0.0)


# ---------------------------------------------------------------------------
# iteration

@dataclass
class TraceRow:
    iteration: int
    I_N: float
    delta_N: float
    sup_u: float
    M_N: float
    step: float


@dataclass
class IterationResult:
    potential: GridFunction          # positive part of the limit, zero at OMEGA
    trace: list
    converged: bool
    R: float
    I_N: float
    lipschitz: float
    lipschitz_bound: float
    checks: dict = field(default_factory=dict)

    def admissible_form(self) -> GridFunction:
        """Shift by ``M_N`` so that ``(1/N) sum psi <= c`` on grid and OMEGA."""
        mn = self.checks["final_M_N"]
        return self.potential.with_values(self.potential.values - mn, -mn)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "I_N", "Delta_N", "sup_u", "M_N"])
        for row in self.trace:
            w.writerow([row.iteration, f"{row.I_N:.17g}", f"{row.delta_N:.17g}",
                        f"{row.sup_u:.17g}", f"{row.M_N:.17g}"])
        return buf.getvalue()


def node_weights(rho, grid: GridFunction) -> np.ndarray:
    """Weights of ``rho`` per grid node; raises if an atom is off the grid."""
    if isinstance(rho, DiscreteMeasure):
        idx = restrict_to(grid.points, rho)
        w = np.zeros(grid.points.shape[0])
        np.add.at(w, idx, rho.weights)
        return w
    w = np.asarray(rho, dtype=float).reshape(-1)
    if w.shape[0] != grid.points.shape[0]:
        raise MeasureError("one weight per grid node is required")
    if np.any(w < 0) or w.sum() > 1 + 1e-12:
        raise MeasureError("node weights must be a sub-probability")
    return w


def step_one_radius(rho: DiscreteMeasure, N: int, kernel: Kernel = COULOMB,
                    delta: float = 0.1) -> float:
    """Upper bound on ``sup phi`` over near-optimal nonnegative potentials.

    Uses ``sup phi <= N M_N(phi)`` and the cost of the scaled measure
    ``(1 + delta) rho``; ``delta`` is halved until that cost is finite.
    Returns ``nan`` if no finite scaling is found.
    """
    mass = rho.total_mass
    if mass <= 0:
        return float("nan")
    base = relaxed_cost(rho, N, kernel)[0]
    d = min(delta, 1.0 / mass - 1.0)
    for _ in range(30):
        if d <= 0:
            break
        bigger = relaxed_cost(rho.scaled(1.0 + d), N, kernel)[0]
        if np.isfinite(bigger):
            return max(N * (bigger - (1.0 + d) * base) / d, 0.0)
        d /= 2
    return float("nan")


def dual_lp_start(rho: DiscreteMeasure, grid: GridFunction, N: int,
                  kernel: Kernel = COULOMB, R: float | None = None) -> GridFunction:
    """Dual-LP potential at the atoms (relative to OMEGA), clamped to ``[0, R]``, zero elsewhere."""
    _, u = dual_lp(rho, N, kernel)
    phi = u.values - u.value_at_infinity
    if R is not None and np.isfinite(R):
        phi = np.clip(phi, 0.0, R)
    else:
        phi = np.maximum(phi, 0.0)
    vals = np.zeros(grid.points.shape[0])
    vals[restrict_to(grid.points, rho)] = phi
    return grid.with_values(vals, 0.0)


def _sum_excess(v, K, N):
    return max_excess(v, K, N)[0]


def iterate_potential(rho, phi0: GridFunction | None = None, N: int = 2,
                      kernel: Kernel = COULOMB, tol: float = 1e-6, max_iters: int = 500,
                      grid: GridFunction | None = None, step_tol: float | None = None,
                      cross_check: bool = False, strict: bool = True) -> IterationResult:
    """Run the averaged regularisation until the gap and the step both fall below tolerance.

    ``rho`` is a measure with atoms on grid nodes or an array of node weights.
    When ``phi0`` is omitted the dual-LP start on ``grid`` is used.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    template = phi0 if phi0 is not None else grid
    if template is None:
        raise ValueError("either phi0 or grid is required")
    w = node_weights(rho, template)
    mass = float(w.sum())
    if mass >= 1.0:
        raise MeasureError("the iteration needs total mass below 1 "
                           f"(got {mass:.17g}); use the dual LP for probabilities")
    keep = w > 0
    measure = DiscreteMeasure(template.points[keep], w[keep], dim=template.dim)
    R = step_one_radius(measure, N, kernel) if mass > 0 else float("nan")
    if phi0 is None:
        phi0 = dual_lp_start(measure, template, N, kernel, R)
    if phi0.value_at_infinity != 0.0 or np.any(phi0.values < 0):
        raise ValueError("phi0 must be nonnegative and vanish at OMEGA")
    sup0 = float(phi0.values.max())
    if not np.isfinite(R):
        R = N * sup0
    R = max(R, sup0)
    step_tol = tol if step_tol is None else step_tol

    K = domain_matrix(template, kernel)
    u = np.array(phi0.values, dtype=float)
    history, trace = [], []
    violations = {"identity2": 0.0, "energy": 0.0, "bounds": 0.0, "uniform": 0.0}
    prev = None
    converged = False
    M_N0 = None
    for n in range(max_iters + 1):
        prof = profile(u, K, N)
        m_lower = max_excess((N - 1) * u / N, K, N - 1)[0]
        m_n = max(float(prof.max()), m_lower)
        gap = m_n - m_lower
        I_n = float(w @ u) - m_n
        u_hat = _hat_from_profile(u, prof, m_lower, N)
        if cross_check:
            err = float(np.abs(u_hat - _hat_by_partners(u, K, N)).max())
            if err > HAT_AGREEMENT_TOL:
                raise InvariantViolation(f"hat formulas disagree by {err:.3e} at step {n}")
        step = float(np.abs(u_hat - u).max()) / N
        if M_N0 is None:
            M_N0 = m_n
        if prev is not None:
            p_u, p_I, p_gap, p_lower = prev
            violations["identity2"] = max(violations["identity2"], abs(m_n - p_lower))
            violations["energy"] = max(violations["energy"],
                                       p_I + (1 - mass) * p_gap - I_n)
            violations["bounds"] = max(violations["bounds"], float((p_u - p_gap - u).max()))
        violations["uniform"] = max(violations["uniform"], float(u.max()) - N * M_N0)
        trace.append(TraceRow(n, I_n, gap, float(u.max()), m_n, step))
        history.append(u)
        if strict:
            bad = {k: v for k, v in violations.items() if v > INVARIANT_TOL}
            if bad:
                raise InvariantViolation(f"step {n}: {bad}")
        if gap <= tol and step <= step_tol:
            converged = True
            break
        if n == max_iters:
            break
        prev = (u, I_n, gap, m_lower)
        u = u_hat / N + (N - 1) * u / N

    final = np.maximum(u, 0.0)
    final_gf = template.with_values(final, 0.0)
    final_M = max_excess(final, K, N)[0]
    deltas = np.array([row.delta_N for row in trace])
    # remainders eps_n = sum_{k >= n} Delta_N(u_k) over the recorded run
    eps = np.cumsum(deltas[::-1])[::-1]
    v_mono = 0.0
    for a in range(len(history) - 1):
        v_mono = max(v_mono, float(((history[a] - eps[a]) - (history[a + 1] - eps[a + 1])).max()))
    checks = dict(violations)
    checks["v_monotone"] = v_mono
    checks["final_M_N"] = final_M
    checks["sum_delta"] = float(deltas.sum())
    if strict and v_mono > INVARIANT_TOL:
        raise InvariantViolation(f"corrected sequence decreased by {v_mono:.3e}")
    I_final = float(w @ final) - final_M
    lip = final_gf.lipschitz_constant()
    # R = 0 means phi <= r for every r > 0, so the limit r -> 0+ applies
    bound = gamma_N(N * R, N) if R > 0 else 16.0 * (N - 1) / (9.0 * N)
    return IterationResult(final_gf, trace, converged, R, I_final, lip, bound, checks)


# ---------------------------------------------------------------------------
# admissibility

@dataclass
class AdmissibilityReport:
    method: str
    checked: int
    max_violation: float
    worst: tuple
    admissible: bool

    def to_json(self) -> dict:
        return {"method": self.method, "checked": self.checked,
                "max_violation": self.max_violation, "worst": list(self.worst),
                "admissible": self.admissible}


def check_admissible(psi, N: int, kernel: Kernel = COULOMB,
                     sample_budget: int = DEFAULT_ADMISSIBLE_BUDGET, tol: float = 1e-9,
                     seed: int = 0) -> AdmissibilityReport:
    """Largest ``(1/N) sum psi - c`` over N-multisets of the domain and OMEGA.

    Exhaustive when the multiset count fits ``sample_budget``; otherwise
    ``sample_budget`` uniform random tuples are drawn.  ``worst`` holds point
    indices with ``-1`` for OMEGA.
    """
    vals = np.asarray(psi.values, dtype=float)
    m = vals.shape[0]
    K = domain_matrix(psi, kernel)
    omega = psi.value_at_infinity
    total = comb(m + N, N)
    if total <= sample_budget:
        best, worst = NEG, ()
        for prefix, arr in dense_tuple_values(vals, K, N, 1.0 / N, omega):
            if arr.size == 0:
                continue
            flat = int(np.argmax(arr))
            if arr.flat[flat] > best:
                best = float(arr.flat[flat])
                tail = np.unravel_index(flat, arr.shape)
                worst = tuple(int(i) for i in prefix) + tuple(int(i) for i in tail)
        worst = tuple(-1 if i == m else i for i in worst)
        return AdmissibilityReport("exhaustive", total, best, worst, best <= tol)
    rng = np.random.default_rng(seed)
    va = np.append(vals, omega)
    Ka = np.zeros((m + 1, m + 1))
    Ka[:m, :m] = K
    np.fill_diagonal(Ka, np.inf)
    Ka[m, m] = 0.0
    best, worst, done = NEG, (), 0
    while done < sample_budget:
        n = min(100_000, sample_budget - done)
        T = rng.integers(0, m + 1, size=(n, N))
        score = va[T].sum(axis=1) / N
        for a, b in itertools.combinations(range(N), 2):
            score = score - Ka[T[:, a], T[:, b]]
        i = int(np.argmax(score))
        if score[i] > best:
            best = float(score[i])
            worst = tuple(-1 if t == m else int(t) for t in T[i])
        done += n
    return AdmissibilityReport("sampled", done, best, worst, best <= tol)


def truncate_at_infinity(psi, lam: float):
    """``max(psi, lam)``; requires ``lam`` not above the value at OMEGA."""
    if lam > psi.value_at_infinity:
        raise ValueError(f"truncation level {lam} exceeds the value at infinity "
                         f"{psi.value_at_infinity}")
    return psi.with_values(np.maximum(psi.values, lam), psi.value_at_infinity)


def ball_potential(grid: GridFunction, R: float, N: int) -> GridFunction:
    """``(N-1)/(4R)`` inside the open ball of radius R, ``-1/(4R)`` outside and at OMEGA."""
    r = np.linalg.norm(grid.points, axis=1)
    vals = np.where(r < R, (N - 1) / (4 * R), -1.0 / (4 * R))
    return grid.with_values(vals, -1.0 / (4 * R))
