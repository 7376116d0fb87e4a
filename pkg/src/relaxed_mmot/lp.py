"""Dense linear programming with primal/dual certificates.

The built-in solver is a two-phase revised simplex with Bland's rule, which
is slow on big problems but terminates and is deterministic.  Every optimal
answer, whatever the backend, goes through the same certificate check:
primal feasibility, dual feasibility, complementary slackness and the
duality gap, all measured on the problem as it was posed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

LE, EQ, GE = "<=", "=", ">="

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
OPT_TOL = 1e-11
CS_TOL = 1e-8
GAP_TOL = 1e-8
MAX_ITERS = 10 ** 6


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    """``min`` or ``max`` of ``c @ x`` subject to row constraints and bounds.

    ``lb`` defaults to zero and may contain ``-inf``; ``ub`` defaults to
    ``+inf``.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: tuple
    sense: str = "min"
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.shape[0]
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        senses = tuple(self.senses)
        if A.ndim != 2 or A.shape[1] != n:
            raise ValueError(f"constraint matrix shape {A.shape} does not match {n} variables")
        if b.shape[0] != A.shape[0] or len(senses) != A.shape[0]:
            raise ValueError("rows of A, b and senses disagree")
        if any(s not in (LE, EQ, GE) for s in senses):
            raise ValueError(f"row senses must be one of {LE!r}, {EQ!r}, {GE!r}")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("objective, matrix and right-hand side must be finite")
        lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if lb.shape != (n,) or ub.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(lb == np.inf) or np.any(ub == -np.inf) or np.any(lb > ub):
            raise ValueError("inconsistent variable bounds")
        for name, val in (("c", c), ("A", A), ("b", b), ("senses", senses),
                          ("lb", lb), ("ub", ub)):
            if isinstance(val, np.ndarray):
                val = val.copy()
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dump(self) -> str:
        """Plain-text dump: header line, then ``c``, then one line per row."""
        out = io.StringIO()
        m, n = self.A.shape
        out.write(f"{self.sense} {m} {n}\n")
        out.write("c " + " ".join(f"{v:.17g}" for v in self.c) + "\n")
        for i in range(m):
            out.write(" ".join(f"{v:.17g}" for v in self.A[i]))
            out.write(f" {self.senses[i]} {self.b[i]:.17g}\n")
        out.write("lb " + " ".join(f"{v:.17g}" for v in self.lb) + "\n")
        out.write("ub " + " ".join(f"{v:.17g}" for v in self.ub) + "\n")
        return out.getvalue()


@dataclass
class LpSolution:
    status: str                 # optimal | infeasible | unbounded | iteration_limit | numerical_failure
    x: np.ndarray | None = None
    y: np.ndarray | None = None  # row duals, sign convention of the posed problem
    value: float = float("nan")
    iterations: int = 0
    certificate: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# standard form

@dataclass
class _Standard:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    # x_orig = offset + T @ x_std[:n_struct]
    T: np.ndarray
    offset: np.ndarray
    n_struct: int
    row_sign: np.ndarray        # rows were multiplied by this to make b >= 0
    n_orig_rows: int
    slack_of_row: dict          # std row -> slack column with +1 coefficient


def _to_standard(lp: LinearProgram) -> _Standard:
    m, n = lp.A.shape
    c = lp.c if lp.sense == "min" else -lp.c
    cols, costs = [], []
    T_cols = []
    offset = np.zeros(n)
    extra_rows = []             # (column index in structural block, bound) for x' <= ub - lb
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(lp.A[:, j]); costs.append(c[j]); T_cols.append(e)
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-lp.A[:, j]); costs.append(-c[j]); T_cols.append(-e)
        else:
            cols.append(lp.A[:, j]); costs.append(c[j]); T_cols.append(e)
            cols.append(-lp.A[:, j]); costs.append(-c[j]); T_cols.append(-e)
    ns = len(cols)
    A_s = np.column_stack(cols) if ns else np.zeros((m, 0))
    b_s = lp.b - lp.A @ offset
    senses = list(lp.senses)
    rows = [A_s[i] for i in range(m)]
    rhs = list(b_s)
    for col, bound in extra_rows:
        r = np.zeros(ns)
        r[col] = 1.0
        rows.append(r); rhs.append(bound); senses.append(LE)
    M = len(rows)
    A_rows = np.array(rows).reshape(M, ns)
    n_slack = sum(s != EQ for s in senses)
    A = np.zeros((M, ns + n_slack))
    A[:, :ns] = A_rows
    k = ns
    slack_col = {}
    for i, s in enumerate(senses):
        if s == LE:
            A[i, k] = 1.0; slack_col[i] = k; k += 1
        elif s == GE:
            A[i, k] = -1.0; slack_col[i] = k; k += 1
    b = np.array(rhs, dtype=float)
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    plus_slack = {i: col for i, col in slack_col.items() if A[i, col] > 0}
    cfull = np.zeros(A.shape[1])
    cfull[:ns] = costs
    return _Standard(A, b, cfull, np.array(T_cols).T.reshape(n, ns), offset, ns,
                     sign, m, plus_slack)


# ---------------------------------------------------------------------------
# revised simplex

class _Simplex:
    def __init__(self, A, b, pivot_tol, opt_tol, max_iters):
        self.A = A
        self.b = b
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.max_iters = max_iters
        self.iterations = 0

    def run(self, c, basis, allowed):
        """Minimise ``c @ x`` from a feasible basis.  Returns status string."""
        A, b = self.A, self.b
        m = A.shape[0]
        while True:
            if self.iterations >= self.max_iters:
                return "iteration_limit"
            B = A[:, basis]
            try:
                xB = np.linalg.solve(B, b)
                y = np.linalg.solve(B.T, c[basis])
            except np.linalg.LinAlgError:
                return "numerical_failure"
            d = c - A.T @ y
            d[basis] = 0.0
            scale = 1.0 + np.abs(c).max(initial=0.0)
            cand = np.flatnonzero(allowed & (d < -self.opt_tol * scale))
            if cand.size == 0:
                return "optimal"
            q = int(cand[0])                    # Bland: lowest index
            w = np.linalg.solve(B, A[:, q])
            pos = w > self.pivot_tol
            if not pos.any():
                self.unbounded_col = q
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = np.maximum(xB[pos], 0.0) / w[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + 1e-14 * max(1.0, rmin))
            r = int(ties[np.argmin(np.asarray(basis)[ties])])   # Bland: lowest basic index
            basis[r] = q
            self.iterations += 1


def _simplex_standard(std: _Standard, pivot_tol, feas_tol, opt_tol, max_iters):
    A0, b, c = std.A, std.b, std.c
    m, n = A0.shape
    # phase one: artificials only where no +1 slack can start the basis
    basis = []
    art_rows = []
    for i in range(m):
        if i in std.slack_of_row:
            basis.append(std.slack_of_row[i])
        else:
            art_rows.append(i)
            basis.append(n + len(art_rows) - 1)
    n_art = len(art_rows)
    A = np.zeros((m, n + n_art))
    A[:, :n] = A0
    for k, i in enumerate(art_rows):
        A[i, n + k] = 1.0
    solver = _Simplex(A, b, pivot_tol, opt_tol, max_iters)
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        status = solver.run(c1, basis, np.ones(n + n_art, dtype=bool))
        if status != "optimal":
            return status, None, None, solver.iterations
        xB = np.linalg.solve(A[:, basis], b)
        infeas = sum(xB[i] for i, j in enumerate(basis) if j >= n)
        if infeas > feas_tol * (1.0 + np.abs(b).max(initial=0.0)):
            return "infeasible", None, None, solver.iterations
        # pivot remaining (degenerate) artificials out where possible
        for r in range(m):
            if basis[r] < n:
                continue
            B = A[:, basis]
            row = np.linalg.solve(B.T, np.eye(m)[r]) @ A[:, :n]
            nonbasic = np.setdiff1d(np.arange(n), basis)
            piv = [j for j in nonbasic if abs(row[j]) > pivot_tol]
            if piv:
                basis[r] = int(piv[0])
    c2 = np.zeros(n + n_art)
    c2[:n] = c
    allowed = np.zeros(n + n_art, dtype=bool)
    allowed[:n] = True
    status = solver.run(c2, basis, allowed)
    if status != "optimal":
        return status, None, None, solver.iterations
    B = A[:, basis]
    xB = np.linalg.solve(B, b)
    y = np.linalg.solve(B.T, c2[basis])
    x = np.zeros(n + n_art)
    x[basis] = xB
    x = np.maximum(x, 0.0)
    return "optimal", x[:n], y, solver.iterations


def _from_standard(lp: LinearProgram, std: _Standard, xs: np.ndarray, ys: np.ndarray):
    x = std.offset + std.T @ xs[:std.n_struct]
    # duals of the min-form problem for the original rows
    y_min = ys[:std.n_orig_rows] * std.row_sign[:std.n_orig_rows]
    y = y_min if lp.sense == "min" else -y_min
    return x, y


# ---------------------------------------------------------------------------
# certificates

def certify(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> dict:
    """Measure primal/dual feasibility, complementary slackness and the gap."""
    s = 1.0 if lp.sense == "min" else -1.0
    c = s * lp.c
    ym = s * y                       # duals in min-form convention
    Ax = lp.A @ x
    slack = Ax - lp.b
    viol = np.zeros_like(slack)
    for i, sen in enumerate(lp.senses):
        if sen == LE:
            viol[i] = max(slack[i], 0.0)
        elif sen == GE:
            viol[i] = max(-slack[i], 0.0)
        else:
            viol[i] = abs(slack[i])
    bound_viol = np.maximum(lp.lb - x, 0.0).max(initial=0.0)
    bound_viol = max(bound_viol, np.maximum(x - lp.ub, 0.0).max(initial=0.0))
    primal_res = max(viol.max(initial=0.0), bound_viol)

    dual_res = 0.0
    for i, sen in enumerate(lp.senses):
        if sen == LE:
            dual_res = max(dual_res, ym[i])
        elif sen == GE:
            dual_res = max(dual_res, -ym[i])
    d = c - lp.A.T @ ym
    lo_f, hi_f = np.isfinite(lp.lb), np.isfinite(lp.ub)
    z_lo = np.where(lo_f & hi_f, np.maximum(d, 0.0), np.where(lo_f, d, 0.0))
    z_hi = np.where(lo_f & hi_f, np.minimum(d, 0.0), np.where(hi_f & ~lo_f, d, 0.0))
    free = ~lo_f & ~hi_f
    only_lo = lo_f & ~hi_f
    only_hi = hi_f & ~lo_f
    if only_lo.any():
        dual_res = max(dual_res, np.maximum(-d[only_lo], 0.0).max())
    if only_hi.any():
        dual_res = max(dual_res, np.maximum(d[only_hi], 0.0).max())
    if free.any():
        dual_res = max(dual_res, np.abs(d[free]).max())

    cs = 0.0
    if slack.size:
        cs = float(np.abs(ym * slack).max())
    with np.errstate(invalid="ignore"):
        gl = np.where(lo_f, np.abs(z_lo * (x - np.where(lo_f, lp.lb, 0.0))), 0.0)
        gu = np.where(hi_f, np.abs(z_hi * (np.where(hi_f, lp.ub, 0.0) - x)), 0.0)
    cs = max(cs, gl.max(initial=0.0), gu.max(initial=0.0))

    primal_obj = float(c @ x)
    dual_obj = float(lp.b @ ym
                     + np.where(lo_f, lp.lb, 0.0) @ z_lo
                     + np.where(hi_f, lp.ub, 0.0) @ z_hi)
    gap = abs(primal_obj - dual_obj) / max(1.0, abs(primal_obj))
    ok = (primal_res <= FEAS_TOL and dual_res <= FEAS_TOL
          and cs <= CS_TOL and gap <= GAP_TOL)
    return {"primal_residual": float(primal_res), "dual_residual": float(dual_res),
            "complementarity": float(cs), "relative_gap": float(gap),
            "primal_objective": s * primal_obj, "dual_objective": s * dual_obj,
            "certified": bool(ok)}


# ---------------------------------------------------------------------------
# backends

def _solve_simplex(lp, pivot_tol, feas_tol, max_iters):
    std = _to_standard(lp)
    status, xs, ys, iters = _simplex_standard(std, pivot_tol, feas_tol, OPT_TOL, max_iters)
    if status != "optimal":
        return LpSolution(status, iterations=iters)
    x, y = _from_standard(lp, std, xs, ys)
    return LpSolution("optimal", x, y, float(lp.c @ x), iters)


def _solve_highs(lp, pivot_tol, feas_tol, max_iters):
    from scipy.optimize import linprog

    s = 1.0 if lp.sense == "min" else -1.0
    ub_rows = [i for i, t in enumerate(lp.senses) if t != EQ]
    eq_rows = [i for i, t in enumerate(lp.senses) if t == EQ]
    flip = np.array([1.0 if lp.senses[i] == LE else -1.0 for i in ub_rows])
    A_ub = lp.A[ub_rows] * flip[:, None] if ub_rows else None
    b_ub = lp.b[ub_rows] * flip if ub_rows else None
    A_eq = lp.A[eq_rows] if eq_rows else None
    b_eq = lp.b[eq_rows] if eq_rows else None
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lp.lb, lp.ub)]
    res = linprog(s * lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": feas_tol * 1e-1,
                           "dual_feasibility_tolerance": feas_tol * 1e-1})
    status = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "numerical_failure")
    if status != "optimal":
        return LpSolution(status, iterations=int(getattr(res, "nit", 0)))
    y = np.zeros(lp.A.shape[0])
    if ub_rows:
        y[ub_rows] = res.ineqlin.marginals * flip
    if eq_rows:
        y[eq_rows] = res.eqlin.marginals
    y = s * y
    x = np.asarray(res.x, dtype=float)
    return LpSolution("optimal", x, y, float(lp.c @ x), int(res.nit))


_BACKENDS = {"simplex": _solve_simplex, "highs": _solve_highs}


def solve(lp: LinearProgram, *, backend: str = "simplex", pivot_tol: float = PIVOT_TOL,
          feas_tol: float = FEAS_TOL, max_iters: int = MAX_ITERS,
          dump_to: Any = None) -> LpSolution:
    """Solve ``lp`` and attach a certificate.

    An optimal answer whose certificate fails is returned with status
    ``numerical_failure`` rather than being passed off as optimal.
    """
    if dump_to is not None:
        with open(dump_to, "w") as fh:
            fh.write(lp.dump())
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    sol = fn(lp, pivot_tol, feas_tol, max_iters)
    if sol.optimal:
        sol.certificate = certify(lp, sol.x, sol.y)
        if not sol.certificate["certified"]:
            sol.status = "numerical_failure"
    return sol


def lp_from_rows(c: Sequence[float], rows: Sequence[tuple], sense: str = "min",
                 lb=None, ub=None) -> LinearProgram:
    """Convenience constructor from ``(coefficients, sense, rhs)`` rows."""
    n = len(c)
    A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
    return LinearProgram(np.asarray(c, dtype=float), A,
                         np.array([r[2] for r in rows], dtype=float),
                         tuple(r[1] for r in rows), sense, lb, ub)
