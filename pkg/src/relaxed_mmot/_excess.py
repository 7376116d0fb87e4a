"""Exact maximisation of ``sum(gain) - interaction`` over small point subsets.

Everything in the dual, potential and quantisation modules reduces to

    max over T subset of candidates, |T| <= slots, of
        sum_{t in T} gain[t] - sum_{t < t' in T} K[t, t']

where the empty set stands for "all remaining slots at infinity" and has
value 0.  Points with ``gain <= 0`` are never useful (sending them to
infinity drops a nonpositive gain and some nonnegative interaction), so they
are filtered out first.  Two slots are done with one dense pair matrix; more
slots use depth-first branch and bound over candidates sorted by gain.
"""

from __future__ import annotations

import itertools

import numpy as np

NEG = -np.inf


def best_subset(gain: np.ndarray, K: np.ndarray, slots: int,
                incumbent: float = 0.0) -> tuple[float, tuple]:
    """Return ``(value, indices)`` of the best subset.  Indices refer to ``gain``."""
    if slots <= 0:
        return 0.0, ()
    cand = np.flatnonzero(gain > 0)
    if cand.size == 0:
        return 0.0, ()
    order = cand[np.argsort(-gain[cand], kind="stable")]
    val, pick = _search(gain[order], K[np.ix_(order, order)], slots, max(incumbent, 0.0))
    if val <= 0.0 and not pick:
        return 0.0, ()
    return val, tuple(int(order[i]) for i in pick)


def _search(g: np.ndarray, K: np.ndarray, slots: int, incumbent: float):
    """``g`` is sorted in decreasing order and strictly positive."""
    n = g.shape[0]
    best_val, best_pick = 0.0, ()
    if n == 0:
        return best_val, best_pick
    if g[0] > best_val:
        best_val, best_pick = float(g[0]), (0,)
    if slots == 1 or n == 1:
        return best_val, best_pick
    if slots == 2:
        P = g[:, None] + g[None, :] - K
        P[np.tril_indices(n)] = NEG
        flat = int(np.argmax(P))
        i, j = divmod(flat, n)
        if P[i, j] > best_val:
            best_val, best_pick = float(P[i, j]), (i, j)
        return best_val, best_pick
    floor = max(incumbent, best_val)
    for t in range(n):
        # every later point has gain <= g[t] and only adds interaction
        if slots * g[t] <= floor:
            break
        rest = g[t + 1:] - K[t, t + 1:]
        keep = np.flatnonzero(rest > 0)
        if keep.size:
            sub_order = keep[np.argsort(-rest[keep], kind="stable")]
            idx = t + 1 + sub_order
            sub_val, sub_pick = _search(rest[sub_order], K[np.ix_(idx, idx)],
                                        slots - 1, floor - g[t])
            val = g[t] + sub_val
            pick = (t,) + tuple(int(idx[i]) for i in sub_pick)
        else:
            val, pick = float(g[t]), (t,)
        if val > best_val:
            best_val, best_pick = val, pick
            floor = max(floor, val)
    return best_val, best_pick


def max_excess(values: np.ndarray, K: np.ndarray, k: int) -> tuple[float, tuple]:
    """``max (1/k) sum values(x_i) - c_k(x)`` over k-multisets of points and OMEGA.

    Returns the value and the finite points of a maximiser; the remaining
    ``k - len(points)`` slots sit at OMEGA.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    return best_subset(np.asarray(values, dtype=float) / k, K, k)


def profile(values: np.ndarray, K: np.ndarray, N: int, block: int = 64) -> np.ndarray:
    """For each point x: ``max (1/N) sum values - c_N`` over tuples whose first entry is x."""
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    g = v / N
    out = g.copy()
    slots = N - 1
    if slots == 0 or m == 0:
        return out
    pos = np.flatnonzero(g > 0)
    if pos.size == 0:
        return out
    # gain of partner y for anchor x
    G = g[pos][None, :] - K[:, pos]                 # (m, p)
    if slots == 1:
        return out + np.maximum(G.max(axis=1), 0.0)
    if slots == 2:
        Kpp = K[np.ix_(pos, pos)]
        best = np.maximum(G.max(axis=1), 0.0)
        p = pos.size
        if p >= 2:
            iu = np.triu_indices(p, 1)
            pair_pen = Kpp[iu]
            for s in range(0, m, block):
                Gs = G[s:s + block]
                tot = Gs[:, iu[0]] + Gs[:, iu[1]] - pair_pen[None, :]
                best[s:s + block] = np.maximum(best[s:s + block], tot.max(axis=1))
        return out + best
    Kpp = K[np.ix_(pos, pos)]
    for x in range(m):
        out[x] += best_subset(G[x], Kpp, slots)[0]
    return out


# ---------------------------------------------------------------------------
# dense enumeration (oracle path, independent of the search above)

def dense_tuple_values(values: np.ndarray, K: np.ndarray, r: int, coef: float,
                       omega_value: float = 0.0):
    """Yield ``(prefix, array)`` covering all r-multisets of points plus OMEGA.

    Points are indexed 0..m-1 and OMEGA is index m.  The array holds
    ``coef * sum(values) - cost`` for multisets extending ``prefix`` by two
    sorted indices (or one/none when ``r < 2``).  ``inf`` interactions make
    repeated finite points ``-inf``.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    va = np.append(v, omega_value)
    Ka = np.zeros((m + 1, m + 1))
    Ka[:m, :m] = K
    Ka[m, m] = 0.0
    if r == 0:
        yield (), np.array([0.0])
        return
    if r == 1:
        yield (), coef * va
        return
    pair = coef * (va[:, None] + va[None, :]) - Ka
    mask = np.triu(np.ones((m + 1, m + 1), dtype=bool))
    for prefix in itertools.combinations_with_replacement(range(m + 1), r - 2):
        lo = prefix[-1] if prefix else 0
        base = coef * va[list(prefix)].sum() if prefix else 0.0
        inter = np.zeros(m + 1)
        for a in range(len(prefix)):
            for b in range(a + 1, len(prefix)):
                base -= Ka[prefix[a], prefix[b]]
            inter = inter + Ka[prefix[a]]
        if not np.isfinite(base):
            continue
        tot = base + pair - inter[:, None] - inter[None, :]
        sub = mask.copy()
        sub[:lo, :] = False
        yield prefix, np.where(sub, tot, NEG)


def dense_max(values: np.ndarray, K: np.ndarray, r: int, coef: float,
              omega_value: float = 0.0) -> float:
    best = NEG
    for _, arr in dense_tuple_values(values, K, r, coef, omega_value):
        if arr.size:
            best = max(best, float(arr.max()))
    return best


def count_multisets(n_points: int, r: int) -> int:
    from math import comb
    return comb(n_points + r - 1, r)
