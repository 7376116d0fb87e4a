"""Repulsive pair interactions and the multi-point costs built from them.

Distances are mapped through a radial kernel (``1/r`` by default).  Pairs
involving OMEGA cost nothing; coincident finite points cost ``inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .measures import OMEGA, as_point

COINCIDENCE_TOL = 1e-12
INF = float("inf")


@dataclass(frozen=True)
class Kernel:
    """Radial interaction ``r -> eval(r)``, positive and vanishing at infinity.

    ``validated`` is True only for the Coulomb kernel; anything else is
    accepted but treated as user-supplied.
    """

    func: Callable[[np.ndarray], np.ndarray]
    tag: str = "coulomb"
    validated: bool = False

    def __call__(self, r: Any) -> Any:
        r = np.asarray(r, dtype=float)
        out = np.full(r.shape, INF)
        ok = r >= COINCIDENCE_TOL
        if np.any(ok):
            out[ok] = self.func(r[ok])
        return out if out.ndim else float(out)

    def check(self) -> None:
        """Sample the kernel and raise ValueError if it is not a valid repulsion."""
        radii = np.geomspace(1e-3, 1e6, 40)
        vals = np.asarray(self(radii), dtype=float)
        if not np.all(vals > 0):
            raise ValueError(f"kernel {self.tag!r} must be positive")
        if not vals[-1] < vals[0]:
            raise ValueError(f"kernel {self.tag!r} does not decay")
        if self.tag == "coulomb":
            if not (self(1e3) < 1e-2 and self(1e6) < 1e-5):
                raise ValueError("coulomb kernel does not vanish at infinity")
            if np.any(np.diff(vals) > 0):
                raise ValueError("coulomb kernel must be nonincreasing")


def _inverse(r: np.ndarray) -> np.ndarray:
    return 1.0 / r


COULOMB = Kernel(_inverse, "coulomb", validated=True)


def power_kernel(s: float) -> Kernel:
    """``r -> r**(-s)``; not covered by the Lipschitz regularity theory."""
    if s <= 0:
        raise ValueError("exponent must be positive")
    return Kernel(lambda r: r ** (-s), f"power:{s:g}", validated=False)


def kernel_from_tag(tag: str | None) -> Kernel:
    if tag in (None, "", "coulomb"):
        return COULOMB
    if tag.startswith("power:"):
        return power_kernel(float(tag.split(":", 1)[1]))
    raise ValueError(f"unknown kernel tag {tag!r}")


def pair_cost(x: Any, y: Any, kernel: Kernel = COULOMB) -> float:
    if x is OMEGA or y is OMEGA:
        return 0.0
    px, py = as_point(x), as_point(y)
    if px.shape != py.shape:
        raise ValueError(f"dimension mismatch: {px.shape[0]} vs {py.shape[0]}")
    return float(kernel(np.linalg.norm(px - py)))


def c_tilde(points: Sequence[Any], kernel: Kernel = COULOMB) -> float:
    """Sum of pair costs over all pairs of a tuple that may contain OMEGA."""
    finite = [as_point(p) for p in points if p is not OMEGA]
    if len(finite) < 2:
        return 0.0
    dims = {p.shape[0] for p in finite}
    if len(dims) > 1:
        raise ValueError("dimension mismatch among points")
    X = np.stack(finite)
    K = interaction_matrix(X, kernel)
    iu = np.triu_indices(len(finite), 1)
    return float(K[iu].sum())


def c_k(points: Sequence[Any], kernel: Kernel = COULOMB) -> float:
    """Cost of ``k`` points with no partners at infinity; zero when ``k == 1``."""
    if len(points) < 1:
        raise ValueError("c_k needs at least one point")
    return c_tilde(points, kernel)


def interaction_matrix(points: np.ndarray, kernel: Kernel = COULOMB) -> np.ndarray:
    """Pairwise kernel values with ``inf`` on the diagonal."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    diff = X[:, None, :] - X[None, :, :]
    r = np.sqrt((diff ** 2).sum(-1))
    K = np.asarray(kernel(r), dtype=float)
    np.fill_diagonal(K, INF)
    return K


def multiset_cost(indices: Sequence[int], K: np.ndarray) -> float:
    """Cost of a multiset of point indices (``-1`` means OMEGA) given the matrix ``K``."""
    fin = [i for i in indices if i >= 0]
    total = 0.0
    for a in range(len(fin)):
        for b in range(a + 1, len(fin)):
            total += K[fin[a], fin[b]]
    return total
