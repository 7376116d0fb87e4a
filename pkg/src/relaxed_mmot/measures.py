"""Discrete sub-probability measures and their compactification.

A measure lives on finitely many atoms of R^d.  The point at infinity is
represented by the :data:`OMEGA` sentinel; it never appears among the atoms of
a :class:`DiscreteMeasure`, only in the compactified form.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

SEPARATION_TOL = 1e-9
MASS_SLACK = 1e-12


class MeasureError(ValueError):
    """Raised when measure data violates an invariant."""


class _Omega:
    """The point at infinity.  Only one instance exists."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OMEGA"

    def __reduce__(self):
        return (_Omega, ())


OMEGA = _Omega()


def is_omega(x: Any) -> bool:
    return x is OMEGA


def as_point(x: Any, dim: int | None = None) -> np.ndarray | _Omega:
    """Validate a point: either OMEGA or a finite coordinate vector."""
    if x is OMEGA:
        return OMEGA
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise MeasureError(f"point must be a coordinate vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise MeasureError("point coordinates must be finite")
    if dim is not None and p.shape[0] != dim:
        raise MeasureError(f"point has dimension {p.shape[0]}, expected {dim}")
    return p


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite sum of weighted Dirac masses with total mass at most one.

    Atoms closer than ``SEPARATION_TOL`` are merged (with a warning).  Tiny
    weights are kept as they are so that transport marginals stay exact.
    """

    atoms: np.ndarray
    weights: np.ndarray
    dim: int = field(default=0)

    def __init__(self, atoms: Any, weights: Any, dim: int | None = None):
        w = np.asarray(weights, dtype=float).reshape(-1)
        a = np.asarray(atoms, dtype=float)
        if a.size == 0:
            if dim is None:
                dim = a.shape[1] if a.ndim == 2 else 1
            a = a.reshape(0, dim)
        else:
            if a.ndim == 1:
                # a list of scalars is a list of 1-d atoms
                a = a.reshape(-1, 1) if dim in (None, 1) else a.reshape(1, -1)
            if a.ndim != 2:
                raise MeasureError(f"atoms must be a (K, d) array, got shape {a.shape}")
            if dim is None:
                dim = a.shape[1]
        if dim < 1:
            raise MeasureError("dimension must be positive")
        if a.shape[1] != dim:
            raise MeasureError(f"atoms have dimension {a.shape[1]}, expected {dim}")
        if a.shape[0] != w.shape[0]:
            raise MeasureError(
                f"{a.shape[0]} atoms but {w.shape[0]} weights")
        bad = np.flatnonzero(~np.all(np.isfinite(a), axis=1))
        if bad.size:
            raise MeasureError(f"atom {bad[0]} has non-finite coordinates")
        bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
        if bad.size:
            raise MeasureError(f"weight {bad[0]} is negative or non-finite: {w[bad[0]]}")
        a, w = _merge_close(a, w)
        total = float(w.sum())
        if total > 1.0 + MASS_SLACK:
            raise MeasureError(f"total mass {total!r} exceeds 1")
        object.__setattr__(self, "atoms", _frozen(a))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "dim", int(dim))

    @classmethod
    def zero(cls, dim: int = 1) -> "DiscreteMeasure":
        return cls(np.empty((0, dim)), np.empty(0), dim=dim)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def scaled(self, t: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, t * self.weights, dim=self.dim)

    def with_weights(self, weights: Any) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, weights, dim=self.dim)

    def integrate(self, values: Any) -> float:
        """Integral of a function given by its values at the atoms."""
        v = np.asarray(values, dtype=float)
        if v.shape != self.weights.shape:
            raise MeasureError("values must have one entry per atom")
        return float(np.dot(self.weights, v))

    def to_dict(self) -> dict:
        return {"dim": self.dim,
                "atoms": self.atoms.tolist(),
                "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return measure_from_json(data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash((self.dim, self.atoms.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return (f"DiscreteMeasure(dim={self.dim}, atoms={len(self)}, "
                f"mass={self.total_mass:.6g})")


def _merge_close(a: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = a.shape[0]
    if k < 2:
        return a, w
    diff = a[:, None, :] - a[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    close = np.triu(dist <= SEPARATION_TOL, 1)
    if not close.any():
        return a, w
    keep = np.ones(k, dtype=bool)
    w = w.copy()
    for i in range(k):
        if not keep[i]:
            continue
        for j in np.flatnonzero(close[i]):
            if keep[j]:
                w[i] += w[j]
                keep[j] = False
    warnings.warn(
        f"merged {int((~keep).sum())} atom(s) closer than {SEPARATION_TOL:g}",
        RuntimeWarning, stacklevel=3)
    return a[keep], w[keep]


@dataclass(frozen=True)
class CompactifiedMeasure:
    """Probability on R^d plus OMEGA: the base measure and the mass sent to infinity."""

    base: DiscreteMeasure
    omega_mass: float

    def __post_init__(self):
        if self.omega_mass < 0:
            raise MeasureError("omega mass must be nonnegative")
        if abs(self.base.total_mass + self.omega_mass - 1.0) > MASS_SLACK:
            raise MeasureError("compactified measure must have total mass one")

    @property
    def weights(self) -> np.ndarray:
        """Atom weights followed by the weight of OMEGA."""
        return np.append(self.base.weights, self.omega_mass)

    def drop_omega(self) -> DiscreteMeasure:
        return self.base


def compactify(rho: DiscreteMeasure) -> CompactifiedMeasure:
    # 1 - mass can dip below zero by the allowed slack; clip it.
    return CompactifiedMeasure(rho, max(0.0, 1.0 - rho.total_mass))


def concentration(rho: DiscreteMeasure) -> float:
    """Largest single-atom weight."""
    return float(rho.weights.max()) if len(rho) else 0.0


def variance(rho: DiscreteMeasure) -> float:
    """Trace of the covariance of ``rho / ||rho||``."""
    m = rho.total_mass
    if m <= 0:
        raise MeasureError("variance of the zero measure is undefined")
    p = rho.weights / m
    mean = p @ rho.atoms
    centred = rho.atoms - mean
    return float(p @ (centred ** 2).sum(axis=1))


def measure_from_json(data: Any) -> DiscreteMeasure:
    """Build a measure from ``{"dim", "atoms", "weights"}``.

    Accepts a dict or a JSON string.  The first violation found is reported
    with its JSON path.
    """
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise MeasureError("$: measure must be a JSON object")
    for key in ("dim", "atoms", "weights"):
        if key not in data:
            raise MeasureError(f"$.{key}: missing")
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise MeasureError(f"$.dim: must be a positive integer, got {dim!r}")
    atoms, weights = data["atoms"], data["weights"]
    if not isinstance(atoms, list):
        raise MeasureError("$.atoms: must be a list")
    if not isinstance(weights, list):
        raise MeasureError("$.weights: must be a list")
    for i, atom in enumerate(atoms):
        if not isinstance(atom, list) or len(atom) != dim:
            raise MeasureError(f"$.atoms[{i}]: must be a list of {dim} numbers")
        for j, x in enumerate(atom):
            if not _is_finite_number(x):
                raise MeasureError(f"$.atoms[{i}][{j}]: not a finite number: {x!r}")
    if len(weights) != len(atoms):
        raise MeasureError(
            f"$.weights: {len(weights)} weights for {len(atoms)} atoms")
    for i, x in enumerate(weights):
        if not _is_finite_number(x) or x < 0:
            raise MeasureError(f"$.weights[{i}]: must be a nonnegative number, got {x!r}")
    total = float(np.sum(weights)) if weights else 0.0
    if total > 1.0 + MASS_SLACK:
        raise MeasureError(f"$.weights: total mass {total!r} exceeds 1")
    coords = np.array(atoms, dtype=float).reshape(len(atoms), dim)
    for i in range(len(atoms)):
        for j in range(i):
            if np.linalg.norm(coords[i] - coords[j]) <= SEPARATION_TOL:
                raise MeasureError(
                    f"$.atoms[{i}]: coincides with $.atoms[{j}]")
    return DiscreteMeasure(coords, weights, dim=dim)


def _is_finite_number(x: Any) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)
            and np.isfinite(x))


def measure_to_json(rho: DiscreteMeasure) -> str:
    return json.dumps(rho.to_dict())


def restrict_to(points: Sequence[Any], rho: DiscreteMeasure) -> np.ndarray:
    """Index of each atom of ``rho`` inside ``points`` (matching within tolerance).

    Raises MeasureError when an atom is not one of the points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, rho.dim)
    idx = np.empty(len(rho), dtype=int)
    for i, a in enumerate(rho.atoms):
        d = np.sqrt(((pts - a) ** 2).sum(axis=1))
        j = int(np.argmin(d)) if d.size else -1
        if j < 0 or d[j] > SEPARATION_TOL:
            raise MeasureError(f"atom {i} at {a.tolist()} is not a domain point")
        idx[i] = j
    return idx
