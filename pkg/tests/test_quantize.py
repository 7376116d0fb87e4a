from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relaxed_mmot.dual import DualPotential, M_k
from relaxed_mmot.potential import GridFunction
from relaxed_mmot.primal import relaxed_cost
from relaxed_mmot.quantize import (MonotonicityViolation, beta_estimate, charge_sweep, k_N,
                                   minimal_mass_bruteforce, minimize, nonexistence_bound,
                                   strict_gap, strict_gap_threshold, sweep_csv, variance_bound)
from relaxed_mmot.measures import DiscreteMeasure


def two_bump(h, L=1.0):
    return DualPotential([[0.0], [L]], [h, h])


def realized(V, rho, N):
    """C(rho) - int V drho evaluated independently of the ladder."""
    if rho.total_mass == 0:
        return 0.0
    cost = relaxed_cost(rho, N)[0]
    pts = np.asarray(V.points)
    vals = np.array([V.values[np.argmin(np.linalg.norm(pts - x, axis=1))] for x in rho.atoms])
    return cost - float(vals @ rho.weights)


def test_zero_potential():
    V = DualPotential([[0.0], [1.0], [2.0]], [0.0, 0.0, 0.0])
    val, rho = minimize(V, 3)
    assert val == 0.0 and rho.total_mass == 0.0
    rep = k_N(V, 3)
    assert rep.k_N == 0 and rep.minimal_mass == 0
    assert strict_gap(V, 3) == (False, None)


def test_negative_potential_gives_zero_mass():
    rep = k_N(DualPotential([[0.0], [1.0]], [-1.0, -3.0]), 2)
    assert rep.k_N == 0 and rep.ladder == [0.0, 0.0, 0.0]


def test_single_spike():
    h = 5.0
    V = DualPotential([[0.0], [0.5], [1.0]], [0.0, h, 0.0])
    val, rho = minimize(V, 2)
    assert val == pytest.approx(-h / 2)
    assert rho.total_mass == pytest.approx(0.5)
    assert np.allclose(rho.atoms, [[0.5]])


def test_two_bump_high():
    rep = k_N(two_bump(4.0), 2)
    assert rep.ladder == pytest.approx([0.0, 2.0, 3.0])
    assert rep.k_N == 2 and rep.minimal_mass == Fraction(1)
    assert rep.min_value == pytest.approx(-3.0)
    assert rep.witness_rho.total_mass == pytest.approx(1.0)
    flag, pts = strict_gap(two_bump(4.0), 2)
    assert flag and sorted(pts[:, 0]) == [0.0, 1.0]


def test_two_bump_low():
    rep = k_N(two_bump(1.0), 2)
    assert rep.ladder == pytest.approx([0.0, 0.5, 0.5])
    assert rep.k_N == 1 and rep.minimal_mass == Fraction(1, 2)
    assert not rep.diagnostics["strict_gap"]
    assert strict_gap(two_bump(1.0), 2)[0] is False


def test_value_at_infinity_must_vanish():
    with pytest.raises(ValueError):
        k_N(DualPotential([[0.0]], [1.0], value_at_infinity=0.5), 2)


@pytest.mark.parametrize("h", [1.0, 4.0, 0.3])
def test_witness_realizes_minimum(h):
    V = DualPotential([[0.0], [1.0], [3.0]], [h, h, h / 2])
    for N in (2, 3):
        rep = k_N(V, N)
        assert realized(V, rep.witness_rho, N) == pytest.approx(rep.min_value, abs=1e-6)
        val, rho = minimize(V, N)
        assert val == pytest.approx(-M_k(V, N), abs=1e-12)
        assert realized(V, rho, N) == pytest.approx(val, abs=1e-7)
        assert val <= -max(V.values) / N + 1e-12


seeds = st.integers(0, 10 ** 6)


@given(seeds, st.integers(2, 4))
def test_matches_enumeration(seed, N):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    V = DualPotential(rng.normal(size=(m, 2)), rng.normal(size=m) * 3 + 1)
    rep = k_N(V, N)
    best, mass = minimal_mass_bruteforce(V, N)
    assert rep.ladder[-1] == pytest.approx(best, abs=1e-10)
    assert rep.minimal_mass == mass
    assert rep.minimal_mass.denominator in {d for d in range(1, N + 1) if N % d == 0}
    assert 0 <= rep.minimal_mass <= 1
    assert rep.witness_rho.total_mass == pytest.approx(float(rep.minimal_mass))
    assert np.all(np.diff(rep.ladder) >= -1e-10)
    if rep.diagnostics["strict_gap"]:
        assert rep.minimal_mass == 1


def test_sweep_step_location():
    h, L = 2.0, 1.0
    grid = np.linspace(0.1, 10, 200)
    rows, drops = charge_sweep(two_bump(h, L), 2, grid)
    assert not drops
    masses = [r.mass for r in rows]
    assert set(masses) == {Fraction(1, 2), Fraction(1)}
    first = next(i for i, r in enumerate(rows) if r.mass == 1)
    assert grid[first - 1] <= 2 / (h * L) <= grid[first]
    threads, _ = charge_sweep(two_bump(h, L), 2, grid, workers=4)
    assert [r.mass for r in threads] == masses


def test_sweep_zero_charge_and_csv():
    rows, _ = charge_sweep(two_bump(3.0), 2, [0.0, 5.0])
    assert rows[0].mass == 0 and rows[1].mass == 1
    text = sweep_csv(rows)
    assert text.splitlines()[0] == "Z,k_N,mass,min_value"
    assert len(text.splitlines()) == 3


def test_sweep_requires_sorted_grid():
    with pytest.raises(ValueError):
        charge_sweep(two_bump(1.0), 2, [2.0, 1.0])


def test_sweep_drop_raises_for_two(monkeypatch):
    import relaxed_mmot.quantize as q
    real = q.k_N

    def flipped(V, N, kernel, gap_tol):
        rep = real(V, N, kernel, gap_tol)
        if V.values[0] > 5:
            rep.minimal_mass = Fraction(0)
        return rep

    monkeypatch.setattr(q, "k_N", flipped)
    with pytest.raises(MonotonicityViolation):
        q.charge_sweep(two_bump(1.0), 2, [1.0, 10.0])
    rows, drops = q.charge_sweep(two_bump(1.0), 3, [1.0, 10.0])
    assert drops == [(1.0, 10.0)]


def test_strict_gap_threshold_two_bump():
    grid = np.linspace(0.1, 5, 50)
    t = strict_gap_threshold(two_bump(2.0), 2, grid)
    i = int(np.searchsorted(grid, t))
    assert grid[i - 1] <= 1.0 <= grid[i]


def test_nonexistence_bound_values():
    assert nonexistence_bound(DualPotential([[0.0]], [1.0]), 1.0, 2) == pytest.approx(1.0)
    assert nonexistence_bound(DualPotential([[0.0]], [3.0]), 2.0, 3) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        nonexistence_bound(DualPotential([[0.0]], [-1.0]), 1.0, 2)


@given(seeds, st.integers(2, 3))
def test_below_threshold_loses_mass(seed, N):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(N, 6))
    pts = rng.uniform(-1, 1, size=(m, 2))
    R = float(np.linalg.norm(pts, axis=1).max())
    V = DualPotential(pts, rng.uniform(0.1, 2.0, size=m))
    t = 0.5 * nonexistence_bound(V, R, N)
    rep = k_N(V.with_values(t * V.values, 0.0), N)
    assert rep.minimal_mass < 1


def test_variance_bound_on_probability(triangle):
    rho = DiscreteMeasure(triangle, [1 / 3] * 3)
    assert relaxed_cost(rho, 3)[0] >= variance_bound(rho, 3) - 1e-6


def test_beta_compact_support():
    V = GridFunction.from_function([(-5, 5)], [101], lambda x: 1.0 if abs(x[0]) < 1 else 0.0)
    est = beta_estimate(V, [4.0, 5.0], 2)
    assert est.value == 0.0 and not est.fast_decay_flag and est.surrogate


@pytest.mark.parametrize("c,N,flag", [(1.5, 2, False), (3.0, 2, True), (5.0, 3, False), (7.0, 3, True)])
def test_beta_coulomb_tail(c, N, flag):
    V = GridFunction.from_function([(-8, 8)], [161], lambda x: c / max(abs(x[0]), 0.5))
    est = beta_estimate(V, [6.0, 8.0], N)
    assert est.value == pytest.approx(c, rel=1e-9)
    assert est.fast_decay_flag is flag
    assert est.threshold == N * (N - 1)


def test_beta_missing_shell():
    V = GridFunction.zeros([(-1, 1)], [3])
    with pytest.raises(ValueError):
        beta_estimate(V, [7.0], 2)
