import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relaxed_mmot.dual import M_k, delta_N, dual_lp, dual_objective
from relaxed_mmot.measures import DiscreteMeasure, MeasureError
from relaxed_mmot.potential import (GridFunction, InvariantViolation, M_N_profile, ball_potential,
                                    check_admissible, gamma_N, hat, iterate_potential,
                                    step_one_radius, truncate_at_infinity)


@pytest.fixture
def grid():
    return GridFunction.zeros([(-3.0, 3.0)], [31])


def test_grid_basics():
    g = GridFunction.zeros([(0, 1), (0, 2)], [3, 5])
    assert g.points.shape == (15, 2) and np.allclose(g.spacing, [0.5, 0.5])
    f = g.with_values(g.points[:, 0] + 2 * g.points[:, 1])
    assert f.lipschitz_constant() == pytest.approx(2.0)
    back = GridFunction.from_json(f.to_json())
    assert back.shape == (3, 5) and np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        GridFunction.zeros([(0, 1)], [1])
    with pytest.raises(ValueError):
        GridFunction([(0, 1)], [3], [0.0, np.nan, 0.0])


def test_gamma_values():
    assert gamma_N(1, 2) == pytest.approx(32 / 9)
    assert gamma_N(1, 3) == pytest.approx(32 / 3)
    assert gamma_N(1e-12, 2) == pytest.approx(8 / 9)
    with pytest.raises(ValueError):
        gamma_N(0, 2)


def test_profile_examples(grid):
    assert np.all(M_N_profile(grid, 3).values == 0)
    spike = grid.with_values(np.where(np.arange(31) == 15, 4.0, 0.0))
    prof = M_N_profile(spike, 2)
    assert prof.values[15] == pytest.approx(2.0)
    assert prof.value_at_infinity == pytest.approx(M_k(spike, 1) / 2)


@given(st.integers(0, 10 ** 6), st.integers(2, 4))
def test_profile_max_is_M_N(seed, N):
    rng = np.random.default_rng(seed)
    g = GridFunction.zeros([(-2, 2)], [12])
    phi = g.with_values(rng.normal(size=12) * 3)
    prof = M_N_profile(phi, N)
    assert max(prof.values.max(), prof.value_at_infinity) == pytest.approx(M_k(phi, N), abs=1e-12)


def test_hat_of_zero(grid):
    assert np.all(hat(grid, 2, cross_check=True).values == 0)


@given(st.integers(0, 10 ** 6), st.integers(2, 3))
def test_hat_properties(seed, N):
    rng = np.random.default_rng(seed)
    g = GridFunction.zeros([(-3, 3)], [25])
    R = float(rng.uniform(0.5, 4))
    phi = g.with_values(rng.uniform(0, R, size=25))
    h = hat(phi, N, cross_check=True)
    gap = delta_N(phi, N)
    assert np.all(h.values >= phi.values - N * gap - 1e-9)
    averaged = (1 - 1 / N) * phi.values + h.values / N
    assert np.all(averaged >= phi.values - gap - 1e-9)
    assert h.lipschitz_constant() <= gamma_N(R, N)
    assert h.value_at_infinity == 0.0


def test_hat_lower_bound_needs_factor_N():
    # phi_hat >= phi - Delta_N fails here; only phi - N * Delta_N is guaranteed
    g = GridFunction.zeros([(-3, 3)], [25])
    phi = g.with_values(np.random.default_rng(0).uniform(0, 3, size=25))
    h = hat(phi, 2)
    gap = delta_N(phi, 2)
    assert gap > 0
    assert np.any(h.values < phi.values - gap - 1e-6)
    assert np.all(h.values >= phi.values - 2 * gap - 1e-9)


def test_iteration_from_zero(grid):
    rho = DiscreteMeasure(grid.points[[10, 20]], [0.3, 0.3])
    res = iterate_potential(rho, grid, 2)
    assert res.converged and len(res.trace) == 1 and res.I_N == 0.0


def test_iteration_single_node(grid):
    rho = DiscreteMeasure(grid.points[[15]], [0.4])
    res = iterate_potential(rho, None, 2, grid=grid)
    assert res.I_N == pytest.approx(dual_lp(rho, 2)[0], abs=2e-6)


def test_iteration_matches_lp(grid):
    rho = DiscreteMeasure(grid.points[[8, 14, 19, 25]], [0.2, 0.15, 0.25, 0.2])
    res = iterate_potential(rho, None, 3, grid=grid, cross_check=True)
    assert res.converged
    assert res.I_N == pytest.approx(dual_lp(rho, 3)[0], abs=2e-6)
    assert res.lipschitz <= res.lipschitz_bound
    assert check_admissible(res.admissible_form(), 3).max_violation <= 1e-6
    assert res.potential.values.min() >= 0 and res.potential.value_at_infinity == 0


def test_iteration_summability(grid):
    rng = np.random.default_rng(3)
    rho = DiscreteMeasure(grid.points[[5, 12, 22]], [0.25, 0.25, 0.2])
    phi0 = grid.with_values(rng.uniform(0, 2, size=31))
    res = iterate_potential(rho, phi0, 2)
    rows = res.trace
    total = sum(r.delta_N for r in rows)
    assert total <= (rows[-1].I_N - rows[0].I_N) / (1 - 0.7) + 1e-6
    assert all(b.I_N >= a.I_N - 1e-9 for a, b in zip(rows, rows[1:]))
    assert all(b.M_N <= a.M_N + 1e-9 for a, b in zip(rows, rows[1:]))
    assert res.checks["v_monotone"] <= 1e-9
    csv_text = res.trace_csv()
    assert csv_text.splitlines()[0] == "iteration,I_N,Delta_N,sup_u,M_N"
    assert len(csv_text.splitlines()) == len(rows) + 1


def test_iteration_rejects_bad_input(grid):
    with pytest.raises(MeasureError, match="mass below 1"):
        iterate_potential(DiscreteMeasure(grid.points[[3, 9]], [0.5, 0.5]), None, 2, grid=grid)
    with pytest.raises(MeasureError, match="not a domain point"):
        iterate_potential(DiscreteMeasure([[0.05]], [0.3]), None, 2, grid=grid)
    with pytest.raises(ValueError):
        iterate_potential(DiscreteMeasure(grid.points[[3]], [0.3]), grid.with_values(-np.ones(31)), 2)


def test_step_one_radius_bounds_optimal_potential(grid):
    rho = DiscreteMeasure(grid.points[[8, 14, 19, 25]], [0.2, 0.15, 0.25, 0.2])
    R = step_one_radius(rho, 3)
    _, u = dual_lp(rho, 3)
    assert (u.values - u.value_at_infinity).max() <= R + 1e-9


def test_admissibility_examples(grid):
    assert check_admissible(ball_potential(grid, 1.5, 2), 2).max_violation <= 1e-9
    rep = check_admissible(grid.with_values(np.ones(31), 1.0), 2)
    assert not rep.admissible and rep.max_violation > 0.5
    rho = DiscreteMeasure([[0.0], [1.0], [2.5]], [0.3, 0.3, 0.3])
    assert check_admissible(dual_lp(rho, 3)[1], 3).max_violation <= 1e-9
    sampled = check_admissible(grid.with_values(np.ones(31), 1.0), 3, sample_budget=1000)
    assert sampled.method == "sampled" and not sampled.admissible


def test_truncation(grid):
    psi = ball_potential(grid, 1.0, 3)
    same = truncate_at_infinity(psi, psi.values.min())
    assert np.array_equal(same.values, psi.values)
    top = truncate_at_infinity(psi, psi.value_at_infinity)
    assert check_admissible(top, 3).max_violation <= 1e-9
    with pytest.raises(ValueError):
        truncate_at_infinity(psi, psi.value_at_infinity + 1)


def test_truncation_raises_energy(grid):
    rho = DiscreteMeasure(grid.points[[10, 20]], [0.35, 0.35])
    _, u = dual_lp(rho, 2)
    full = grid.with_values(np.full(31, -5.0), u.value_at_infinity)
    vals = full.values.copy()
    vals[[10, 20]] = u.values
    psi = full.with_values(vals, u.value_at_infinity)
    from relaxed_mmot.dual import dual_energy
    lifted = truncate_at_infinity(psi, psi.value_at_infinity)
    assert dual_energy(lifted, rho) >= dual_energy(psi, rho) - 1e-12
    assert dual_objective(lifted, rho, 2) == pytest.approx(dual_objective(psi, rho, 2), abs=1e-9)


def test_strict_mode_flags_broken_identity(grid, monkeypatch):
    import relaxed_mmot.potential as pot

    rho = DiscreteMeasure(grid.points[[8, 22]], [0.3, 0.3])
    phi0 = grid.with_values(np.linspace(0, 1, 31))
    real = pot._hat_from_profile
    monkeypatch.setattr(pot, "_hat_from_profile", lambda *a: real(*a) - 0.5)
    with pytest.raises(InvariantViolation):
        iterate_potential(rho, phi0, 2)
