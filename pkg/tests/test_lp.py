import numpy as np
import pytest

from relaxed_mmot import lp
from relaxed_mmot.lp import EQ, GE, LE, LinearProgram, certify, lp_from_rows, solve

PRINTED_A = np.array([[0, -1, -1, 3], [-1, 0, -1, 3], [-1, -1, 0, 3], [-1, -1, -1, 6]], float)
PRINTED_B = np.array([3, 3, 3, 9], float)


def printed_lp(alpha):
    s = sum(alpha)
    c = np.append(-np.asarray(alpha, float), 3 * s - 1)
    return LinearProgram(c, PRINTED_A, PRINTED_B, (LE,) * 4, sense="max")


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_printed_three_point_lp(backend):
    sol = solve(printed_lp([1 / 3] * 3), backend=backend)
    assert sol.optimal
    assert sol.value == pytest.approx(3.0, abs=1e-9)
    assert np.allclose(sol.x, [3, 3, 3, 3])


@pytest.mark.parametrize("s,expected", [(0.2, 0.0), (0.5, 0.5), (0.8, 1.8)])
def test_printed_lp_matches_closed_form(s, expected):
    sol = solve(printed_lp([s / 3] * 3))
    assert sol.value == pytest.approx(expected, abs=1e-9)


def test_simple_bounds_and_statuses():
    assert solve(lp_from_rows([1.0], [([1.0], LE, 3.0)], sense="max")).value == pytest.approx(3)
    assert solve(lp_from_rows([1.0], [([1.0], LE, -1.0)])).status == "infeasible"
    assert solve(lp_from_rows([1.0], [([1.0], GE, 0.0)], sense="max")).status == "unbounded"


def test_free_and_boxed_variables():
    prob = lp_from_rows([1.0, -2.0], [([1.0, 1.0], EQ, 1.0)],
                        lb=[-np.inf, -1.0], ub=[np.inf, 0.5])
    sol = solve(prob)
    assert sol.optimal
    assert sol.x == pytest.approx([0.5, 0.5])
    assert sol.value == pytest.approx(-0.5)


def test_certificate_fields():
    prob = printed_lp([0.3, 0.2, 0.1])
    sol = solve(prob)
    cert = certify(prob, sol.x, sol.y)
    assert cert["certified"] and cert["relative_gap"] < 1e-10
    bad = certify(prob, sol.x + 1.0, sol.y)
    assert not bad["certified"]


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook rule; Bland's rule terminates.
    c = np.array([-0.75, 150, -0.02, 6])
    A = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    sol = solve(LinearProgram(c, A, [0, 0, 1], (LE, LE, LE)))
    assert sol.optimal and sol.value == pytest.approx(-0.05)


def test_dump(tmp_path):
    prob = printed_lp([0.1, 0.1, 0.1])
    path = tmp_path / "lp.txt"
    solve(prob, dump_to=path)
    text = path.read_text()
    assert text.startswith("max 4 4") and text.count("\n") == 8


def test_invalid_problems():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0, 2.0]], [1.0], (LE,))
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [1.0], ("<>",))
    with pytest.raises(ValueError):
        LinearProgram([np.inf], [[1.0]], [1.0], (LE,))
    with pytest.raises(ValueError):
        solve(printed_lp([0.1] * 3), backend="nope")


def _random_lp(rng):
    m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    b = rng.integers(-2, 6, size=m).astype(float)
    senses = tuple(rng.choice([LE, GE, EQ], size=m))
    lb = np.where(rng.random(n) < 0.2, -np.inf, rng.integers(-2, 1, size=n))
    ub = np.where(rng.random(n) < 0.7, np.inf, lb + rng.integers(1, 4, size=n))
    ub = np.where(np.isinf(lb) & (ub != np.inf), rng.integers(0, 3, size=n), ub)
    return LinearProgram(rng.integers(-4, 5, size=n).astype(float), A, b, senses,
                         sense=str(rng.choice(["min", "max"])), lb=lb, ub=ub)


def test_agrees_with_highs_on_random_lps():
    rng = np.random.default_rng(7)
    compared = 0
    for _ in range(300):
        prob = _random_lp(rng)
        mine, ref = solve(prob), solve(prob, backend="highs")
        if ref.optimal:
            assert mine.optimal
            assert mine.value == pytest.approx(ref.value, abs=1e-7)
            compared += 1
        elif mine.optimal:
            pytest.fail(f"simplex optimal where HiGHS says {ref.status}")
        elif ref.status == "infeasible":
            # HiGHS reports "infeasible" for infeasible-or-unbounded; settle it
            feas = solve(LinearProgram(np.zeros_like(prob.c), prob.A, prob.b, prob.senses,
                                       lb=prob.lb, ub=prob.ub))
            assert mine.status == ("unbounded" if feas.optimal else "infeasible")
        else:
            assert mine.status == ref.status
    assert compared > 100


def test_iteration_limit_reported():
    sol = solve(printed_lp([1 / 3] * 3), max_iters=1)
    assert sol.status == "iteration_limit"
    assert lp.MAX_ITERS > 1
