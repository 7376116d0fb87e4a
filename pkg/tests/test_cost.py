import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relaxed_mmot.cost import (COULOMB, c_k, c_tilde, interaction_matrix, kernel_from_tag,
                               multiset_cost, pair_cost, power_kernel)
from relaxed_mmot.measures import OMEGA


def test_pair_cost_values():
    assert pair_cost([0.0], [2.0]) == 0.5
    assert pair_cost([0.0, 0.0], [3.0, 4.0]) == pytest.approx(0.2)
    assert pair_cost(OMEGA, [1.0]) == 0.0
    assert pair_cost([1.0], OMEGA) == 0.0
    assert pair_cost([1.0], [1.0]) == np.inf
    assert pair_cost([0.0], [1e-13]) == np.inf


def test_pair_cost_dimension_mismatch():
    with pytest.raises(ValueError):
        pair_cost([0.0], [0.0, 1.0])


def test_c_tilde_with_omega():
    tri = [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]]
    assert c_tilde(tri) == pytest.approx(3.0)
    assert c_tilde([tri[0], OMEGA, tri[1]]) == pytest.approx(1.0)
    assert c_tilde([OMEGA, OMEGA]) == 0.0
    assert c_k([[5.0]]) == 0.0
    with pytest.raises(ValueError):
        c_k([])


def test_interaction_matrix_diagonal_infinite():
    K = interaction_matrix(np.array([[0.0], [1.0], [3.0]]))
    assert np.all(np.isinf(np.diag(K)))
    assert K[0, 2] == pytest.approx(1 / 3) and np.allclose(K, K.T)


def test_multiset_cost_ignores_omega():
    K = interaction_matrix(np.array([[0.0], [1.0], [3.0]]))
    assert multiset_cost((0, 1, -1), K) == pytest.approx(1.0)
    assert multiset_cost((-1, -1), K) == 0.0


def test_kernel_tags():
    assert kernel_from_tag(None) is COULOMB and COULOMB.validated
    k = kernel_from_tag("power:2")
    assert not k.validated and k(2.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        kernel_from_tag("gaussian")
    with pytest.raises(ValueError):
        power_kernel(-1)


def test_kernel_check():
    COULOMB.check()
    power_kernel(0.5).check()


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=5, unique=True))
def test_c_tilde_symmetric_and_omega_neutral(xs):
    pts = [[x] for x in xs]
    base = c_tilde(pts)
    assert c_tilde(pts[::-1]) == pytest.approx(base)
    assert c_tilde(pts + [OMEGA]) == pytest.approx(base)
