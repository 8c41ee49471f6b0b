import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momenta import action as act
from momenta import symplin as sl
from momenta.cli import random_space, random_subspace

E = np.eye(4)
q1, q2, p1, p2 = E[:, 0], E[:, 1], E[:, 2], E[:, 3]


def span(*vs):
    return sl.Subspace.span(np.column_stack(vs), 4)


def test_make_standard_small():
    s1 = sl.make_standard(1)
    assert np.array_equal(s1.omega, [[0, 1], [-1, 0]])
    assert s1.form([1, 0], [0, 1]) == 1.0
    assert s1.form([1, 0], [1, 0]) == 0.0
    s2 = sl.make_standard(2)
    assert sl.numerical_rank(s2.omega) == 4
    assert s2.form(q2, p2) == 1.0 and s2.form(q1, p2) == 0.0


def test_make_standard_rejects_zero():
    with pytest.raises(ValueError):
        sl.make_standard(0)


def test_space_validation():
    with pytest.raises(ValueError):
        sl.SymplecticSpace(np.eye(2))
    with pytest.raises(ValueError):
        sl.SymplecticSpace(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        sl.SymplecticSpace(np.zeros((3, 3)))


def test_space_json_roundtrip():
    sp = sl.SymplecticSpace(2 * sl.standard_form_matrix(2), np.diag([1.0, 2, 3, 4]))
    back = sl.SymplecticSpace.from_json(json.dumps(sp.to_json()))
    assert np.array_equal(back.omega, sp.omega) and np.array_equal(back.metric, sp.metric)


def test_subspace_rejects_rank_deficient_basis():
    with pytest.raises(ValueError):
        sl.Subspace(np.column_stack([q1, 2 * q1]))


def test_orthogonal_of_line():
    sp = sl.make_standard(2)
    assert sl.symplectic_orthogonal(sp, span(q1)).equals(span(q1, q2, p2))
    assert sl.symplectic_orthogonal(sp, sl.Subspace.full(4)).dim == 0


def test_orthogonal_against_dense_null_space():
    sp = sl.make_standard(2)
    V = span(q1 + p2, q2)
    Vw = sl.symplectic_orthogonal(sp, V)
    from scipy.linalg import null_space
    oracle = sl.Subspace(null_space(V.basis.T @ sp.omega))
    assert Vw.dim == 2 and Vw.distance(oracle) < 1e-12


def test_double_orthogonal_trivial_cases():
    sp = sl.make_standard(2)
    assert sl.double_orthogonal_check(sp, span(q1)) == (True, pytest.approx(0, abs=1e-14))
    ok, d = sl.double_orthogonal_check(sp, sl.Subspace.zero(4))
    assert ok and d == 0


def test_is_symplectic_examples():
    sp = sl.make_standard(2)
    assert sl.is_symplectic_subspace(sp, span(q1, p1))
    assert not sl.is_symplectic_subspace(sp, span(q1, q2))
    V = span(q1 + p2, q2)
    restricted = V.orthonormal.T @ sp.omega @ V.orthonormal
    assert sl.is_symplectic_subspace(sp, V) == (sl.numerical_rank(restricted) == 2)
    assert not sl.is_symplectic_subspace(sp, span(q1))


def test_complex_structure_standard():
    sp = sl.make_standard(2)
    J = sl.compatible_complex_structure(sp).J
    assert np.allclose(J, -sp.omega)
    assert np.allclose(J @ J, -np.eye(4))


def test_complex_structure_orthogonal_relation(rng):
    sp = random_space(rng, 3)
    J = sl.compatible_complex_structure(sp).J
    g = sp.omega @ J
    for _ in range(20):
        V = random_subspace(rng, 6)
        lhs = sl.symplectic_orthogonal(sp, V)
        rhs = sl.Subspace.span(J @ V.complement(g).basis, 6) if V.dim < 6 else sl.Subspace.zero(6)
        assert lhs.distance(rhs) <= 1e-8


def test_complex_structure_with_metric(rng):
    A = rng.normal(size=(4, 4))
    sp = sl.SymplecticSpace(sl.standard_form_matrix(2), A @ A.T + np.eye(4))
    cs = sl.compatible_complex_structure(sp)
    cs.check(sp)


def test_darboux_scaled_plane():
    sp = sl.SymplecticSpace(np.array([[0.0, 2], [-2, 0]]))
    S = sl.darboux_basis(sp)
    assert np.allclose(S.T @ sp.omega @ S, [[0, 1], [-1, 0]], atol=1e-10)


def test_darboux_random(rng):
    for _ in range(10):
        sp = random_space(rng, 3)
        S = sl.darboux_basis(sp)
        assert np.abs(S.T @ sp.omega @ S - sl.standard_form_matrix(3)).max() <= 1e-10


def test_fixed_point_splitting_examples():
    sp1 = act.complex_space(1)
    XG, comp = sl.fixed_point_splitting(sp1, act.FiniteGroup([np.eye(2), -np.eye(2)]))
    assert XG.dim == 0 and comp.dim == 2
    sp2 = act.complex_space(2)
    XG, comp = sl.fixed_point_splitting(sp2, act.Torus([[1, 0]]))
    assert XG.equals(sl.Subspace.span(np.eye(4)[:, 2:], 4))
    assert comp.equals(sl.Subspace.span(np.eye(4)[:, :2], 4))
    XG, comp = sl.fixed_point_splitting(sp2, act.FiniteGroup([np.eye(4)]))
    assert XG.dim == 4 and comp.dim == 0


def test_fixed_point_splitting_rejects_nonsymplectic():
    sp = act.complex_space(1)
    with pytest.raises(ValueError):
        sl.fixed_point_splitting(sp, act.FiniteGroup([np.eye(2), np.diag([1.0, -1.0])]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 5))
def test_orthogonal_properties(seed, n):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, n)
    V1 = random_subspace(rng, 2 * n)
    V2 = V1 + random_subspace(rng, 2 * n)
    W1, W2 = sl.symplectic_orthogonal(sp, V1), sl.symplectic_orthogonal(sp, V2)
    assert V1.dim + W1.dim == 2 * n
    assert W1.contains(W2)
    U = random_subspace(rng, 2 * n)
    lhs = sl.symplectic_orthogonal(sp, V1 + U)
    rhs = W1.intersect(sl.symplectic_orthogonal(sp, U))
    assert lhs.distance(rhs) <= 1e-8
    assert sl.double_orthogonal_check(sp, V1)[1] <= 1e-8


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 5))
def test_three_way_agreement(seed, n):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, n)
    V = random_subspace(rng, 2 * n)
    sl.is_symplectic_subspace(sp, V)
