import numpy as np
import pytest

from momenta import repvar as rv


def commutator(a, b):
    return rv.qmul(rv.qmul(rv.qmul(a, b), rv.qconj(a)), rv.qconj(b))


def test_quaternion_basics(rng):
    p, q = rv.random_unit_quaternions(rng, 2)
    assert np.allclose(rv.qmul(p, rv.qconj(p)), rv.ONE)
    assert np.linalg.norm(rv.qmul(p, q)) == pytest.approx(1.0)
    assert np.allclose(rv.qexp([0, 0, np.pi / 2]), [0, 0, 0, 1], atol=1e-15)


def test_relator_jacobian_matches_fd(rng):
    el = rv.random_unit_quaternions(rng, 4)
    J = rv.relator_jacobian(el)
    h = 1e-6
    for c in range(12):
        j, k = divmod(c, 3)
        v = np.zeros(3)
        v[k] = h
        plus, minus = el.copy(), el.copy()
        plus[j] = rv.qmul(el[j], rv.qexp(v))
        minus[j] = rv.qmul(el[j], rv.qexp(-v))
        fd = (rv.relator(plus) - rv.relator(minus)) / (2 * h)
        assert np.allclose(J[:, c], fd, atol=1e-8)


def test_commuting_start_already_solved():
    pt = rv.solve_rep(1, seed=3, start="circle")
    assert pt.solved and pt.iterations == 0 and pt.residual <= 1e-12


def test_genus_one_commutes():
    for seed in range(10):
        pt = rv.solve_rep(1, seed)
        if pt.solved:
            assert np.linalg.norm(commutator(*pt.elements) - rv.ONE) <= 1e-8


def test_genus_two_noncommuting():
    pt = rv.solve_rep(2, seed=0)
    assert pt.solved and pt.residual <= 1e-10
    a1, b1 = pt.elements[:2]
    assert np.linalg.norm(commutator(a1, b1) - rv.ONE) > 1e-3


def test_solve_deterministic():
    assert np.array_equal(rv.solve_rep(2, 11).elements, rv.solve_rep(2, 11).elements)


def test_solve_rejects_genus_zero():
    with pytest.raises(ValueError):
        rv.solve_rep(0, 1)


def test_convergence_failure_reported():
    with pytest.raises(rv.ConvergenceFailure) as info:
        rv.solve_rep(2, seed=0, maxit=1, raise_on_fail=True)
    assert info.value.point.residual > 1e-10


def test_rep_point_validation():
    with pytest.raises(ValueError):
        rv.RepPoint(1, np.array([[2.0, 0, 0, 0], [1.0, 0, 0, 0]]))
    with pytest.raises(ValueError):
        rv.RepPoint(2, np.vstack([rv.random_unit_quaternions(np.random.default_rng(0), 4)]), solved=True)


def test_stabilizer_classes():
    central = rv.RepPoint(1, np.array([rv.ONE, -rv.ONE]), True, 0.0)
    assert rv.stabilizer_type(central) == "full_group"
    circ = rv.RepPoint(1, np.array([rv.qexp([0.3, 0, 0]), rv.qexp([-1.1, 0, 0])]), True, 0.0)
    assert rv.stabilizer_type(circ) == "circle"
    assert rv.stabilizer_type(rv.solve_rep(2, 0)) == "center"


def test_stabilizer_indeterminate_band():
    pt = rv.RepPoint(1, np.array([rv.qexp([0.3, 0, 0]), rv.qexp([0.2, 1e-6, 0])]))
    assert rv.stabilizer_type(pt) == "indeterminate"


def test_conjugation_invariance(rng):
    pt = rv.solve_rep(2, 5)
    cls = rv.stabilizer_type(pt)
    for q in rv.random_unit_quaternions(rng, 20):
        c = pt.conjugate(q)
        assert c.residual <= 1e-10
        assert rv.stabilizer_type(c) == cls


def test_dimensions_genus_two():
    rep = rv.stratum_dimension(rv.solve_rep(2, 0))
    assert (rep.stabilizer_class, rep.hom_dimension, rep.reduced_dimension) == ("center", 9, 6)


def test_dimensions_pillowcase():
    rep = rv.stratum_dimension(rv.solve_rep(1, 2, start="circle"))
    assert rep.stabilizer_class == "circle" and rep.reduced_dimension == 2


def test_dimensions_central():
    for g in (1, 2):
        pt = rv.RepPoint(g, np.tile(rv.ONE, (2 * g, 1)), True, 0.0)
        rep = rv.stratum_dimension(pt)
        assert rep.stabilizer_class == "full_group"
        assert rep.hom_dimension == 6 * g and rep.reduced_dimension % 2 == 0


def test_survey_genus_two():
    s = rv.survey(2, range(30))
    assert s["converged"] >= 27
    assert s["classes"]["center"]["hom_dimension"] == [9]
    assert all(c["all_even"] for c in s["classes"].values())
