import warnings

import numpy as np
import pytest

from momenta import action as act
from momenta import normalform as nfm


def test_split_diagonal():
    sp = nfm.split_jacobian(np.array([[1.0, 0], [0, 0]]))
    assert np.allclose(np.abs(sp.ker[:, 0]), [0, 1]) and np.allclose(np.abs(sp.coimg[:, 0]), [1, 0])
    assert np.allclose(np.abs(sp.img[:, 0]), [1, 0]) and np.allclose(np.abs(sp.coker[:, 0]), [0, 1])
    sp.check(np.array([[1.0, 0], [0, 0]]))


def test_split_zero():
    sp = nfm.split_jacobian(np.zeros((2, 2)))
    assert sp.dims == {"ker": 2, "coimg": 0, "coker": 2, "img": 0}


def test_split_random_rank_two(rng):
    T = rng.normal(size=(5, 2)) @ rng.normal(size=(2, 3))
    sp = nfm.split_jacobian(T)
    assert sp.dims == {"ker": 1, "coimg": 2, "coker": 3, "img": 2}
    sp.check(T)


def test_split_ill_separated_warns():
    with pytest.warns(nfm.IllSeparatedRank):
        nfm.split_jacobian(np.diag([1.0, 1e-9]), tol=3e-10)


def test_smooth_map_rejects_bad_jacobian():
    with pytest.raises(ValueError):
        nfm.SmoothMap(lambda x: x ** 2, 1, 1, np.array([1.0]), jacobian=lambda x: np.array([[5.0]]))


def test_graph_model_closed_form():
    nf = nfm.compute_normal_form(nfm.demo_model("graph"))
    assert nf.splitting.dims == {"ker": 1, "coimg": 1, "coker": 0, "img": 1}
    # ker = e1, coimg = e2 up to sign; psi^{-1}(a, b) = (a, b - a^2) once signs are absorbed
    sk, sc = np.sign(nf.splitting.ker[0, 0]), np.sign(nf.splitting.coimg[1, 0])
    si = np.sign(nf.splitting.img[0, 0])
    for a, b in [(0.1, 0.2), (-0.3, 0.05)]:
        x1, x2 = nf.psi.point(nf.psi.inverse([a, b]))
        assert x1 == pytest.approx(sk * a)
        assert x2 + x1 ** 2 == pytest.approx(b * nf.splitting.T_hat[0, 0] * si, abs=1e-12)
    assert nf.f_sing([0.2, 0.1]).size == 0


def test_identity_model():
    nf = nfm.compute_normal_form(nfm.demo_model("identity"))
    x = np.array([0.1, -0.2])
    assert np.allclose(nf.psi.point(nf.psi.inverse(nf.psi(x))), nf.psi.point(x))
    assert nf.splitting.dims["ker"] == 0


def test_fold_model():
    nf = nfm.compute_normal_form(nfm.demo_model("fold"))
    assert nf.splitting.dims == {"ker": 1, "coimg": 1, "coker": 1, "img": 1}
    s = np.sign(nf.splitting.coker[1, 0])
    for t in (0.3, -0.1, 0.05):
        assert nf.f_sing([t, 0.0])[0] * s == pytest.approx(t ** 2, abs=1e-12)
        assert abs(nf.f_sing([0.0, t])[0]) <= 1e-12
    # target chart is the identity here
    y = np.array([0.2, -0.3])
    assert np.allclose(nf.phi(y), y, atol=1e-12)


def test_mixed_model():
    nf = nfm.compute_normal_form(nfm.demo_model("mixed"))
    s = np.sign(nf.splitting.coker[1, 0])
    assert nf.f_sing([0.25, 0.0])[0] * s == pytest.approx(0.0625, abs=1e-10)
    assert abs(nf.f_sing([0.0, 0.1])[0]) <= 1e-10


def test_submersion_has_no_singular_part():
    nf = nfm.compute_normal_form(nfm.demo_model("submersion"))
    assert nf.splitting.dims["coker"] == 0
    ver = nf.verify(32)
    assert ver["chart_identity"]["max_residual"] <= 1e-6


@pytest.mark.parametrize("name", nfm.DEMO_MODELS)
def test_demo_models_verify(name):
    ver = nfm.compute_normal_form(nfm.demo_model(name)).verify(64)
    assert ver["f_sing_vanishes_on_coimg"]["max_residual"] <= 1e-8
    assert ver["f_sing_derivative_at_origin"]["max_residual"] <= 1e-6
    assert ver["chart_identity"]["max_residual"] <= 1e-6
    assert ver["zero_set"]["max_residual"] <= 1e-8
    assert ver["chart_identity"]["n_samples"] == 64


def test_validity_radius_dyadic():
    nf = nfm.compute_normal_form(nfm.demo_model("cubic"))
    r = nf.validity_radius
    assert r in nfm.RADII


def test_no_local_inversion():
    # f(x) = x - x^2 has a fold at x = 1/2, so values above 1/4 have no preimage
    f = nfm.SmoothMap(lambda x: x - x ** 2, 1, 1, np.zeros(1))
    chart = nfm.DomainChart(f, nfm.split_jacobian(f.jac(np.zeros(1))))
    with pytest.raises(nfm.NoLocalInversion):
        chart.inverse([1.0])
    assert nfm.deform_domain(f, chart.sp).validity_radius <= 0.25


def test_mgs_origin_opposite_weights():
    T = act.Torus([[1, -1]])
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.zeros(4))
    assert mgs.dim_ker == 4 and mgs.strong
    assert mgs.momentum_identity(128)["max_residual"] <= 1e-6
    assert mgs.quadratic_identity(128)["max_residual"] <= 1e-8
    assert np.allclose(mgs.omega0, mgs.omega0 @ np.eye(4)) and mgs.nondegeneracy() > 0.1


def test_mgs_free_point():
    T = act.Torus([[1, -1]])
    m = np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2)
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, m)
    assert mgs.dim_ker == 2
    assert mgs.nondegeneracy() > 1e-3
    assert mgs.momentum_identity(128)["max_residual"] <= 1e-6
    assert np.allclose(mgs.J_sing(np.array([0.01, -0.02])), 0.0)


def test_mgs_rank_two_torus():
    T = act.Torus(np.eye(2, dtype=int))
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.array([1.0, 0, 0, 0]))
    assert mgs.momentum_identity(64)["max_residual"] <= 1e-6
    assert mgs.quadratic_identity(64)["max_residual"] <= 1e-8


def test_strong_upgrade_constant_form_unchanged():
    T = act.Torus([[1, -1]])
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.zeros(4))
    assert nfm.strong_upgrade(mgs) is mgs


def _toy(scale, J_sing, gens):
    W0 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return nfm.MGSData(2, lambda x: scale(np.asarray(x)) * W0, J_sing, gens, radius=0.5)


def test_moser_pulls_back_to_constant_form():
    W0 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    scale = lambda x: 1 + x[0] ** 2
    F = nfm.moser_map(lambda x: scale(x) * W0, 2, dt=1e-2)
    for x in ([0.2, 0.1], [-0.1, 0.25]):
        x = np.array(x)
        D = nfm.fd_jacobian(F, x)
        assert np.abs(D.T @ (scale(F(x)) * W0) @ D - W0).max() <= 1e-6


def test_moser_upgrade_rotation_toy():
    # omega_bar = (1 + |x|^2) w0 with the rotation action; J = r^2/2 + r^4/4 satisfies the identity
    R = np.array([[[0.0, -1.0], [1.0, 0.0]]])
    mgs = _toy(lambda x: 1 + x @ x, lambda x: np.array([0.5 * (x @ x) + 0.25 * (x @ x) ** 2]), R)
    assert mgs.momentum_identity(64)["max_residual"] <= 1e-6
    up = nfm.strong_upgrade(mgs)
    assert up.strong
    assert up.info["quadratic_identity_after_upgrade"] <= 1e-6


def test_upgrade_refused_on_degenerate_form():
    mgs = _toy(lambda x: x[0], lambda x: np.zeros(0), np.zeros((0, 2, 2)))
    with pytest.raises(nfm.UpgradeRefused):
        nfm.strong_upgrade(mgs)


def test_approximation_property_opposite_weights():
    T = act.Torus([[1, -1]])
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.zeros(4))
    rep = nfm.approximation_property_check(mgs, budget=50)
    assert rep["cont=0;disc=0"]["status"] == "found"
    w = np.array(rep["cont=0;disc=0"]["witness"])
    assert abs(np.linalg.norm(w[:2]) - np.linalg.norm(w[2:])) <= 1e-8


def test_approximation_property_equal_weights():
    T = act.Torus([[1, 1]])
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.zeros(4))
    rep = nfm.approximation_property_check(mgs, budget=30)
    assert set(rep) == {"cont=1;disc=0"}


def test_approximation_property_finite_group():
    Z2 = act.FiniteGroup([np.eye(4), -np.eye(4)])
    mgs = nfm.assemble_mgs(Z2.lie_algebra_action(), Z2, np.zeros(4))
    rep = nfm.approximation_property_check(mgs, orbit_types=[(0, 1)], budget=20)
    assert rep["cont=0;disc=1"]["status"] == "found"


def test_approximation_property_inconclusive():
    T = act.Torus([[1, 1]])
    mgs = nfm.assemble_mgs(T.lie_algebra_action(), T, np.zeros(4))
    rep = nfm.approximation_property_check(mgs, orbit_types=[(0, 0)], budget=10)
    assert rep["cont=0;disc=0"]["status"] == "inconclusive"
