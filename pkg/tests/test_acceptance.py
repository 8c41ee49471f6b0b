"""Acceptance criteria, one test per criterion.

Each test prints a single line ``[PASS|FAIL] criterion N: ...`` with the measured
value and the pinned tolerance. Run directly with ``python tests/test_acceptance.py``
to get the summary without pytest.
"""
import sys
import time

import numpy as np
import pytest

from momenta import action as act
from momenta import cli
from momenta import gauge2d as gz
from momenta import normalform as nfm
from momenta import reduction as red
from momenta import repvar as rv
from momenta import symplin as sl

SEED = 12345


def report(n: int, ok: bool, text: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    capman = getattr(report, "capman", None)
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
    else:
        print(line, flush=True)


@pytest.fixture(autouse=True)
def _uncaptured(request):
    report.capman = request.config.pluginmanager.getplugin("capturemanager")
    yield
    report.capman = None


def test_criterion_01_double_orthogonal():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        sp = cli.random_space(rng, n)
        V = cli.random_subspace(rng, 2 * n)
        worst = max(worst, sl.double_orthogonal_check(sp, V)[1])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    report(1, ok, f"max projector distance {worst:.2e} <= 1e-8 over 200 subspaces, {dt:.2f}s < 5s")
    assert ok


def test_criterion_02_invariant_splitting():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(20):
        g = cli.random_compact_rep(rng, i)
        sp = act.complex_space(g.dim // 2)
        XG, comp = sl.fixed_point_splitting(sp, g)
        assert sl.is_symplectic_subspace(sp, XG)
        # oblique projectors onto the two summands add up to the identity
        B = np.hstack([XG.basis, comp.basis])
        Binv = np.linalg.inv(B)
        P = B[:, :XG.dim] @ Binv[:XG.dim] + B[:, XG.dim:] @ Binv[XG.dim:]
        worst = max(worst, np.linalg.norm(P - np.eye(sp.dim)), abs(B.shape[1] - sp.dim))
    ok = worst <= 1e-8
    report(2, ok, f"direct-sum residual {worst:.2e} <= 1e-8 on 20 compact reps")
    assert ok


def test_criterion_03_momentum_relation():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        T = cli.random_torus(rng)
        a = T.lie_algebra_action()
        x, v = rng.normal(size=T.dim), rng.normal(size=T.dim)
        worst = max(worst, act.momentum_relation_residual(a, x, v, int(rng.integers(a.k))))
    ok = worst <= 1e-12
    report(3, ok, f"max residual {worst:.2e} <= 1e-12 on 1000 torus triples")
    assert ok


def test_criterion_04_bifurcation_and_parity():
    rng = np.random.default_rng(SEED)
    reps = [act.Torus([[1, -1]]), act.Torus([[1, 2], [0, 1]]), act.Torus([[1, -1, 2]]), act.su2_on_c2()]
    worst, parity_ok = 0.0, True
    for g in reps:
        a = g.lie_algebra_action()
        for i in range(50):
            x = rng.normal(size=g.dim)
            if i % 2 and g.variant == "torus":
                x = red.project_to_level(a, x).x
            worst = max(worst, red.bifurcation_check(a, x)["max"])
            parity_ok &= red.witt_artin(a, g, x).parity % 2 == 0
    ok = worst <= 1e-8 and parity_ok
    report(4, ok, f"bifurcation distance {worst:.2e} <= 1e-8 at 50 points x {len(reps)} reps; parity even: {parity_ok}")
    assert ok


def test_criterion_05_normal_form_contract():
    worst = {"coimg": 0.0, "deriv": 0.0, "chart": 0.0}
    for name in nfm.DEMO_MODELS:
        v = nfm.compute_normal_form(nfm.demo_model(name)).verify(64)
        worst["coimg"] = max(worst["coimg"], v["f_sing_vanishes_on_coimg"]["max_residual"])
        worst["deriv"] = max(worst["deriv"], v["f_sing_derivative_at_origin"]["max_residual"])
        worst["chart"] = max(worst["chart"], v["chart_identity"]["max_residual"])
    ok = worst["coimg"] <= 1e-8 and worst["deriv"] <= 1e-6 and worst["chart"] <= 1e-6
    report(5, ok, f"f_sing(0,x2) {worst['coimg']:.2e} <= 1e-8, |Df_sing(0)| {worst['deriv']:.2e} <= 1e-6, "
                  f"chart identity {worst['chart']:.2e} <= 1e-6 on {len(nfm.DEMO_MODELS)} models")
    assert ok


def test_criterion_06_mgs_identities():
    T = act.Torus([[1, -1]])
    a = T.lie_algebra_action()
    mom, quad = 0.0, 0.0
    for m in (np.zeros(4), np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2)):
        mgs = nfm.assemble_mgs(a, T, m)
        mom = max(mom, mgs.momentum_identity(128)["max_residual"])
        quad = max(quad, mgs.quadratic_identity(128)["max_residual"])
    ok = mom <= 1e-6 and quad <= 1e-8
    report(6, ok, f"MGS momentum identity {mom:.2e} <= 1e-6, strong quadratic identity {quad:.2e} <= 1e-8")
    assert ok


def test_criterion_07_linear_singular_reduction():
    t0 = time.perf_counter()
    T = act.Torus([[1, -1]])
    a = T.lie_algebra_action()
    strata = red.strata_of_zero_level(a, T, seed=SEED)
    dims = [s.reduced_dim for s in strata]
    free = [s for s in strata if s.reduced_dim == 2]
    full_rank = bool(free) and np.linalg.matrix_rank(free[0].reduced_form) == 2
    fr = red.frontier_check(strata, a, T, seed=SEED)
    order_ok = fr["order"] == [(strata[0].orbit_type_id, strata[1].orbit_type_id)] and not fr["violations"]
    T2 = act.Torus([[1, 1]])
    single = [s.reduced_dim for s in red.strata_of_zero_level(T2.lie_algebra_action(), T2, seed=SEED)]
    dt = time.perf_counter() - t0
    ok = dims == [0, 2] and full_rank and single == [0] and order_ok and dt < 30
    report(7, ok, f"(1,-1) reduced dims {dims}, 2x2 form full rank {full_rank}; (1,1) dims {single}; "
                  f"origin < free {order_ok}; {dt:.2f}s < 30s")
    assert ok


def test_criterion_08_noether_and_reduced_dynamics():
    S1 = act.Torus([[1]])
    osc = act.HamiltonianSystem(lambda x: 0.5 * x @ x, lambda x: x)
    _, drift = act.hamiltonian_flow_noether(S1.lie_algebra_action(), osc, np.array([1.0, 0.0]), 10.0, 1e-3)
    T = act.Torus([[1, -1]])
    a = T.lie_algebra_action()
    free = [s for s in red.strata_of_zero_level(a, T, seed=SEED) if s.reduced_dim == 2][0]
    dyn = red.reduced_dynamics_check(a, T, cli.coupled_oscillator(), free, t_end=10.0, dt=1e-3)
    mism = dyn["projected_vs_reduced_mismatch"]
    ok = drift <= 1e-6 and mism <= 1e-4 and dyn["t_compared"] >= 10.0 - 1e-9
    report(8, ok, f"Noether drift {drift:.2e} <= 1e-6 over t=10; projected vs reduced mismatch {mism:.2e} <= 1e-4 "
                  f"(compared to t={dyn['t_compared']:.2f})")
    assert ok


def test_criterion_09_gauge_module():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    hdim_ok, mom, chern_ok, ym = True, 0.0, True, 0.0
    for g in (1, 2, 3):
        mesh = gz.build_genus_surface(g)
        hdim_ok &= gz.harmonic_dimension(mesh) == 2 * g
        for _ in range(20):
            mom = max(mom, gz.momentum_relation_residual(mesh, rng.normal(size=mesh.n_edges),
                                                         rng.normal(size=mesh.n_vertices),
                                                         rng.normal(size=mesh.n_edges)))
        for c in (-2, 1):
            th = gz.central_ym_connection(mesh, c)
            F, cc = gz.curvature_and_chern(mesh, th)
            chern_ok &= cc == c
            ym = max(ym, abs(F.sum() - 2 * np.pi * c), float(np.ptp(F)))
            for _ in range(100):
                chern_ok &= gz.curvature_and_chern(mesh, gz.gauge_action(mesh, th, 10 * rng.normal(size=mesh.n_vertices)))[1] == c
    dt = time.perf_counter() - t0
    ok = hdim_ok and mom <= 1e-12 and chern_ok and ym <= 1e-8 and dt < 60
    report(9, ok, f"harmonic dim = 2g {hdim_ok}; momentum identity {mom:.2e} <= 1e-12; Chern exact and gauge "
                  f"invariant {chern_ok}; uniform YM residual {ym:.2e} <= 1e-8; {dt:.2f}s < 60s")
    assert ok


def test_criterion_10_flat_moduli():
    rng = np.random.default_rng(SEED)
    inv, hit, inter_ok = 0.0, 0.0, True
    for g in (1, 2, 3):
        mesh = gz.build_genus_surface(g)
        basis = gz.homology_cycle_basis(mesh)
        res = gz.reduced_intersection_check(mesh, basis)
        inter_ok &= res["ok"]
        for _ in range(50):
            target = rng.uniform(-np.pi, np.pi, 2 * g)
            th = gz.flat_connection_from_holonomy(basis, target)
            w = gz.wilson_flat_moduli(mesh, th, basis.cycles)
            hit = max(hit, float(np.abs(gz.wrap_angle(w - target)).max()))
            th2 = gz.gauge_action(mesh, th, 5 * rng.normal(size=mesh.n_vertices))
            inv = max(inv, float(np.abs(gz.wrap_angle(gz.wilson_loops(mesh, th2, basis.cycles) - w)).max()))
    ok = inv <= 1e-10 and hit <= 1e-6 and inter_ok
    report(10, ok, f"Wilson gauge invariance {inv:.2e} <= 1e-10; 50 targets hit to {hit:.2e} <= 1e-6; "
                   f"harmonic form full rank, Darboux-congruent, unimodular intersection {inter_ok}")
    assert ok


def test_criterion_11_representation_variety():
    t0 = time.perf_counter()
    s = rv.survey(2, range(SEED, SEED + 100))
    dt = time.perf_counter() - t0
    frac = s["converged"] / s["samples"]
    center = s["classes"].get("center", {})
    dims_ok = center.get("hom_dimension") == [9] and center.get("reduced_dimension") == [6]
    even = all(c["all_even"] for c in s["classes"].values())
    ok = frac >= 0.9 and dims_ok and even and dt < 120
    report(11, ok, f"converged {frac:.0%} >= 90%; center hom {center.get('hom_dimension')} reduced "
                   f"{center.get('reduced_dimension')} (want [9], [6]); all even {even}; {dt:.2f}s < 120s")
    assert ok


def test_criterion_12_determinism():
    runs = []
    for _ in range(2):
        code, rep = cli.execute(["all", "--quick", "--seed", "42"])
        rep.pop("wall_time")
        runs.append(cli.dumps(rep))
    ok = runs[0] == runs[1] and code == 0
    report(12, ok, f"'all --quick --seed 42' twice: identical reports {runs[0] == runs[1]}, exit {code}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
