"""Command line entry point: verification suites and reductions with JSON reports.

Exit codes: 0 all checks pass, 2 some check failed, 1 usage or input error.
"""
from __future__ import annotations

import argparse
import functools
import json
import os
import sys
import time

import numpy as np

from . import action as act
from . import gauge2d as gz
from . import normalform as nfm
from . import reduction as red
from . import repvar as rv
from . import symplin as sl

SCHEMA = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


class Report:
    def __init__(self, tol_scale: float = 1.0):
        self.tol_scale = tol_scale
        self.checks: list = []
        self.data: dict = {}

    def check(self, name: str, anchor: str, residual, tolerance: float) -> bool:
        tol = tolerance * self.tol_scale
        r = float(residual)
        ok = bool(np.isfinite(r) and r <= tol)
        self.checks.append({"name": name, "anchor": anchor, "max_residual": r, "tolerance": tol, "pass": ok})
        return ok

    def expect(self, name: str, anchor: str, ok: bool) -> bool:
        """Exact (discrete) check recorded with residual 0 or 1."""
        self.checks.append({"name": name, "anchor": anchor, "max_residual": 0.0 if ok else 1.0,
                            "tolerance": 0.0, "pass": bool(ok)})
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)


# ---------------------------------------------------------------------------
# random generators shared by the suites


def random_space(rng, n: int) -> sl.SymplecticSpace:
    A = rng.normal(size=(2 * n, 2 * n))
    W = A - A.T
    return sl.SymplecticSpace(W)


def random_subspace(rng, dim: int) -> sl.Subspace:
    k = int(rng.integers(0, dim + 1))
    return sl.Subspace.span(rng.normal(size=(dim, k)), dim) if k else sl.Subspace.zero(dim)


def random_torus(rng, k_max: int = 2, n_max: int = 3, w_max: int = 3) -> act.Torus:
    k = int(rng.integers(1, k_max + 1))
    n = int(rng.integers(1, n_max + 1))
    return act.Torus(rng.integers(-w_max, w_max + 1, size=(k, n)))


def random_finite_group(rng) -> act.FiniteGroup:
    """A random cyclic rotation group acting on C^n by integer weights (always symplectic)."""
    n = int(rng.integers(1, 4))
    order = int(rng.integers(2, 7))
    w = rng.integers(0, order, size=n)
    gen = act.Torus(w[None, :]).element([1.0 / order])
    return act.FiniteGroup.generated_by([gen])


def random_compact_rep(rng, i: int):
    kind = i % 3
    if kind == 0:
        return random_torus(rng)
    if kind == 1:
        return random_finite_group(rng)
    return act.su2_on_c2()


def coupled_oscillator() -> act.HamiltonianSystem:
    """Hamiltonian on C^2 invariant under weights (1, -1): two oscillators plus |z1|^2 |z2|^2 and Re(z1 z2)."""
    def h(x):
        r1, r2 = x[0] ** 2 + x[1] ** 2, x[2] ** 2 + x[3] ** 2
        return 0.5 * r1 + r2 + 0.25 * r1 * r2 + 0.5 * (x[0] * x[2] - x[1] * x[3])

    def grad(x):
        r1, r2 = x[0] ** 2 + x[1] ** 2, x[2] ** 2 + x[3] ** 2
        return np.array([x[0] * (1 + 0.5 * r2) + 0.5 * x[2], x[1] * (1 + 0.5 * r2) - 0.5 * x[3],
                         x[2] * (2 + 0.5 * r1) + 0.5 * x[0], x[3] * (2 + 0.5 * r1) - 0.5 * x[1]])

    return act.HamiltonianSystem(h, grad)


# ---------------------------------------------------------------------------
# suites


def suite_symplin(rep: Report, rng, quick: bool = False) -> None:
    n_sub = 50 if quick else 200
    worst = 0.0
    for _ in range(n_sub):
        dim = 2 * int(rng.integers(1, 11))
        space = random_space(rng, dim // 2)
        V = random_subspace(rng, dim)
        worst = max(worst, sl.double_orthogonal_check(space, V)[1])
    rep.check("double_orthogonal", "V^omega^omega = V", worst, 1e-8)

    agree = True
    for _ in range(n_sub):
        dim = 2 * int(rng.integers(1, 6))
        space = random_space(rng, dim // 2)
        V = random_subspace(rng, dim)
        try:
            sl.is_symplectic_subspace(space, V)
        except sl.ConsistencyError:
            agree = False
    rep.expect("symplectic_subspace_three_way", "V cap V^omega = 0 iff X = V + V^omega iff rank", agree)

    worst = 0.0
    for _ in range(20):
        space = random_space(rng, 3)
        J = sl.compatible_complex_structure(space)
        g = space.omega @ J.J
        for _ in range(5):
            V = random_subspace(rng, 6)
            lhs = sl.symplectic_orthogonal(space, V)
            rhs = sl.Subspace.span(J.J @ V.complement(g).basis, 6) if V.dim < 6 else sl.Subspace.zero(6)
            worst = max(worst, lhs.distance(rhs))
    rep.check("complex_structure_orthogonal", "V^omega = J V^perp for the associated metric", worst, 1e-8)

    worst = 0.0
    for _ in range(20):
        space = random_space(rng, 3)
        S = sl.darboux_basis(space)
        worst = max(worst, np.abs(S.T @ space.omega @ S - sl.standard_form_matrix(3)).max())
    rep.check("darboux_basis", "symplectic Gram-Schmidt reaches the standard form", worst, 1e-10)

    worst = 0.0
    for i in range(20):
        g = random_compact_rep(rng, i)
        space = act.complex_space(g.dim // 2)
        XG, comp = sl.fixed_point_splitting(space, g)
        M = np.hstack([XG.basis, comp.basis])
        Minv = np.linalg.inv(M)
        P = M[:, :XG.dim] @ Minv[:XG.dim] + M[:, XG.dim:] @ Minv[XG.dim:]
        worst = max(worst, np.linalg.norm(P - np.eye(space.dim)))
    rep.check("invariant_splitting", "X = X_G + X_G^omega with X_G symplectic", worst, 1e-8)


def suite_action(rep: Report, rng, quick: bool = False) -> None:
    n = 200 if quick else 1000
    worst = 0.0
    for _ in range(n):
        T = random_torus(rng)
        a = T.lie_algebra_action()
        x, v = rng.normal(size=T.dim), rng.normal(size=T.dim)
        worst = max(worst, act.momentum_relation_residual(a, x, v, int(rng.integers(a.k))))
    rep.check("momentum_relation", "xi* _| omega + kappa(dJ, xi) = 0", worst, 1e-12)

    G = act.su2_on_c2()
    worst = 0.0
    for g in G.sample_elements(rng, 20 if quick else 100):
        x = rng.normal(size=4)
        worst = max(worst, act.equivariance_residual(G.algebra, G, x, g))
        worst = max(worst, max(act.equivariance_residual(G.algebra, G, x, i) for i in range(3)))
    rep.check("equivariance_su2", "J(g x) = CoAd_g J(x) and its infinitesimal form", worst, 1e-10)

    S1 = act.Torus([[1]])
    a = S1.lie_algebra_action()
    sys_ = act.HamiltonianSystem(lambda x: 0.5 * x @ x, lambda x: x)
    t_end = 2.0 if quick else 10.0
    _, drift = act.hamiltonian_flow_noether(a, sys_, np.array([1.0, 0.0]), t_end, 1e-3)
    rep.check("noether_oscillator", "J conserved by G-invariant Hamiltonian flows", drift, 1e-8)
    sys4 = act.HamiltonianSystem(lambda x: 0.25 * (x @ x) ** 2, lambda x: (x @ x) * x)
    _, drift4 = act.hamiltonian_flow_noether(a, sys4, np.array([1.0, 0.0]), t_end, 1e-3)
    rep.check("noether_quartic", "J conserved by G-invariant Hamiltonian flows", drift4, 1e-6)
    rep.data["noether"] = {"t_end": t_end, "dt": 1e-3, "drift_quadratic": drift, "drift_quartic": drift4}

    T = act.Torus([[1, -1]])
    a = T.lie_algebra_action()
    stratum = [s for s in red.strata_of_zero_level(a, T, seed=0) if s.reduced_dim == 2][0]
    dyn = red.reduced_dynamics_check(a, T, coupled_oscillator(), stratum, t_end=1.0 if quick else 10.0)
    rep.data["reduced_dynamics"] = dyn
    rep.check("reduced_flow", "invariant flows on the level set project to the reduced flow",
              dyn["projected_vs_reduced_mismatch"], 1e-4)
    rep.expect("orbit_type_preserved", "flows of invariant Hamiltonians keep the orbit type",
               dyn["orbit_type_changes"] == 0 and dyn["chart_exit"] is None)


def parse_weights(text: str) -> np.ndarray:
    rows = [r for r in text.replace(",", ";").split(";") if r.strip()]
    try:
        W = np.array([[int(v) for v in r.split()] for r in rows])
    except ValueError as e:
        raise UsageError(f"weights must be integers: {e}") from None
    if W.ndim != 2 or W.size == 0:
        raise UsageError("weights must form a k x n integer matrix")
    return W


def suite_reduce(rep: Report, rng, weights: np.ndarray, mu=None, quick: bool = False) -> None:
    T = act.Torus(weights)
    a = T.lie_algebra_action()
    report = red.reduction_report(a, T, mu, seed=int(rng.integers(2 ** 31)))
    strata = red.strata_of_zero_level(a, T, mu, seed=0)
    rep.data["reduction"] = report
    rep.data["reduced_dims"] = [s.reduced_dim for s in strata]
    worst = max((max(s.residuals.values()) for s in strata), default=0.0)
    rep.check("stratum_residuals", "reduced forms are nondegenerate; local model dimension", worst, 1e-8)
    rep.expect("frontier_no_violation", "frontier condition", not report["frontier"]["violations"])
    bif, parity_ok = 0.0, True
    level = np.zeros(a.k) if mu is None else np.asarray(mu, dtype=float)
    for i in range(10 if quick else 50):
        x = rng.normal(size=T.dim)
        if i % 2 and np.allclose(level, 0):
            x = red.project_to_level(a, x).x
        bif = max(bif, red.bifurcation_check(a, x)["max"])
        parity_ok &= red.witt_artin(a, T, x).parity % 2 == 0
    rep.check("bifurcation_identities", "ker DJ = (g.m)^omega and companions", bif, 1e-8)
    rep.expect("witt_artin_parity", "2 dim g_m - dim E is even", parity_ok)


def suite_normalform(rep: Report, rng, model: str, quick: bool = False) -> None:
    models = nfm.DEMO_MODELS if model == "all" else (model,)
    out = {}
    for name in models:
        nf = nfm.compute_normal_form(nfm.demo_model(name))
        ver = nf.verify(16 if quick else 64)
        out[name] = {"splitting": nf.splitting.dims, "validity_radius": nf.validity_radius,
                     "checks": ver}
        rep.check(f"{name}:f_sing_on_coimg", "f_sing(0, x2) = 0", ver["f_sing_vanishes_on_coimg"]["max_residual"], 1e-8)
        rep.check(f"{name}:f_sing_derivative", "D f_sing(0) = 0", ver["f_sing_derivative_at_origin"]["max_residual"], 1e-6)
        rep.check(f"{name}:chart_identity", "normal form in the deformed charts",
                  ver["chart_identity"]["max_residual"], 1e-6)
    rep.data["normal_forms"] = out
    if model == "all":
        T = act.Torus([[1, -1]])
        a = T.lie_algebra_action()
        for label, m in (("origin", np.zeros(4)), ("free", np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2))):
            mgs = nfm.assemble_mgs(a, T, m)
            n = 32 if quick else 128
            rep.check(f"mgs_{label}:momentum_identity", "omega_bar(xi.x, w) + kappa(DJ_sing w, xi) = 0",
                      mgs.momentum_identity(n)["max_residual"], 1e-6)
            rep.check(f"mgs_{label}:quadratic_identity", "strong form: J_sing = 1/2 omega_bar_0(x, xi.x)",
                      mgs.quadratic_identity(n)["max_residual"], 1e-8)


def suite_gauge_flat(rep: Report, rng, genus: int, quick: bool = False) -> None:
    mesh = gz.build_genus_surface(genus)
    hdim = gz.harmonic_dimension(mesh)
    rep.data["mesh"] = {"genus": genus, "vertices": mesh.n_vertices, "edges": mesh.n_edges, "faces": mesh.n_faces}
    rep.data["harmonic_dim"] = hdim
    rep.data["identity_convention"] = gz.IDENTITY_CONVENTION
    rep.expect("harmonic_dim", "harmonic 1-cochains have dimension 2g", hdim == 2 * genus)
    worst = 0.0
    for _ in range(20 if quick else 100):
        th, ph, al = rng.normal(size=mesh.n_edges), rng.normal(size=mesh.n_vertices), rng.normal(size=mesh.n_edges)
        worst = max(worst, gz.momentum_relation_residual(mesh, th, ph, al))
    rep.check("momentum_identity", "omega(-d0 phi, alpha) + kappa(DJ alpha, phi) = 0", worst, 1e-12)
    worst = 0.0
    for _ in range(5):
        parts = gz.hodge_split(mesh, rng.normal(size=mesh.n_edges))
        worst = max(worst, gz.hodge_orthogonality(mesh, parts))
    rep.check("hodge_orthogonality", "exact, coexact and harmonic parts are orthogonal", worst, 1e-10)
    basis = gz.homology_cycle_basis(mesh)
    ric = gz.reduced_intersection_check(mesh, basis)
    rep.data["intersection_matrix"] = ric["intersection"].tolist()
    rep.expect("reduced_intersection", "reduced form on harmonics equals the intersection form", ric["ok"])
    inv, hit = 0.0, 0.0
    for _ in range(10 if quick else 50):
        target = rng.uniform(-np.pi, np.pi, 2 * genus)
        th = gz.flat_connection_from_holonomy(basis, target)
        w = gz.wilson_flat_moduli(mesh, th, basis.cycles)
        hit = max(hit, np.abs(gz.wrap_angle(w - target)).max())
        th2 = gz.gauge_action(mesh, th, rng.normal(size=mesh.n_vertices) * 3)
        inv = max(inv, np.abs(gz.wrap_angle(gz.wilson_loops(mesh, th2, basis.cycles) - w)).max())
    rep.check("wilson_gauge_invariance", "holonomy is gauge invariant", inv, 1e-10)
    rep.check("wilson_surjectivity", "harmonic construction reaches every holonomy", hit, 1e-6)


def suite_gauge_ym(rep: Report, rng, genus: int, chern: int, quick: bool = False) -> None:
    mesh = gz.build_genus_surface(genus)
    th = gz.central_ym_connection(mesh, chern)
    F, c = gz.curvature_and_chern(mesh, th)
    rep.data["chern"] = c
    rep.data["curvature_total"] = float(F.sum())
    rep.expect("chern_number", "Chern class equals total curvature over 2 pi", c == chern)
    rep.check("curvature_total", "sum of curvature is 2 pi c", abs(F.sum() - 2 * np.pi * chern), 1e-8)
    rep.check("curvature_uniform", "central connection has constant curvature",
              float(np.ptp(F)) if F.size else 0.0, 1e-10)
    ok = True
    for _ in range(20 if quick else 100):
        th2 = gz.gauge_action(mesh, th, rng.normal(size=mesh.n_vertices) * 10)
        ok &= gz.curvature_and_chern(mesh, th2)[1] == chern
    rep.expect("chern_gauge_invariance", "Chern number is gauge invariant", ok)


def suite_repvar(rep: Report, rng, genus: int, samples: int) -> None:
    seeds = [int(s) for s in rng.integers(0, 2 ** 31, size=samples)]
    s = rv.survey(genus, seeds)
    rep.data["repvar"] = s
    frac = s["converged"] / max(samples, 1)
    rep.check("convergence_fraction", "relator solved", 1.0 - frac, 0.1)
    rep.expect("reduced_dims_even", "strata are even dimensional",
               all(c["all_even"] for c in s["classes"].values()))
    if genus >= 2 and "center" in s["classes"]:
        c = s["classes"]["center"]
        rep.expect("irreducible_dims", "hom dimension 6g-3, reduced 6g-6",
                   c["hom_dimension"] == [6 * genus - 3] and c["reduced_dimension"] == [6 * genus - 6])


# ---------------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--seed", type=int, default=default, help="RNG seed (default: $MOMENTA_SEED or 0)")
    p.add_argument("--report", type=str, default=default, help="write the JSON report here instead of stdout")
    p.add_argument("--tol-scale", type=float, default=1.0 if default is None else default,
                   help="multiply every default tolerance")


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    p = _Parser(prog="momenta", description="Momentum map and singular reduction toolkit")
    _global_flags(p, None)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sub.add_parser = functools.partial(sub.add_parser, parents=[common])

    s = sub.add_parser("symplin")
    s.add_argument("action", choices=["verify"])

    r = sub.add_parser("reduce")
    r.add_argument("kind", choices=["linear"])
    r.add_argument("--weights", required=True, help='k x n integer weights, rows separated by ";"')
    r.add_argument("--mu", default=None, help="level as whitespace separated numbers")

    n = sub.add_parser("normalform")
    n.add_argument("action", choices=["demo"])
    n.add_argument("--model", default="all", choices=["all", *nfm.DEMO_MODELS])

    g = sub.add_parser("gauge")
    g.add_argument("action", choices=["flat", "ym"])
    g.add_argument("--genus", type=int, required=True)
    g.add_argument("--chern", type=int, default=1)

    v = sub.add_parser("repvar")
    v.add_argument("action", choices=["solve"])
    v.add_argument("--genus", type=int, required=True)
    v.add_argument("--samples", type=int, default=20)

    a = sub.add_parser("all")
    a.add_argument("--quick", action="store_true")
    return p


def execute(argv) -> tuple[int, dict]:
    parser = build_parser()
    args = parser.parse_args(argv)
    seed = args.seed if args.seed is not None else int(os.environ.get("MOMENTA_SEED", "0"))
    rng = np.random.default_rng(seed)
    rep = Report(args.tol_scale)
    t0 = time.perf_counter()
    if args.cmd == "symplin":
        suite_symplin(rep, rng)
    elif args.cmd == "reduce":
        W = parse_weights(args.weights)
        mu = None
        if args.mu is not None:
            mu = np.array([float(x) for x in args.mu.replace(",", " ").split()])
            if mu.size != W.shape[0]:
                raise UsageError("mu must have one entry per weight row")
        suite_reduce(rep, rng, W, mu)
    elif args.cmd == "normalform":
        suite_normalform(rep, rng, args.model)
    elif args.cmd == "gauge":
        if args.genus < 1:
            raise UsageError("genus must be at least 1")
        if args.action == "flat":
            suite_gauge_flat(rep, rng, args.genus)
        else:
            suite_gauge_ym(rep, rng, args.genus, args.chern)
    elif args.cmd == "repvar":
        if args.genus < 1 or args.samples < 1:
            raise UsageError("genus and samples must be positive")
        suite_repvar(rep, rng, args.genus, args.samples)
    elif args.cmd == "all":
        q = args.quick
        suite_symplin(rep, rng, q)
        suite_action(rep, rng, q)
        suite_normalform(rep, rng, "all", q)
        suite_reduce(rep, rng, np.array([[1, -1]]), None, q)
        for g in (1, 2) if q else (1, 2, 3):
            suite_gauge_flat(rep, rng, g, q)
            suite_gauge_ym(rep, rng, g, 1, q)
        suite_repvar(rep, rng, 2, 10 if q else 100)
    report = {
        "report_path": args.report,
        "schema": SCHEMA,
        "command": list(argv),
        "seed": seed,
        "tol_scale": args.tol_scale,
        "checks": rep.checks,
        "data": rep.data,
        "pass": rep.passed,
        "wall_time": time.perf_counter() - t0,
    }
    return (0 if rep.passed else 2), report


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_default)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        code, report = execute(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 1
    except (UsageError, ValueError) as e:
        sys.stderr.write(f"momenta: error: {e}\n")
        return 1
    path = report.pop("report_path")
    text = dumps(report)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
