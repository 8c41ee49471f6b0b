"""Singular symplectic reduction of linear compact-group actions.

Level sets of the quadratic momentum map are split into orbit-type strata.
Each stratum carries the reduced form obtained by restricting omega to the
stabilizer-fixed part of the symplectic normal space E at a witness point.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .action import (CompactGroupRep, HamiltonianSystem, LieAlgebraAction, Torus,
                     _momentum_components, hamiltonian_vector_field, momentum_jacobian, rk4)
from .symplin import Subspace, null_space, numerical_rank, symplectic_orthogonal

WITNESSES = 8
SUB_TOL = 1e-8


def _span(A, n) -> Subspace:
    A = np.asarray(A, dtype=float).reshape(n, -1)
    if A.shape[1] == 0 or np.linalg.norm(A) <= 1e-14:
        return Subspace.zero(n)
    return Subspace.span(A, n, eps=1e-10)


def _null(A, n) -> Subspace:
    A = np.asarray(A, dtype=float).reshape(-1, n)
    if A.shape[0] == 0:
        return Subspace.full(n)
    N = null_space(A, eps=1e-10)
    return Subspace(N) if N.shape[1] else Subspace.zero(n)


def _coadjoint_stabilizer(action: LieAlgebraAction, mu) -> np.ndarray:
    k = action.k
    if action.structure_constants is None or action.abelian:
        return np.eye(k)
    ad = np.stack([-action.structure_constants[i] @ mu for i in range(k)], axis=1)
    return null_space(ad, eps=1e-10)


@dataclass
class PointGeometry:
    m: np.ndarray
    mu: np.ndarray
    kerDJ: Subspace
    orbit: Subspace          # g.m
    orbit_mu: Subspace       # g_mu.m
    g_m: Subspace            # stabilizer algebra inside R^k
    g_mu: np.ndarray         # basis of g_mu inside R^k
    img_perp: Subspace       # (img DJ(m))^perp inside R^k


def point_geometry(action: LieAlgebraAction, m) -> PointGeometry:
    m = np.asarray(m, dtype=float)
    n, k = action.dim, action.k
    DJ = momentum_jacobian(action, m)
    T = action.orbit_tangent(m)
    mu = _momentum_components(action, m)
    gmu = _coadjoint_stabilizer(action, mu)
    orbit_mu = T @ gmu if k else np.zeros((n, 0))
    return PointGeometry(
        m=m, mu=mu, kerDJ=_null(DJ, n), orbit=_span(T, n), orbit_mu=_span(orbit_mu, n),
        g_m=_null(T, k) if k else Subspace.zero(0), g_mu=gmu,
        img_perp=_null(DJ.T, k) if k else Subspace.zero(0),
    )


def bifurcation_check(action: LieAlgebraAction, m) -> dict:
    """Projector distances of the four kernel/image identities at m."""
    space = action.space
    pg = point_geometry(action, m)
    kerw = symplectic_orthogonal(space, pg.kerDJ)
    d = {
        "ker_DJ_eq_orbit_omega": pg.kerDJ.distance(symplectic_orthogonal(space, pg.orbit)),
        "img_perp_eq_stabilizer": pg.img_perp.distance(pg.g_m) if action.k else 0.0,
        "ker_omega_eq_orbit": kerw.distance(pg.orbit),
        "ker_cap_ker_omega_eq_orbit_mu": pg.kerDJ.intersect(kerw).distance(pg.orbit_mu),
    }
    d["max"] = max(d.values())
    return d


@dataclass
class WittArtinDecomposition:
    q_orbit: Subspace
    gmu_orbit: Subspace
    E: Subspace
    F: Subspace
    residuals: dict
    parity: int

    @property
    def dims(self) -> tuple:
        return (self.q_orbit.dim, self.gmu_orbit.dim, self.E.dim, self.F.dim)


def witt_artin(action: LieAlgebraAction, rep: CompactGroupRep, m) -> WittArtinDecomposition:
    n, k = action.dim, action.k
    pg = point_geometry(action, m)
    G = rep.invariant_metric()
    # q: Euclidean complement of g_mu in the Lie algebra coordinates
    q = null_space(pg.g_mu.T, eps=1e-10) if pg.g_mu.shape[1] < k else np.zeros((k, 0))
    q_orbit = _span(action.orbit_tangent(pg.m) @ q, n) if q.shape[1] else Subspace.zero(n)
    TS = pg.orbit_mu.complement(G)
    E = TS.intersect(pg.kerDJ)
    F = (q_orbit + E + pg.orbit_mu).complement(G).intersect(TS) if (q_orbit + E + pg.orbit_mu).dim < n \
        else Subspace.zero(n)
    blocks = np.hstack([q_orbit.basis, pg.orbit_mu.basis, E.basis, F.basis])
    full = numerical_rank(blocks, 1e-8) == n and blocks.shape[1] == n
    ker_split = (pg.orbit_mu + E).distance(pg.kerDJ) if (pg.orbit_mu.dim + E.dim) else pg.kerDJ.dim
    residuals = {
        "direct_sum_rank_defect": float(n - numerical_rank(blocks, 1e-8)) if blocks.size else float(n),
        "ker_DJ_eq_orbit_mu_plus_E": float(ker_split),
        "E_meets_orbit_mu": float(E.intersect(pg.orbit_mu).dim),
        "blocks_count_defect": float(abs(blocks.shape[1] - n)),
    }
    if not full:
        residuals["direct_sum_rank_defect"] = max(residuals["direct_sum_rank_defect"], 1.0)
    parity = 2 * pg.g_m.dim - E.dim
    return WittArtinDecomposition(q_orbit, pg.orbit_mu, E, F, residuals, parity)


@dataclass
class ProjectionResult:
    x: np.ndarray
    converged: bool
    residual: float
    iterations: int
    near_singular: bool = False


def project_to_level(action: LieAlgebraAction, x0, mu=None, maxit: int = 50, tol: float = 1e-10,
                     subspace: np.ndarray | None = None) -> ProjectionResult:
    """Gauss-Newton with minimum-norm steps onto J^{-1}(mu), optionally inside span(subspace)."""
    x = np.asarray(x0, dtype=float).copy()
    mu = np.zeros(action.k) if mu is None else np.asarray(mu, dtype=float)
    P = None if subspace is None else subspace
    it = 0
    r = _momentum_components(action, x) - mu
    while np.linalg.norm(r) > tol and it < maxit:
        D = momentum_jacobian(action, x)
        if P is not None:
            x = x - P @ np.linalg.lstsq(D @ P, r, rcond=None)[0]
        else:
            x = x - np.linalg.lstsq(D, r, rcond=None)[0]
        r = _momentum_components(action, x) - mu
        it += 1
        if not np.all(np.isfinite(x)):
            break
    res = float(np.linalg.norm(r))
    D = momentum_jacobian(action, x)
    sv = np.linalg.svd(D, compute_uv=False) if D.size else np.zeros(0)
    near = bool(sv.size and sv.min() < 1e-6)
    return ProjectionResult(x, res <= tol, res, it, near)


def fixed_subspace(rep: CompactGroupRep, stab) -> Subspace:
    n = rep.dim
    if stab.kind == "matrix":
        rows = [rep.algebra.matrix(b) for b in stab.algebra_basis.T] + [c - np.eye(n) for c in stab.elements]
        return _null(np.vstack(rows), n) if rows else Subspace.full(n)
    P = np.mean(stab.quadrature(), axis=0)
    return _span(P, n)


@dataclass
class StratumReport:
    orbit_type_id: str
    stabilizer: dict
    ambient_dim: int
    reduced_dim: int
    reduced_form: np.ndarray
    witnesses: list
    residuals: dict = field(default_factory=dict)
    supports: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "orbit_type_id": self.orbit_type_id,
            "stabilizer": self.stabilizer,
            "ambient_dim": self.ambient_dim,
            "reduced_dim": self.reduced_dim,
            "reduced_form": np.round(self.reduced_form, 12).tolist(),
            "witnesses": [np.round(w, 12).tolist() for w in self.witnesses],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def _stratum_at(action, rep, m, witnesses) -> StratumReport:
    n = action.dim
    stab = rep.stabilizer(m)
    pg = point_geometry(action, m)
    wa = witt_artin(action, rep, m)
    V = fixed_subspace(rep, stab)
    EG = wa.E.intersect(V)
    Q = EG.orthonormal
    red = Q.T @ action.space.omega @ Q
    VK = V.intersect(pg.kerDJ)
    local = VK.dim - pg.orbit.intersect(V).dim
    rank = numerical_rank(red, 1e-10) if red.size else 0
    residuals = {
        "reduced_form_rank_defect": float(EG.dim - rank),
        "reduced_form_antisymmetry": float(np.abs(red + red.T).max()) if red.size else 0.0,
        "local_model_dim_mismatch": float(abs(local - EG.dim)),
        "witt_artin_parity_odd": float(wa.parity % 2),
        "reduced_dim_odd": float(EG.dim % 2),
    }
    amb = VK.dim + pg.orbit.dim - pg.orbit.intersect(V).dim
    return StratumReport(stab.orbit_type_id, stab.to_json(), amb, EG.dim, red, witnesses, residuals)


def _torus_supports(rep: Torus, mu) -> dict:
    """Feasible weight supports of J^{-1}(mu), grouped by lattice key, with a positive |z|^2 profile."""
    n = rep.n
    out: dict = {}
    for size in range(0, n + 1):
        for S in itertools.combinations(range(n), size):
            WS = rep.weights[:, list(S)].astype(float)
            rhs = 2 * np.asarray(mu, dtype=float)
            if size == 0:
                if np.allclose(rhs, 0):
                    out.setdefault(rep.lattice_key(S), []).append((S, np.zeros(0)))
                continue
            # maximize t subject to W_S r = 2 mu, r >= t, t <= 1
            c = np.zeros(size + 1)
            c[-1] = -1.0
            A_ub = np.hstack([-np.eye(size), np.ones((size, 1))])
            A_eq = np.hstack([WS, np.zeros((rep.k, 1))])
            res = linprog(c, A_ub=A_ub, b_ub=np.zeros(size), A_eq=A_eq, b_eq=rhs,
                          bounds=[(0, None)] * size + [(None, 1.0)], method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                out.setdefault(rep.lattice_key(S), []).append((S, res.x[:size], -res.fun))
    return out


def _torus_witness(rep: Torus, S, t_star, mu, rng) -> np.ndarray:
    size = len(S)
    WS = rep.weights[:, list(S)].astype(float)
    c = rng.random(size) + 0.1
    res = linprog(c, A_eq=WS, b_eq=2 * np.asarray(mu, dtype=float),
                  bounds=[(0.5 * t_star, None)] * size, method="highs")
    r = res.x
    z = np.zeros(2 * rep.n)
    for j, rj in zip(S, r):
        ang = rng.uniform(0, 2 * np.pi)
        z[2 * j:2 * j + 2] = np.sqrt(rj) * np.array([np.cos(ang), np.sin(ang)])
    # normalize the overall scale for mu = 0 (conic)
    if np.allclose(mu, 0) and np.linalg.norm(z) > 0:
        z /= np.linalg.norm(z)
    return z


def strata_of_zero_level(action: LieAlgebraAction | None, rep: CompactGroupRep, mu=None,
                         seed: int = 0, n_samples: int = 64) -> list:
    """Orbit-type strata of J^{-1}(mu); sorted by orbit_type_id."""
    action = action or rep.lie_algebra_action()
    k = action.k
    mu = np.zeros(k) if mu is None else np.asarray(mu, dtype=float)
    if np.linalg.norm(mu) > 0 and not action.abelian:
        raise NotImplementedError("nonzero levels are supported for abelian groups only")
    rng = np.random.default_rng(seed)
    groups: dict = {}
    if isinstance(rep, Torus):
        for key, entries in _torus_supports(rep, mu).items():
            nonzero = [e for e in entries if len(e[0])]
            if not nonzero:
                groups[key] = [np.zeros(action.dim)]
                continue
            pts = [_torus_witness(rep, e[0], e[2], mu, rng)
                   for e in (nonzero[i % len(nonzero)] for i in range(WITNESSES))]
            groups[key] = pts
    else:
        candidates = []
        if np.allclose(mu, 0):
            candidates.append(np.zeros(action.dim))
        bases = [np.eye(action.dim)]
        if rep.variant == "finite":
            bases += [b for b in rep.subgroup_fixed_spaces() if b.shape[1]]
            for b1, b2 in itertools.combinations(rep.subgroup_fixed_spaces(), 2):
                if b1.shape[1] and b2.shape[1]:
                    I = _span(b1, action.dim).intersect(_span(b2, action.dim))
                    if I.dim:
                        bases.append(I.orthonormal)
        else:
            bases += [null_space(A, eps=1e-10) for A in action.generators]
            bases = [b for b in bases if b.shape[1]]
        for i in range(n_samples * len(bases)):
            B = bases[i % len(bases)]
            x0 = B @ rng.normal(size=B.shape[1])
            x0 /= max(np.linalg.norm(x0), 1e-300)
            pr = project_to_level(action, x0, mu, subspace=B)
            if pr.converged and np.linalg.norm(pr.x) > 1e-6:
                candidates.append(pr.x / (np.linalg.norm(pr.x) if np.allclose(mu, 0) else 1.0))
        for x in candidates:
            key = rep.stabilizer(x).orbit_type_id
            pts = groups.setdefault(key, [])
            if len(pts) < WITNESSES and (np.linalg.norm(x) > 0 or not pts):
                pts.append(x)
    reports = [_stratum_at(action, rep, pts[0], pts) for key, pts in groups.items()]
    return sorted(reports, key=lambda s: s.orbit_type_id)


def _is_origin(s: StratumReport) -> bool:
    return all(np.linalg.norm(w) == 0 for w in s.witnesses)


def frontier_check(strata: list, action: LieAlgebraAction, rep: CompactGroupRep, mu=None,
                   seed: int = 0) -> dict:
    """Closure relations between strata by ray scaling and perturb-and-project sampling."""
    rng = np.random.default_rng(seed)
    mu = np.zeros(action.k) if mu is None else np.asarray(mu, dtype=float)
    conic = np.allclose(mu, 0)
    order, violations, inconclusive = [], [], []
    for A, B in itertools.permutations(strata, 2):
        hits = []
        for a in A.witnesses:
            hit = False
            if conic and np.linalg.norm(a) == 0:
                # rays in B converge to the origin and stay in B
                b = B.witnesses[0]
                ray_ok = all(rep.stabilizer(t * b).orbit_type_id == B.orbit_type_id
                             and np.linalg.norm(_momentum_components(action, t * b) - mu) <= 1e-12
                             for t in (0.5, 1e-2, 1e-4))
                hit = ray_ok
            else:
                for eps in (1e-2, 1e-3, 1e-4):
                    found = False
                    for _ in range(8):
                        v = rng.normal(size=action.dim)
                        pr = project_to_level(action, a + eps * v / np.linalg.norm(v), mu)
                        if pr.converged and np.linalg.norm(pr.x - a) <= 10 * eps \
                                and rep.stabilizer(pr.x).orbit_type_id == B.orbit_type_id:
                            found = True
                            break
                    if not found:
                        break
                else:
                    hit = True
            hits.append(hit)
        if all(hits):
            order.append((A.orbit_type_id, B.orbit_type_id))
            if A.ambient_dim >= B.ambient_dim:
                violations.append({"kind": "DS2b", "pair": [A.orbit_type_id, B.orbit_type_id]})
        elif any(hits):
            violations.append({"kind": "DS2a", "pair": [A.orbit_type_id, B.orbit_type_id]})
    return {"order": order, "violations": violations, "inconclusive": inconclusive}


def quadratic_invariants(rep: CompactGroupRep) -> np.ndarray:
    """Basis of G-invariant symmetric matrices Q (x -> x^T Q x separates orbits of compact linear actions
    in the examples used here)."""
    n = rep.dim
    if rep.variant == "finite":
        gens = []
        comps = rep.matrices
    elif rep.variant == "torus":
        gens = list(rep.lie_algebra_action().generators)
        comps = []
    else:
        gens = list(rep.algebra.generators)
        comps = rep.components
    I = np.eye(n)
    rows = [np.kron(A.T, I) + np.kron(I, A.T) for A in gens]
    rows += [np.kron(g.T, g.T) - np.eye(n * n) for g in comps]
    # symmetry constraint
    Sw = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            Sw[i * n + j, i * n + j] += 1
            Sw[i * n + j, j * n + i] -= 1
    rows.append(Sw)
    N = null_space(np.vstack(rows), eps=1e-10)
    return np.stack([N[:, i].reshape(n, n) for i in range(N.shape[1])])


class ChartExit(RuntimeError):
    pass


def reduced_dynamics_check(action: LieAlgebraAction, rep: CompactGroupRep, system: HamiltonianSystem,
                           stratum: StratumReport, t_end: float = 10.0, dt: float = 1e-3,
                           witness: int = 0) -> dict:
    """Compare the ambient flow, seen through quadratic invariants, with the reduced flow in the E_{G_m} chart."""
    n = action.dim
    m = np.asarray(stratum.witnesses[witness], dtype=float)
    mu = _momentum_components(action, m)
    stab = rep.stabilizer(m)
    V = fixed_subspace(rep, stab)
    pg = point_geometry(action, m)
    wa = witt_artin(action, rep, m)
    Qb = wa.E.intersect(V).orthonormal
    VK = V.intersect(pg.kerDJ)
    # normal directions inside V, complementary to ker DJ(m)
    Nb = VK.complement().intersect(V).orthonormal if VK.dim < V.dim else np.zeros((n, 0))
    W = action.space.omega

    state = {"c": np.zeros(Nb.shape[1])}

    def solve_c(y):
        c = state["c"].copy()
        for _ in range(30):
            x = m + Qb @ y + Nb @ c
            r = _momentum_components(action, x) - mu
            if np.linalg.norm(r) <= 1e-13 or Nb.shape[1] == 0:
                break
            D = momentum_jacobian(action, x) @ Nb
            c = c - np.linalg.lstsq(D, r, rcond=None)[0]
        else:
            raise ChartExit("level-set correction did not converge")
        if Nb.shape[1] and np.linalg.norm(_momentum_components(action, m + Qb @ y + Nb @ c) - mu) > 1e-10:
            raise ChartExit("level-set correction did not converge")
        state["c"] = c
        return m + Qb @ y + Nb @ c

    def d_iota(x):
        if Nb.shape[1] == 0:
            return Qb
        D = momentum_jacobian(action, x)
        dc = -np.linalg.lstsq(D @ Nb, D @ Qb, rcond=None)[0]
        return Qb + Nb @ dc

    def reduced_field(y):
        x = solve_c(y)
        Di = d_iota(x)
        Wr = Di.T @ W @ Di
        if np.linalg.svd(Wr, compute_uv=False).min() < 1e-8:
            raise ChartExit("reduced form degenerates along the chart")
        return np.linalg.solve(Wr, Di.T @ system.gradient(x))

    X = hamiltonian_vector_field(action.space, system)
    traj = rk4(X, m, t_end, dt)
    inv = quadratic_invariants(rep)

    def hilbert(x):
        return np.array([x @ Q @ x for Q in inv])

    n_steps = traj.shape[0] - 1
    y = np.zeros(Qb.shape[1])
    mismatch, drift, type_changes = 0.0, 0.0, 0
    steps_done = 0
    exit_reason = None
    t = 0.0
    try:
        for i in range(n_steps):
            k1 = reduced_field(y)
            k2 = reduced_field(y + dt / 2 * k1)
            k3 = reduced_field(y + dt / 2 * k2)
            k4 = reduced_field(y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            steps_done = i + 1
            if steps_done % 10 == 0 or steps_done == n_steps:
                xa = traj[steps_done]
                xr = solve_c(y)
                mismatch = max(mismatch, float(np.linalg.norm(hilbert(xa) - hilbert(xr))))
                drift = max(drift, float(np.linalg.norm(_momentum_components(action, xa) - mu)))
                if steps_done % 100 == 0 and rep.stabilizer(xa).orbit_type_id != stratum.orbit_type_id:
                    type_changes += 1
    except ChartExit as e:
        exit_reason = str(e)
    return {
        "t_compared": steps_done * dt,
        "t_end": t_end,
        "dt": dt,
        "projected_vs_reduced_mismatch": mismatch,
        "noether_drift": drift,
        "orbit_type_changes": type_changes,
        "chart_exit": exit_reason,
    }


def reduction_report(action, rep, mu=None, seed: int = 0) -> dict:
    action = action or rep.lie_algebra_action()
    strata = strata_of_zero_level(action, rep, mu, seed)
    fr = frontier_check(strata, action, rep, mu, seed)
    return {
        "schema": 1,
        "rep": rep.to_json(),
        "level": (np.zeros(action.k) if mu is None else np.asarray(mu, float)).tolist(),
        "enumeration": "exact weight-support enumeration" if isinstance(rep, Torus)
        else "sampling based; completeness not guaranteed",
        "strata": [s.to_json() for s in strata],
        "frontier": fr,
    }
