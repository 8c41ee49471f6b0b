"""Linear symplectic actions of compact groups and their quadratic momentum maps.

Real model of C^n: coordinates (x_1, y_1, ..., x_n, y_n) with
omega = diag([[0, 1], [-1, 0]], ...).  A torus element t in R^k / Z^k acts on
(x_j, y_j) by rotation through 2*pi*<w_j, t>; the Lie algebra basis used for
momentum maps is xi_i = e_i / (2*pi), whose generator on block j is w_ij * R,
R = [[0, -1], [1, 0]].  With this basis J_i(z) = 1/2 sum_j w_ij |z_j|^2.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy.linalg import expm
from sympy.matrices.normalforms import hermite_normal_form, smith_normal_decomp

from .symplin import SymplecticSpace, null_space, numerical_rank

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def complex_space(n: int) -> SymplecticSpace:
    """C^n in interleaved real coordinates."""
    blocks = [np.array([[0.0, 1.0], [-1.0, 0.0]])] * n
    return SymplecticSpace(_block_diag(blocks))


def _block_diag(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def realify(M) -> np.ndarray:
    """Complex n x n matrix -> real 2n x 2n matrix in interleaved coordinates."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    out = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            a, b = M[i, j].real, M[i, j].imag
            out[2 * i:2 * i + 2, 2 * j:2 * j + 2] = [[a, -b], [b, a]]
    return out


@dataclass(frozen=True, eq=False)
class LieAlgebraAction:
    space: SymplecticSpace
    generators: np.ndarray  # (k, n, n)
    structure_constants: np.ndarray | None = None  # (k, k, k): [A_i, A_j] = c_ij^l A_l
    tol: float = 1e-12

    def __post_init__(self):
        A = np.asarray(self.generators, dtype=float).reshape(-1, self.space.dim, self.space.dim)
        object.__setattr__(self, "generators", A)
        W = self.space.omega
        for i, Ai in enumerate(A):
            r = np.max(np.abs(Ai.T @ W + W @ Ai)) if Ai.size else 0.0
            if r > self.tol * max(1.0, np.abs(Ai).max()):
                raise ValueError(f"generator {i} is not infinitesimally symplectic (residual {r:.2e})")
        if self.structure_constants is not None:
            c = np.asarray(self.structure_constants, dtype=float)
            object.__setattr__(self, "structure_constants", c)
            for i, j in itertools.product(range(self.k), repeat=2):
                br = A[i] @ A[j] - A[j] @ A[i]
                rhs = np.tensordot(c[i, j], A, axes=1)
                if np.max(np.abs(br - rhs)) > 1e-10:
                    raise ValueError(f"bracket [A_{i}, A_{j}] violates the structure constants")

    @property
    def k(self) -> int:
        return self.generators.shape[0]

    @property
    def dim(self) -> int:
        return self.space.dim

    def matrix(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.k == 0:
            return np.zeros((self.dim, self.dim))
        return np.tensordot(xi, self.generators, axes=1)

    def orbit_tangent(self, x) -> np.ndarray:
        """Columns A_i x spanning g.x."""
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.zeros((self.dim, 0))
        return np.stack([Ai @ x for Ai in self.generators], axis=1)

    @property
    def abelian(self) -> bool:
        if self.structure_constants is not None:
            return bool(np.all(np.abs(self.structure_constants) < 1e-14))
        A = self.generators
        return all(np.allclose(A[i] @ A[j], A[j] @ A[i], atol=1e-12)
                   for i in range(self.k) for j in range(i + 1, self.k))


@dataclass(frozen=True, eq=False)
class MomentumValue:
    components: np.ndarray
    kappa: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float).ravel()
        k = c.size
        kap = np.eye(k) if self.kappa is None else np.asarray(self.kappa, dtype=float)
        if kap.shape != (k, k) or (k and numerical_rank(kap) < k):
            raise ValueError("kappa must be an invertible k x k matrix")
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "kappa", kap)

    def pair(self, xi) -> float:
        """kappa(J, xi)."""
        return float(self.components @ self.kappa @ np.asarray(xi, dtype=float))


def _momentum_components(action: LieAlgebraAction, x, kappa=None) -> np.ndarray:
    W = action.space.omega
    x = np.asarray(x, dtype=float)
    raw = np.array([0.5 * x @ W @ (Ai @ x) for Ai in action.generators])
    if kappa is None:
        return raw
    # kappa(J, e_i) = raw_i  =>  kappa^T J = raw
    return np.linalg.solve(np.asarray(kappa).T, raw)


def quadratic_momentum(action: LieAlgebraAction, x, kappa=None) -> MomentumValue:
    """kappa(J(x), xi) = 1/2 omega(x, xi.x)."""
    return MomentumValue(_momentum_components(action, x, kappa), kappa)


def momentum_jacobian(action: LieAlgebraAction, x) -> np.ndarray:
    """Rows: D<J, xi_i>(x) = omega(x, A_i .)."""
    x = np.asarray(x, dtype=float)
    W = action.space.omega
    if action.k == 0:
        return np.zeros((0, action.dim))
    return np.stack([x @ W @ Ai for Ai in action.generators])


def momentum_relation_residual(action: LieAlgebraAction, x, v, xi_index: int) -> float:
    """|omega(A_i x, v) + D<J, xi_i>(x) v|, derivative taken analytically."""
    A = action.generators[xi_index]
    W = action.space.omega
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    lhs = (A @ x) @ W @ v
    dj = x @ W @ (A @ v)
    return abs(lhs + dj)


def coadjoint_infinitesimal(action: LieAlgebraAction, xi_index: int, mu) -> np.ndarray:
    """(ad*_{xi_i} mu)_j = -mu([xi_i, xi_j])."""
    c = action.structure_constants
    return -np.asarray(c[xi_index]) @ np.asarray(mu)


def adjoint_matrix(action: LieAlgebraAction, g) -> np.ndarray:
    """Matrix of Ad_g on the generator basis: g A_j g^{-1} = sum_l Ad[l, j] A_l."""
    k = action.k
    basis = action.generators.reshape(k, -1).T
    gi = np.linalg.inv(g)
    cols = [np.linalg.lstsq(basis, (g @ Aj @ gi).ravel(), rcond=None)[0] for Aj in action.generators]
    Ad = np.column_stack(cols)
    recon = basis @ Ad - np.column_stack([(g @ Aj @ gi).ravel() for Aj in action.generators])
    if np.max(np.abs(recon)) > 1e-9:
        raise ValueError("group element does not normalize the generator span")
    return Ad


class EquivarianceUnavailable(RuntimeError):
    pass


def equivariance_residual(action: LieAlgebraAction, rep, x, g_or_xi) -> float:
    """Infinitesimal (int index) or group (matrix) equivariance residual of J."""
    x = np.asarray(x, dtype=float)
    mu = _momentum_components(action, x)
    if np.ndim(g_or_xi) == 0:
        i = int(g_or_xi)
        if action.structure_constants is None:
            if not action.abelian:
                raise EquivarianceUnavailable("structure constants missing for infinitesimal check")
            rhs = np.zeros(action.k)
        else:
            rhs = coadjoint_infinitesimal(action, i, mu)
        lhs = momentum_jacobian(action, x) @ (action.generators[i] @ x)
        return float(np.linalg.norm(lhs - rhs))
    g = np.asarray(g_or_xi, dtype=float)
    lhs = _momentum_components(action, g @ x)
    # (CoAd_g mu)(eta) = mu(Ad_{g^{-1}} eta)
    Ad_inv = adjoint_matrix(action, np.linalg.inv(g))
    rhs = Ad_inv.T @ mu
    return float(np.linalg.norm(lhs - rhs))


# --------------------------------------------------------------------------
# compact group representations


@dataclass(frozen=True, eq=False)
class StabilizerDescriptor:
    kind: str
    dimension: int
    component_count: int | None
    orbit_type_id: str
    elements: list | None = None  # finite case: exact matrices
    element_indices: tuple | None = None
    algebra_basis: np.ndarray | None = None  # k x d, coordinates in the Lie algebra
    torus_data: dict | None = None
    rep: object = field(default=None, repr=False)

    def is_full_group(self) -> bool:
        return self.rep is not None and self.orbit_type_id == self.rep.full_group_id()

    def is_trivial(self) -> bool:
        return self.dimension == 0 and (self.component_count or 1) == 1

    def quadrature(self, n_grid: int | None = None) -> list:
        """Elements with equal weights whose mean equals the Haar average
        on every matrix coefficient of degree <= 2 in the representation."""
        if self.kind == "finite":
            return list(self.elements)
        if self.kind == "torus":
            return self.rep._stabilizer_grid(self.torus_data, n_grid)
        return [np.eye(self.rep.dim)] + list(self.elements or [])

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "dimension": self.dimension,
            "component_count": self.component_count,
            "orbit_type_id": self.orbit_type_id,
        }
        if self.element_indices is not None:
            out["element_indices"] = list(self.element_indices)
        return out


class CompactGroupRep:
    """Common interface of the three representation variants."""

    variant: str
    dim: int

    def lie_algebra_action(self, space: SymplecticSpace | None = None) -> LieAlgebraAction:
        raise NotImplementedError

    def sample_elements(self, rng: np.random.Generator, n: int) -> list:
        raise NotImplementedError

    def averaging_projector(self) -> np.ndarray:
        raise NotImplementedError

    def stabilizer(self, x) -> StabilizerDescriptor:
        raise NotImplementedError

    def full_group_id(self) -> str:
        return self.stabilizer(np.zeros(self.dim)).orbit_type_id

    def invariant_metric(self) -> np.ndarray:
        return np.eye(self.dim)

    def check_symplectic(self, omega, n_samples: int = 16, tol: float = 1e-10) -> None:
        rng = np.random.default_rng(0)
        for g in self.sample_elements(rng, n_samples):
            r = np.max(np.abs(g.T @ omega @ g - omega))
            if r > tol:
                raise ValueError(f"representation is not symplectic (residual {r:.2e})")

    def to_json(self) -> dict:
        raise NotImplementedError


def rep_from_json(data) -> CompactGroupRep:
    if isinstance(data, str):
        data = json.loads(data)
    v = data["variant"]
    if v == "finite":
        n = int(data["dim"])
        return FiniteGroup([np.asarray(m, float).reshape(n, n) for m in data["matrices"]])
    if v == "torus":
        return Torus(np.asarray(data["weights"], dtype=int))
    if v == "matrix":
        n = int(data["dim"])
        gens = np.asarray(data["generators"], float).reshape(-1, n, n)
        sc = data.get("structure_constants")
        k = gens.shape[0]
        sc = None if sc is None else np.asarray(sc, float).reshape(k, k, k)
        comps = [np.asarray(m, float).reshape(n, n) for m in data.get("components", [])]
        omega = np.asarray(data["omega"], float).reshape(n, n)
        return MatrixGroup(LieAlgebraAction(SymplecticSpace(omega), gens, sc), comps)
    raise ValueError(f"unknown variant {v!r}")


class FiniteGroup(CompactGroupRep):
    variant = "finite"

    def __init__(self, matrices: Sequence, tol: float = 1e-9):
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if not mats:
            raise ValueError("empty group")
        self.dim = mats[0].shape[0]
        self.tol = tol
        self.matrices = mats
        self._table = self._multiplication_table()

    def _index(self, g) -> int:
        for i, h in enumerate(self.matrices):
            if np.max(np.abs(g - h)) <= self.tol:
                return i
        return -1

    def _multiplication_table(self) -> np.ndarray:
        m = len(self.matrices)
        table = np.empty((m, m), dtype=int)
        for i, a in enumerate(self.matrices):
            for j, b in enumerate(self.matrices):
                idx = self._index(a @ b)
                if idx < 0:
                    raise ValueError("matrix list is not closed under multiplication")
                table[i, j] = idx
        e = self._index(np.eye(self.dim))
        if e < 0:
            raise ValueError("identity missing from group")
        for i, a in enumerate(self.matrices):
            if self._index(np.linalg.inv(a)) < 0:
                raise ValueError("matrix list is not closed under inversion")
        self._identity = e
        return table

    @classmethod
    def generated_by(cls, generators: Sequence, max_order: int = 512) -> "FiniteGroup":
        gens = [np.asarray(g, float) for g in generators]
        n = gens[0].shape[0]
        elems = [np.eye(n)]
        frontier = [np.eye(n)]
        while frontier:
            new = []
            for a in frontier:
                for g in gens:
                    b = a @ g
                    if not any(np.max(np.abs(b - e)) < 1e-9 for e in elems):
                        elems.append(b)
                        new.append(b)
            if len(elems) > max_order:
                raise ValueError("group too large")
            frontier = new
        return cls(elems)

    @property
    def order(self) -> int:
        return len(self.matrices)

    def lie_algebra_action(self, space=None) -> LieAlgebraAction:
        space = space or SymplecticSpace(_default_omega(self.dim))
        return LieAlgebraAction(space, np.zeros((0, self.dim, self.dim)))

    def sample_elements(self, rng, n):
        return list(self.matrices)

    def averaging_projector(self) -> np.ndarray:
        return np.mean(self.matrices, axis=0)

    def invariant_metric(self) -> np.ndarray:
        return np.mean([g.T @ g for g in self.matrices], axis=0)

    def _conjugacy_key(self, idx: Sequence[int]) -> tuple:
        inv = [self._index(np.linalg.inv(g)) for g in self.matrices]
        best = None
        for c in range(self.order):
            conj = sorted(self._table[self._table[c, h], inv[c]] for h in idx)
            t = tuple(conj)
            if best is None or t < best:
                best = t
        return best

    def stabilizer(self, x, tol: float = 1e-9) -> StabilizerDescriptor:
        x = np.asarray(x, dtype=float)
        idx = tuple(i for i, g in enumerate(self.matrices) if np.linalg.norm(g @ x - x) <= tol)
        key = self._conjugacy_key(idx)
        return StabilizerDescriptor(
            kind="finite", dimension=0, component_count=len(idx),
            orbit_type_id="finite:" + ",".join(map(str, key)),
            elements=[self.matrices[i] for i in idx], element_indices=idx, rep=self,
        )

    def subgroup_fixed_spaces(self) -> list:
        """Fixed subspaces of the cyclic subgroups, used to reach non-generic orbit types."""
        out = []
        for g in self.matrices:
            N = null_space(g - np.eye(self.dim), eps=1e-10)
            out.append(N)
        return out

    def to_json(self) -> dict:
        return {"variant": "finite", "dim": self.dim, "matrices": [m.ravel().tolist() for m in self.matrices]}


def _default_omega(n: int) -> np.ndarray:
    return complex_space(n // 2).omega.copy()


class Torus(CompactGroupRep):
    """T^k acting on C^n through an integer weight matrix w (k x n)."""

    variant = "torus"

    def __init__(self, weights):
        w = np.atleast_2d(np.asarray(weights))
        if not np.all(w == np.round(w)):
            raise ValueError("torus weights must be integers")
        self.weights = w.astype(int)
        self.k, self.n = self.weights.shape
        self.dim = 2 * self.n

    @property
    def space(self) -> SymplecticSpace:
        return complex_space(self.n)

    def lie_algebra_action(self, space=None) -> LieAlgebraAction:
        gens = np.stack([_block_diag([w * ROT for w in row]) for row in self.weights])
        return LieAlgebraAction(space or self.space, gens, np.zeros((self.k, self.k, self.k)))

    def element(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).ravel()
        angles = 2 * np.pi * (self.weights.T @ t)
        blocks = [np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]) for a in angles]
        return _block_diag(blocks)

    def sample_elements(self, rng, n):
        return [self.element(rng.random(self.k)) for _ in range(n)]

    def averaging_projector(self) -> np.ndarray:
        zero = np.all(self.weights == 0, axis=0)
        d = np.repeat(zero.astype(float), 2)
        return np.diag(d)

    def support(self, x, tol: float = 1e-9) -> tuple:
        z = np.asarray(x, dtype=float).reshape(self.n, 2)
        return tuple(int(j) for j in np.nonzero(np.linalg.norm(z, axis=1) > tol)[0])

    def lattice_key(self, support: Sequence[int]) -> str:
        if not support:
            return "torus:0"
        W = sympy.Matrix(self.weights[:, list(support)].tolist())
        if all(v == 0 for v in W):
            return "torus:0"
        H = hermite_normal_form(W)
        cols = [tuple(int(v) for v in H[:, j]) for j in range(H.shape[1]) if any(H[:, j])]
        return "torus:" + ";".join(",".join(map(str, c)) for c in cols)

    def stabilizer_of_support(self, support: Sequence[int]) -> StabilizerDescriptor:
        support = tuple(support)
        key = self.lattice_key(support)
        if not support or np.all(self.weights[:, list(support)] == 0):
            data = {"V": np.eye(self.k, dtype=int), "d": [], "free": list(range(self.k))}
            return StabilizerDescriptor("torus", self.k, 1, key, torus_data=data,
                                        algebra_basis=np.eye(self.k), rep=self)
        Ws = sympy.Matrix(self.weights[:, list(support)].T.tolist())
        D, U, V = smith_normal_decomp(Ws, domain=sympy.ZZ)
        r = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
        d = [abs(int(D[i, i])) for i in range(r)]
        Vn = np.array(V.tolist(), dtype=int)
        free = list(range(r, self.k))
        data = {"V": Vn, "d": d, "free": free}
        comps = int(np.prod(d)) if d else 1
        basis = Vn[:, free].astype(float) if free else np.zeros((self.k, 0))
        return StabilizerDescriptor("torus", len(free), comps, key, torus_data=data,
                                    algebra_basis=basis, rep=self)

    def stabilizer(self, x, tol: float = 1e-9) -> StabilizerDescriptor:
        return self.stabilizer_of_support(self.support(x, tol))

    def _stabilizer_grid(self, data: dict, n_grid: int | None = None) -> list:
        V, d, free = data["V"], data["d"], data["free"]
        if n_grid is None:
            # exact for matrix coefficients of g P g^{-1}
            freq = np.abs(V.T @ self.weights).max() if self.weights.size else 0
            n_grid = 2 * int(freq) + 1
        axes = [[j / di for j in range(di)] for di in d]
        axes += [[j / n_grid for j in range(n_grid)] for _ in free]
        out = []
        for u in itertools.product(*axes) if axes else [()]:
            t = V @ np.asarray(u, dtype=float) if len(u) else np.zeros(self.k)
            out.append(self.element(t))
        return out

    def to_json(self) -> dict:
        return {"variant": "torus", "weights": self.weights.tolist()}


class MatrixGroup(CompactGroupRep):
    """Compact group given by a Lie algebra action plus user-supplied component representatives."""

    variant = "matrix"

    def __init__(self, algebra: LieAlgebraAction, components: Sequence = ()):
        self.algebra = algebra
        self.components = [np.asarray(c, dtype=float) for c in components]
        self.dim = algebra.dim

    def lie_algebra_action(self, space=None) -> LieAlgebraAction:
        return self.algebra

    def element(self, xi) -> np.ndarray:
        return expm(self.algebra.matrix(xi))

    def sample_elements(self, rng, n):
        out = []
        for i in range(n):
            g = self.element(rng.normal(size=self.algebra.k) * 2.0)
            if self.components:
                g = self.components[i % len(self.components)] @ g
            out.append(g)
        return out

    def invariant_metric(self) -> np.ndarray:
        n = self.dim
        rows = []
        # A^T M + M A = 0 for generators, c^T M c = M for components
        for A in self.algebra.generators:
            rows.append(np.kron(A.T, np.eye(n)) + np.kron(np.eye(n), A.T))
        for c in self.components:
            rows.append(np.kron(c.T, c.T) - np.eye(n * n))
        if not rows:
            return np.eye(n)
        N = null_space(np.vstack(rows), eps=1e-10)
        m = N @ (N.T @ np.eye(n).ravel())
        M = m.reshape(n, n)
        M = 0.5 * (M + M.T)
        if np.min(np.linalg.eigvalsh(M)) <= 0:
            raise ValueError("no positive invariant metric found")
        return M

    def averaging_projector(self) -> np.ndarray:
        n = self.dim
        blocks = [A for A in self.algebra.generators] + [c - np.eye(n) for c in self.components]
        if not blocks:
            return np.eye(n)
        F = null_space(np.vstack(blocks), eps=1e-10)
        if F.shape[1] == 0:
            return np.zeros((n, n))
        G = self.invariant_metric()
        # G-orthogonal projector onto F
        return F @ np.linalg.solve(F.T @ G @ F, F.T @ G)

    def stabilizer(self, x, tol: float = 1e-9) -> StabilizerDescriptor:
        x = np.asarray(x, dtype=float)
        T = self.algebra.orbit_tangent(x)
        basis = null_space(T, eps=1e-10) if T.size else np.eye(self.algebra.k)
        discrete = [c for c in self.components if np.linalg.norm(c @ x - x) <= tol]
        # commutant of the stabilizer algebra as a conjugacy proxy
        mats = [self.algebra.matrix(b) for b in basis.T]
        n = self.dim
        if mats:
            comm = np.vstack([np.kron(np.eye(n), M) - np.kron(M.T, np.eye(n)) for M in mats])
            commutant_dim = null_space(comm, eps=1e-10).shape[1]
        else:
            commutant_dim = n * n
        key = f"matrix:dim={basis.shape[1]};comp={len(discrete) + 1};commutant={commutant_dim}"
        return StabilizerDescriptor("matrix", basis.shape[1], len(discrete) + 1, key,
                                    elements=discrete, algebra_basis=basis, rep=self)

    def to_json(self) -> dict:
        a = self.algebra
        return {
            "variant": "matrix",
            "dim": self.dim,
            "omega": a.space.omega.ravel().tolist(),
            "generators": a.generators.ravel().tolist(),
            "structure_constants": None if a.structure_constants is None
            else a.structure_constants.ravel().tolist(),
            "components": [c.ravel().tolist() for c in self.components],
        }


def su2_on_c2() -> MatrixGroup:
    """SU(2) acting on C^2 by its defining representation."""
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    # e_k = -(i/2) sigma_k satisfies [e_1, e_2] = e_3 cyclically
    gens = np.stack([realify(-0.5j * s) for s in (s1, s2, s3)])
    c = np.zeros((3, 3, 3))
    for i, j, l in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        c[i, j, l] = 1.0
        c[j, i, l] = -1.0
    return MatrixGroup(LieAlgebraAction(complex_space(2), gens, c))


def stabilizer(rep: CompactGroupRep, x) -> StabilizerDescriptor:
    return rep.stabilizer(x)


# --------------------------------------------------------------------------
# Hamiltonian flows


class IntegrationFailure(RuntimeError):
    pass


def fd_gradient(h: Callable, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    step = np.cbrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (h(x + e) - h(x - e)) / (2 * step)
    return g


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    h: Callable
    grad_h: Callable | None = None
    invariance_tol: float = 1e-10

    def gradient(self, x) -> np.ndarray:
        if self.grad_h is not None:
            return np.asarray(self.grad_h(x), dtype=float)
        return fd_gradient(self.h, x)

    def check_invariance(self, rep: CompactGroupRep, rng, n: int = 16) -> float:
        worst = 0.0
        for g in rep.sample_elements(rng, n):
            x = rng.normal(size=rep.dim)
            worst = max(worst, abs(self.h(g @ x) - self.h(x)))
        if worst > self.invariance_tol:
            raise ValueError(f"Hamiltonian is not invariant (residual {worst:.2e})")
        return worst


def hamiltonian_vector_field(space: SymplecticSpace, system: HamiltonianSystem) -> Callable:
    """X_h with X_h _| omega + dh = 0, i.e. X = omega^{-1} grad h."""
    Winv = np.linalg.inv(space.omega)
    return lambda x: Winv @ system.gradient(x)


def rk4(f: Callable, x0, t_end: float, dt: float, bound: float = 1e8) -> np.ndarray:
    n_steps = int(round(t_end / dt))
    x = np.asarray(x0, dtype=float).copy()
    traj = np.empty((n_steps + 1, x.size))
    traj[0] = x
    for i in range(n_steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > bound:
            raise IntegrationFailure(f"trajectory diverged at t={(i + 1) * dt:.4g}")
        traj[i + 1] = x
    return traj


def hamiltonian_flow_noether(action: LieAlgebraAction, system: HamiltonianSystem, x0,
                             t_end: float, dt: float) -> tuple[np.ndarray, float]:
    """Integrate X_h and report max_t |J(x(t)) - J(x0)|."""
    X = hamiltonian_vector_field(action.space, system)
    traj = rk4(X, x0, t_end, dt)
    J0 = _momentum_components(action, traj[0])
    drift = max((float(np.linalg.norm(_momentum_components(action, x) - J0)) for x in traj), default=0.0)
    return traj, drift
