"""Finite-dimensional symplectic linear algebra.

Spaces carry a constant antisymmetric form ``omega`` together with an auxiliary
inner product ``metric``.  Subspaces are stored as column bases; every
comparison between subspaces goes through orthogonal projectors so that the
choice of basis never matters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

RANK_EPS = 1e-12
SUBSPACE_TOL = 1e-8


class ConsistencyError(AssertionError):
    """Two routes to the same mathematical fact disagree numerically."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def rank_tolerance(A: np.ndarray, eps: float = RANK_EPS) -> float:
    if A.size == 0:
        return 0.0
    s_max = np.linalg.norm(A, 2)
    return max(A.shape) * eps * s_max


def numerical_rank(A, eps: float = RANK_EPS) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > max(A.shape) * eps * s[0])) if s[0] > 0 else 0


def null_space(A, eps: float = RANK_EPS) -> np.ndarray:
    """Orthonormal basis of ker A (columns)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(s > rank_tolerance(A, eps))) if s.size and s[0] > 0 else 0
    return vh[r:].T.copy()


def orthonormal_basis(A, eps: float = RANK_EPS) -> np.ndarray:
    """Orthonormal basis of the column span of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(A, eps))) if s[0] > 0 else 0
    return u[:, :r].copy()


def canonical_signs(B: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive (deterministic bases)."""
    B = np.array(B, dtype=float, copy=True)
    for j in range(B.shape[1]):
        i = int(np.argmax(np.abs(B[:, j])))
        if B[i, j] < 0:
            B[:, j] *= -1
    return B


@dataclass(frozen=True, eq=False)
class SymplecticSpace:
    omega: np.ndarray
    metric: np.ndarray | None = None
    tol: float = 1e-12

    def __post_init__(self):
        omega = _frozen(self.omega)
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
            raise ValueError("omega must be a square matrix")
        n = omega.shape[0]
        if n == 0 or n % 2:
            raise ValueError(f"dimension must be positive and even, got {n}")
        if np.max(np.abs(omega + omega.T)) > self.tol:
            raise ValueError("omega is not antisymmetric")
        if numerical_rank(omega) < n:
            raise ValueError("omega is degenerate")
        metric = np.eye(n) if self.metric is None else self.metric
        metric = _frozen(metric)
        if metric.shape != (n, n) or np.max(np.abs(metric - metric.T)) > 1e-12:
            raise ValueError("metric must be a symmetric dim x dim matrix")
        if np.min(np.linalg.eigvalsh(metric)) <= 0:
            raise ValueError("metric must be positive definite")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "metric", metric)

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    def form(self, x, y) -> float:
        return float(np.asarray(x) @ self.omega @ np.asarray(y))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "omega": self.omega.ravel().tolist(),
            "metric": self.metric.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, data) -> "SymplecticSpace":
        if isinstance(data, str):
            data = json.loads(data)
        n = int(data["dim"])
        omega = np.asarray(data["omega"], dtype=float).reshape(n, n)
        metric = data.get("metric")
        if metric is not None:
            metric = np.asarray(metric, dtype=float).reshape(n, n)
        # loaded data is only trusted to 1e-12
        return cls(omega, metric, tol=1e-12)


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray
    eps: float = RANK_EPS
    _orth: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise ValueError("basis must be a 2D array (ambient_dim x k)")
        if B.shape[1] > 0:
            s = np.linalg.svd(B, compute_uv=False)
            if s[-1] <= max(B.shape) * self.eps * s[0] or B.shape[1] > B.shape[0]:
                raise ValueError("basis is rank deficient")
        object.__setattr__(self, "basis", _frozen(B))
        object.__setattr__(self, "_orth", _frozen(orthonormal_basis(B, self.eps)))

    @classmethod
    def span(cls, vectors, ambient_dim: int | None = None, eps: float = RANK_EPS) -> "Subspace":
        """Subspace spanned by possibly dependent column vectors."""
        A = np.asarray(vectors, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.size == 0:
            if ambient_dim is None:
                raise ValueError("ambient_dim needed for an empty span")
            return cls.zero(ambient_dim)
        return cls(orthonormal_basis(A, eps), eps)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def orthonormal(self) -> np.ndarray:
        return self._orth

    def projector(self) -> np.ndarray:
        Q = self._orth
        return Q @ Q.T

    def distance(self, other: "Subspace") -> float:
        """Frobenius distance between orthogonal projectors."""
        return float(np.linalg.norm(self.projector() - other.projector()))

    def equals(self, other: "Subspace", tol: float = SUBSPACE_TOL) -> bool:
        return self.distance(other) <= tol

    def contains(self, other: "Subspace", tol: float = SUBSPACE_TOL) -> bool:
        if other.dim == 0:
            return True
        resid = other.orthonormal - self.projector() @ other.orthonormal
        return float(np.linalg.norm(resid)) <= tol

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace.span(np.hstack([self.basis, other.basis]), self.ambient_dim, self.eps)

    def intersect(self, other: "Subspace") -> "Subspace":
        n = self.ambient_dim
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(n)
        # x = A a = B b  <=>  [A, -B] (a, b) = 0
        A, B = self.orthonormal, other.orthonormal
        N = null_space(np.hstack([A, -B]), eps=1e-10)
        if N.shape[1] == 0:
            return Subspace.zero(n)
        return Subspace.span(A @ N[: A.shape[1]], n, self.eps)

    def complement(self, metric: np.ndarray | None = None) -> "Subspace":
        """Orthogonal complement with respect to ``metric`` (identity by default)."""
        n = self.ambient_dim
        if self.dim == 0:
            return Subspace.full(n)
        G = np.eye(n) if metric is None else np.asarray(metric)
        return Subspace(null_space(self.basis.T @ G, self.eps), self.eps)

    def to_json(self) -> dict:
        return {"dim": self.ambient_dim, "k": self.dim, "basis": self.basis.ravel().tolist()}

    @classmethod
    def from_json(cls, data) -> "Subspace":
        if isinstance(data, str):
            data = json.loads(data)
        n, k = int(data["dim"]), int(data["k"])
        return cls(np.asarray(data["basis"], dtype=float).reshape(n, k))


@dataclass(frozen=True, eq=False)
class ComplexStructure:
    J: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "J", _frozen(self.J))

    def check(self, space: SymplecticSpace, tol: float = 1e-10) -> None:
        J = self.J
        n = space.dim
        # relative to |J|^2: compatible J for a badly conditioned omega has large entries
        if np.max(np.abs(J @ J + np.eye(n))) > tol * max(1.0, np.linalg.norm(J, 2) ** 2):
            raise ValueError("J does not square to -1")
        g = space.omega @ J
        if np.max(np.abs(g - g.T)) > tol * max(1.0, np.abs(g).max()):
            raise ValueError("omega(., J .) is not symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) <= 0:
            raise ValueError("omega(., J .) is not positive definite")


def make_standard(n: int) -> SymplecticSpace:
    """Canonical space R^{2n} with basis (q_1..q_n, p_1..p_n)."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    I = np.eye(n)
    Z = np.zeros((n, n))
    return SymplecticSpace(np.block([[Z, I], [-I, Z]]))


def _check_in(space: SymplecticSpace, V: Subspace) -> None:
    if V.ambient_dim != space.dim:
        raise ValueError(f"subspace lives in R^{V.ambient_dim}, space has dim {space.dim}")


def symplectic_orthogonal(space: SymplecticSpace, V: Subspace) -> Subspace:
    _check_in(space, V)
    if V.dim == 0:
        return Subspace.full(space.dim)
    return Subspace(null_space(V.basis.T @ space.omega, V.eps), V.eps)


def double_orthogonal_check(space: SymplecticSpace, V: Subspace) -> tuple[bool, float]:
    VWW = symplectic_orthogonal(space, symplectic_orthogonal(space, V))
    d = V.distance(VWW)
    return d <= SUBSPACE_TOL, d


def is_symplectic_subspace(space: SymplecticSpace, V: Subspace) -> bool:
    """Nondegeneracy of omega on V, decided three ways which must agree."""
    _check_in(space, V)
    n, k = space.dim, V.dim
    if k == 0:
        return True
    Q = V.orthonormal
    restricted = Q.T @ space.omega @ Q
    # scale by |omega|, not by the restriction, so an isotropic V has rank 0
    scale = np.linalg.norm(space.omega, 2)
    s = np.linalg.svd(restricted, compute_uv=False)
    by_rank = int(np.sum(s > n * 1e-10 * scale)) == k

    Vw = symplectic_orthogonal(space, V)
    by_direct_sum = (k + Vw.dim == n) and numerical_rank(np.hstack([Q, Vw.orthonormal]), eps=1e-10) == n
    by_intersection = V.intersect(Vw).dim == 0

    # Gamma_V: v -> omega(v, .)|_V hits every dual basis functional
    U, sv, Vh = np.linalg.svd(restricted.T)
    keep = sv > n * 1e-10 * scale
    sol = Vh[keep].T @ np.diag(1.0 / sv[keep]) @ U[:, keep].T
    by_gamma = bool(np.linalg.norm(restricted.T @ sol - np.eye(k)) <= 1e-8)

    verdicts = {by_rank, by_direct_sum, by_intersection, by_gamma}
    if len(verdicts) != 1:
        raise ConsistencyError(
            f"rank={by_rank} direct_sum={by_direct_sum} "
            f"intersection={by_intersection} gamma={by_gamma}"
        )
    return by_rank


def compatible_complex_structure(space: SymplecticSpace) -> ComplexStructure:
    """J = A (-A^2)^{-1/2} with omega(x, y) = <A x, y>_metric."""
    G = space.metric
    # omega(x, y) = x^T W y = (A x)^T G y  =>  A = (W G^{-1})^T = -G^{-1} W
    A = -np.linalg.solve(G, space.omega)
    # A is G-antisymmetric; symmetrize in G^{1/2} coordinates
    Gh = sla.sqrtm(G).real
    Ghi = np.linalg.inv(Gh)
    S = Gh @ A @ Ghi
    S = 0.5 * (S - S.T)
    # J is the orthogonal polar factor S (-S^2)^{-1/2}; the SVD route avoids squaring the condition number
    if numerical_rank(S) < S.shape[0]:
        raise np.linalg.LinAlgError("omega/metric pair is ill-conditioned")
    Js, _ = sla.polar(S)
    J = Ghi @ Js @ Gh
    cs = ComplexStructure(J)
    cs.check(space)
    return cs


def darboux_basis(space: SymplecticSpace) -> np.ndarray:
    """Matrix S with S^T omega S = standard block form (symplectic Gram-Schmidt)."""
    W = space.omega
    n = space.dim // 2
    remaining = [np.eye(space.dim)[:, i] for i in range(space.dim)]
    es, fs = [], []
    for _ in range(n):
        # pick the pair with the largest pairing for stability
        best, pair = 0.0, None
        for i, u in enumerate(remaining):
            for j in range(i + 1, len(remaining)):
                v = remaining[j]
                val = abs(u @ W @ v)
                if val > best:
                    best, pair = val, (i, j)
        if pair is None or best <= 1e-14:
            raise np.linalg.LinAlgError("form degenerated during Gram-Schmidt")
        i, j = pair
        e, f = remaining[i], remaining[j]
        c = e @ W @ f
        f = f / c
        es.append(e)
        fs.append(f)
        rest = [w for k, w in enumerate(remaining) if k not in (i, j)]
        # project out span{e, f}: w -> w - omega(w, f) e + omega(w, e) f
        remaining = [w - (w @ W @ f) * e + (w @ W @ e) * f for w in rest]
    return np.column_stack(es + fs)


def fixed_point_splitting(space: SymplecticSpace, rep) -> tuple[Subspace, Subspace]:
    """X = X_G (+) X_G^omega for a symplectic compact representation."""
    rep.check_symplectic(space.omega)
    P = rep.averaging_projector()
    XG = Subspace.span(P, space.dim) if np.linalg.norm(P) > 1e-12 else Subspace.zero(space.dim)
    comp = symplectic_orthogonal(space, XG)
    if not is_symplectic_subspace(space, XG):
        raise ConsistencyError("fixed subspace is not symplectic")
    # oblique projectors along the splitting must sum to the identity
    M = np.hstack([XG.basis, comp.basis])
    if M.shape[1] != space.dim or numerical_rank(M, 1e-10) != space.dim:
        raise ConsistencyError("X_G and its symplectic orthogonal do not span")
    Minv = np.linalg.inv(M)
    k = XG.dim
    P1 = M[:, :k] @ Minv[:k]
    P2 = M[:, k:] @ Minv[k:]
    if np.linalg.norm(P1 + P2 - np.eye(space.dim)) > SUBSPACE_TOL:
        raise ConsistencyError("projector sum differs from identity")
    return XG, comp


def standard_form_matrix(n: int) -> np.ndarray:
    return make_standard(n).omega.copy()
