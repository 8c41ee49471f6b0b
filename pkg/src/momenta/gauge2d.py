"""U(1) lattice gauge theory on triangulated closed oriented surfaces.

Conventions
-----------
* Edges are stored as sorted vertex pairs (a, b), a < b, oriented a -> b.
* Faces are stored as sorted triples (v0, v1, v2) together with a sign eps_f
  telling whether the sorted order agrees with the surface orientation.
* 2-cochains hold values on *oriented* faces, so d1 = boundary_2^T and
  sum_f (d1 alpha)_f = 0 for every 1-cochain alpha.
* Cup product on a face: (alpha u beta)(f) = eps_f alpha(v0 v1) beta(v1 v2).
* kappa(sigma, phi) = sum_f phi(v0(f)) sigma_f.
* The gauge action is theta -> theta - d0 phi and the momentum map is -F,
  so the identity checked is omega(-d0 phi, alpha) + kappa(-d1 alpha, phi) = 0
  with the plain cup product for omega.
"""
from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .symplin import SymplecticSpace, darboux_basis, numerical_rank, standard_form_matrix

TWO_PI = 2.0 * np.pi
IDENTITY_CONVENTION = "plain cup product, kappa at leading vertex, momentum map -F"


class CurvatureCutAmbiguity(UserWarning):
    pass


class NotFlat(ValueError):
    pass


def _orientation_sign(tri) -> tuple:
    """Sorted triple and the parity of the sorting permutation."""
    order = np.argsort(tri, kind="stable")
    perm = list(order)
    inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
    return tuple(int(tri[i]) for i in order), (1 if inversions % 2 == 0 else -1)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    n_vertices: int
    oriented_faces: np.ndarray  # F x 3, counterclockwise

    def __post_init__(self):
        F = np.asarray(self.oriented_faces, dtype=int)
        object.__setattr__(self, "oriented_faces", F)
        self._check()

    # ---- combinatorics
    @cached_property
    def _cells(self):
        faces, signs = [], []
        for tri in self.oriented_faces:
            s, e = _orientation_sign(tri)
            faces.append(s)
            signs.append(e)
        edges = sorted({(f[i], f[j]) for f in faces for i, j in ((0, 1), (1, 2), (0, 2))})
        index = {e: i for i, e in enumerate(edges)}
        return np.array(faces, dtype=int), np.array(signs, dtype=int), np.array(edges, dtype=int), index

    @property
    def faces(self) -> np.ndarray:
        return self._cells[0]

    @property
    def face_signs(self) -> np.ndarray:
        return self._cells[1]

    @property
    def edges(self) -> np.ndarray:
        return self._cells[2]

    @property
    def edge_index(self) -> dict:
        return self._cells[3]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def face_edges(self) -> np.ndarray:
        """Indices of edges (v0v1, v1v2, v0v2) of each sorted face."""
        idx = self.edge_index
        return np.array([[idx[(f[0], f[1])], idx[(f[1], f[2])], idx[(f[0], f[2])]] for f in self.faces])

    @cached_property
    def boundary1(self) -> sps.csr_matrix:
        E = self.edges
        rows = np.concatenate([E[:, 0], E[:, 1]])
        cols = np.concatenate([np.arange(len(E))] * 2)
        vals = np.concatenate([-np.ones(len(E)), np.ones(len(E))])
        return sps.csr_matrix((vals, (rows, cols)), shape=(self.n_vertices, len(E)))

    @cached_property
    def boundary2(self) -> sps.csr_matrix:
        FE = self.face_edges
        eps = self.face_signs
        rows = FE.ravel()
        cols = np.repeat(np.arange(self.n_faces), 3)
        vals = (eps[:, None] * np.array([1.0, 1.0, -1.0])[None, :]).ravel()
        return sps.csr_matrix((vals, (rows, cols)), shape=(self.n_edges, self.n_faces))

    @property
    def d0(self) -> sps.csr_matrix:
        return self.boundary1.T.tocsr()

    @property
    def d1(self) -> sps.csr_matrix:
        return self.boundary2.T.tocsr()

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def _check(self) -> None:
        counts: dict = {}
        for tri in self.oriented_faces:
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                counts.setdefault((min(a, b), max(a, b)), []).append(1 if a < b else -1)
        for e, c in counts.items():
            if len(c) != 2 or sum(c) != 0:
                raise ValueError(f"edge {e} is not shared by exactly two oppositely oriented faces")
        if len({tuple(sorted(t)) for t in self.oriented_faces.tolist()}) != len(self.oriented_faces):
            raise ValueError("repeated face")
        if (self.boundary1 @ self.boundary2).count_nonzero():
            B = (self.boundary1 @ self.boundary2).toarray()
            if np.any(B != 0):
                raise ValueError("boundary of boundary is nonzero")
        if (2 - self.euler_characteristic) % 2:
            raise ValueError("odd Euler characteristic")

    # ---- serialization
    def to_json(self) -> dict:
        return {"vertices": int(self.n_vertices), "faces": self.oriented_faces.tolist()}

    @classmethod
    def from_json(cls, data) -> "SurfaceMesh":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["vertices"]), np.asarray(data["faces"], dtype=int))


def build_genus_surface(g: int, k: int = 3, rings: int = 2) -> SurfaceMesh:
    """Triangulated 4g-gon with side word a1 b1 a1^-1 b1^-1 ... ; each side cut into k segments."""
    if g < 1:
        raise ValueError("genus must be at least 1")
    if k < 3:
        raise ValueError("at least three segments per side are needed for a simplicial identification")
    if rings < 1:
        raise ValueError("rings must be positive")
    n_sides = 4 * g
    N = n_sides * k
    # vertex 0: all polygon corners; then interior points of each letter
    letter_vertex = {}
    nxt = 1
    for i in range(g):
        for letter in ("a", "b"):
            for j in range(1, k):
                letter_vertex[(letter, i, j)] = nxt
                nxt += 1
    boundary = []
    for s in range(n_sides):
        i, t = divmod(s, 4)
        letter = "a" if t in (0, 2) else "b"
        forward = t in (0, 1)
        boundary.append(0)
        for j in range(1, k):
            boundary.append(letter_vertex[(letter, i, j if forward else k - j)])
    ring_prev = boundary
    faces = []
    for _ in range(rings):
        ring = list(range(nxt, nxt + N))
        nxt += N
        for i in range(N):
            b0, b1 = ring_prev[i], ring_prev[(i + 1) % N]
            r0, r1 = ring[i], ring[(i + 1) % N]
            faces.append((b0, b1, r1))
            faces.append((b0, r1, r0))
        ring_prev = ring
    center = nxt
    nxt += 1
    for i in range(N):
        faces.append((ring_prev[i], ring_prev[(i + 1) % N], center))
    mesh = SurfaceMesh(nxt, np.array(faces, dtype=int))
    if mesh.euler_characteristic != 2 - 2 * g:
        raise AssertionError("Euler characteristic mismatch")
    return mesh


# --------------------------------------------------------------------------
# cochain algebra


def _as_cochain(mesh: SurfaceMesh, a, degree: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = {0: mesh.n_vertices, 1: mesh.n_edges, 2: mesh.n_faces}[degree]
    if a.shape != (n,):
        raise ValueError(f"expected a {degree}-cochain of length {n}, got shape {a.shape}")
    return a


def cup11(mesh: SurfaceMesh, alpha, beta) -> np.ndarray:
    """Oriented face values of alpha u beta."""
    alpha = _as_cochain(mesh, alpha, 1)
    beta = _as_cochain(mesh, beta, 1)
    FE = mesh.face_edges
    return mesh.face_signs * alpha[FE[:, 0]] * beta[FE[:, 1]]


def wedge_form(mesh: SurfaceMesh, alpha, beta, convention: str = "antisymmetric") -> float:
    """Discrete omega(alpha, beta) = int alpha ^ beta."""
    if convention == "plain":
        return float(np.sum(cup11(mesh, alpha, beta)))
    if convention == "antisymmetric":
        return float(0.5 * np.sum(cup11(mesh, alpha, beta) - cup11(mesh, beta, alpha)))
    raise ValueError(f"unknown convention {convention!r}")


def kappa(mesh: SurfaceMesh, sigma, phi) -> float:
    sigma = _as_cochain(mesh, sigma, 2)
    phi = _as_cochain(mesh, phi, 0)
    return float(np.sum(phi[mesh.faces[:, 0]] * sigma))


def gauge_action(mesh: SurfaceMesh, theta, phi) -> np.ndarray:
    return _as_cochain(mesh, theta, 1) - mesh.d0 @ _as_cochain(mesh, phi, 0)


def momentum_relation_residual(mesh: SurfaceMesh, theta, phi, alpha, convention: str = "plain") -> float:
    """|omega(xi_phi, alpha) + kappa(DJ alpha, phi)| with xi_phi = -d0 phi and DJ = -d1.

    J is affine in theta, so the residual does not depend on theta."""
    _as_cochain(mesh, theta, 1)
    xi = -(mesh.d0 @ _as_cochain(mesh, phi, 0))
    dj = -(mesh.d1 @ _as_cochain(mesh, alpha, 1))
    return abs(wedge_form(mesh, xi, alpha, convention) + kappa(mesh, dj, phi))


def plaquette_sums(mesh: SurfaceMesh, theta) -> np.ndarray:
    return mesh.d1 @ _as_cochain(mesh, theta, 1)


def curvature_and_chern(mesh: SurfaceMesh, theta) -> tuple[np.ndarray, int]:
    s = plaquette_sums(mesh, theta)
    n = np.rint(s / TWO_PI)
    odd = np.abs(np.abs(s) / np.pi - (2 * np.floor(np.abs(s) / TWO_PI) + 1))
    if np.any(odd * np.pi < 1e-6):
        warnings.warn("curvature cut ambiguity", CurvatureCutAmbiguity, stacklevel=2)
    F = s - TWO_PI * n
    c = -int(np.sum(n))
    return F, c


def central_ym_connection(mesh: SurfaceMesh, c: int) -> np.ndarray:
    """Connection with uniform curvature 2 pi c / |F| (combinatorial areas) and Chern number c."""
    nF = mesh.n_faces
    if abs(c) * 2 >= nF:
        raise ValueError("|c| too large for this mesh")
    if c == 0:
        return np.zeros(mesh.n_edges)
    target = np.full(nF, TWO_PI * c / nF)
    target[:abs(c)] -= TWO_PI * np.sign(c)
    sol = spla.lsqr(mesh.d1, target, atol=1e-15, btol=1e-15, iter_lim=100000)[0]
    # polish with a dense solve on the normal equations if needed
    r = mesh.d1 @ sol - target
    if np.abs(r).max() > 1e-10:
        L2 = (mesh.d1 @ mesh.d1.T).tocsc()
        L2 = L2 + sps.csc_matrix(([1.0], ([0], [0])), shape=L2.shape)
        y = spla.spsolve(L2, target)
        sol = mesh.d1.T @ y
    return sol


# --------------------------------------------------------------------------
# Hodge theory


def _pinned_solve(L: sps.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve L x = rhs for a graph-Laplacian-like L with one-dimensional kernel (constants)."""
    L = L.tolil(copy=True)
    rhs = rhs.copy()
    L[0, :] = 0
    L[0, 0] = 1.0
    rhs[0] = 0.0
    return spla.spsolve(L.tocsr(), rhs)


@dataclass
class HodgeWeights:
    star0: np.ndarray
    star1: np.ndarray
    star2: np.ndarray

    @classmethod
    def combinatorial(cls, mesh: SurfaceMesh) -> "HodgeWeights":
        return cls(np.ones(mesh.n_vertices), np.ones(mesh.n_edges), np.ones(mesh.n_faces))


def hodge_split(mesh: SurfaceMesh, alpha, weights: HodgeWeights | None = None):
    """alpha = d0 a + delta1 b + h, orthogonal for the diagonal star inner products."""
    alpha = _as_cochain(mesh, alpha, 1)
    w = weights or HodgeWeights.combinatorial(mesh)
    S1 = sps.diags(w.star1)
    S1i = sps.diags(1.0 / w.star1)
    d0, d1 = mesh.d0, mesh.d1
    a = _pinned_solve((d0.T @ S1 @ d0).tocsr(), d0.T @ S1 @ alpha)
    exact = d0 @ a
    # coexact = delta1 b with delta1 = S1^{-1} d1^T S2; solve for u = S2 b
    u = _pinned_solve((d1 @ S1i @ d1.T).tocsr(), d1 @ alpha)
    coexact = S1i @ (d1.T @ u)
    harmonic = alpha - exact - coexact
    return exact, coexact, harmonic


def hodge_orthogonality(mesh: SurfaceMesh, parts, weights: HodgeWeights | None = None) -> float:
    w = weights or HodgeWeights.combinatorial(mesh)
    e, c, h = parts
    ip = lambda x, y: float(np.sum(w.star1 * x * y))
    return max(abs(ip(e, c)), abs(ip(e, h)), abs(ip(c, h)))


def laplacian1(mesh: SurfaceMesh) -> sps.csr_matrix:
    return (mesh.d0 @ mesh.d0.T + mesh.d1.T @ mesh.d1).tocsr()


def harmonic_dimension(mesh: SurfaceMesh) -> int:
    """Kernel dimension of the 1-Laplacian (dense eigen-decomposition)."""
    ev = np.linalg.eigvalsh(laplacian1(mesh).toarray())
    return int(np.sum(ev < 1e-9 * max(1.0, ev.max())))


# --------------------------------------------------------------------------
# homology and cohomology bases


@dataclass
class CycleBasis:
    cycles: np.ndarray          # 2g x E integer chains
    cocycles: np.ndarray        # 2g x E integer closed cochains dual to the cycles
    harmonic: np.ndarray        # 2g x E harmonic representatives
    intersection: np.ndarray    # 2g x 2g integer matrix
    generator_edges: list = field(default_factory=list)

    @property
    def pairing(self) -> np.ndarray:
        return self.harmonic @ self.cycles.T


def _tree_cotree(mesh: SurfaceMesh):
    V, E = mesh.n_vertices, mesh.n_edges
    adj = [[] for _ in range(V)]
    for i, (a, b) in enumerate(mesh.edges):
        adj[a].append((b, i))
        adj[b].append((a, i))
    parent_edge = [-1] * V
    seen = [False] * V
    seen[0] = True
    q = deque([0])
    tree = set()
    while q:
        u = q.popleft()
        for v, e in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent_edge[v] = e
                tree.add(e)
                q.append(v)
    # dual graph through non-tree edges
    edge_faces = [[] for _ in range(E)]
    for f, fe in enumerate(mesh.face_edges):
        for e in fe:
            edge_faces[e].append(f)
    fseen = [False] * mesh.n_faces
    fseen[0] = True
    order = [0]
    fparent = [-1] * mesh.n_faces
    q = deque([0])
    cotree = set()
    while q:
        f = q.popleft()
        for e in mesh.face_edges[f]:
            if e in tree:
                continue
            for h in edge_faces[e]:
                if h != f and not fseen[h]:
                    fseen[h] = True
                    fparent[h] = e
                    cotree.add(e)
                    order.append(h)
                    q.append(h)
    generators = [e for e in range(E) if e not in tree and e not in cotree]
    return parent_edge, tree, cotree, generators, order, fparent


def _tree_path(mesh: SurfaceMesh, parent_edge, u: int) -> np.ndarray:
    """Chain along the spanning tree from the root to u."""
    chain = np.zeros(mesh.n_edges, dtype=int)
    while u != 0:
        e = parent_edge[u]
        a, b = mesh.edges[e]
        # traverse parent -> u
        if b == u:
            chain[e] += 1
            u = a
        else:
            chain[e] -= 1
            u = b
    return chain


def homology_cycle_basis(mesh: SurfaceMesh) -> CycleBasis:
    parent_edge, tree, cotree, gens, order, fparent = _tree_cotree(mesh)
    g2 = len(gens)
    if g2 != 2 * mesh.genus:
        raise AssertionError("tree-cotree produced the wrong number of generators")
    E = mesh.n_edges
    cycles = np.zeros((g2, E), dtype=int)
    for i, e in enumerate(gens):
        a, b = mesh.edges[e]
        c = _tree_path(mesh, parent_edge, a) - _tree_path(mesh, parent_edge, b)
        c[e] += 1
        cycles[i] = c
        if np.any(mesh.boundary1 @ c):
            raise AssertionError("generator chain is not a cycle")
    d1 = mesh.d1.tocsr()
    cocycles = np.zeros((g2, E))
    for i, e in enumerate(gens):
        z = np.zeros(E)
        z[e] = 1.0
        # leaves first: each non-root face fixes the value on its parent edge
        for f in reversed(order[1:]):
            pe = fparent[f]
            row = d1.getrow(f)
            coef = row[0, pe]
            z[pe] = 0.0
            z[pe] = -float((row @ z)[0]) / coef
        cocycles[i] = z
    if np.abs(d1 @ cocycles.T).max() > 1e-9:
        raise AssertionError("cotree peeling did not produce closed cochains")
    cocycles = np.rint(cocycles)
    L0 = (mesh.d0.T @ mesh.d0).tocsr()
    harmonic = np.array([z - mesh.d0 @ _pinned_solve(L0, mesh.d0.T @ z) for z in cocycles])
    M = np.array([[wedge_form(mesh, hi, hj) for hj in harmonic] for hi in harmonic])
    Q = np.rint(M)
    if np.abs(M - Q).max() > 0.1:
        raise AssertionError("intersection matrix is not integral")
    return CycleBasis(cycles, cocycles, harmonic, Q.astype(int), gens)


def wilson_loops(mesh: SurfaceMesh, theta, cycles: np.ndarray) -> np.ndarray:
    """Holonomy angles in (-pi, pi]."""
    s = np.asarray(cycles, dtype=float) @ _as_cochain(mesh, theta, 1)
    return wrap_angle(s)


def wrap_angle(x) -> np.ndarray:
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(y <= -np.pi, y + TWO_PI, y)


def wilson_flat_moduli(mesh: SurfaceMesh, theta, cycles: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    F, _ = curvature_and_chern(mesh, theta)
    if np.abs(F).max() > tol:
        bad = int(np.argmax(np.abs(F)))
        raise NotFlat(f"connection is not flat: face {bad} has curvature {F[bad]:.3e}")
    return wilson_loops(mesh, theta, cycles)


def flat_connection_from_holonomy(basis: CycleBasis, target) -> np.ndarray:
    """theta = sum_i t_i h_i, with h the harmonic duals of the cycles."""
    P = basis.pairing  # <h_i, gamma_j>
    coef = np.linalg.solve(P.T, np.asarray(target, dtype=float))
    return coef @ basis.harmonic


def harmonic_coefficients(mesh: SurfaceMesh, basis: CycleBasis, theta) -> np.ndarray:
    """Coefficients of the harmonic part of a closed cochain in the dual basis."""
    _, _, h = hodge_split(mesh, theta)
    return np.linalg.lstsq(basis.harmonic.T, h, rcond=None)[0]


def gauge_related(mesh: SurfaceMesh, basis: CycleBasis, theta1, theta2, tol: float = 1e-8) -> bool:
    """Closed connections are gauge related iff their harmonic coefficients differ by 2 pi Z."""
    d = harmonic_coefficients(mesh, basis, np.asarray(theta1) - np.asarray(theta2)) / TWO_PI
    return bool(np.abs(d - np.rint(d)).max() <= tol)


def reduced_intersection_check(mesh: SurfaceMesh, basis: CycleBasis | None = None) -> dict:
    basis = basis or homology_cycle_basis(mesh)
    H = basis.harmonic
    M = np.array([[wedge_form(mesh, hi, hj) for hj in H] for hi in H])
    n = M.shape[0]
    full = numerical_rank(M, 1e-10) == n
    antisym = float(np.abs(M + M.T).max())
    S = darboux_basis(SymplecticSpace(M)) if full else None
    darboux_res = float(np.abs(S.T @ M @ S - standard_form_matrix(n // 2)).max()) if full else np.inf
    Q = basis.intersection
    congruent = float(np.abs(M - Q).max())
    det = int(round(np.linalg.det(Q))) if n else 1
    return {
        "matrix": M,
        "intersection": Q,
        "full_rank": bool(full),
        "antisymmetry": antisym,
        "darboux_residual": darboux_res,
        "intersection_distance": congruent,
        "intersection_det": det,
        "intersection_antisymmetric": bool(np.all(Q == -Q.T)),
        "ok": bool(full and antisym <= 1e-10 and darboux_res <= 1e-10 and congruent <= 1e-8 and det == 1
                   and np.all(Q == -Q.T)),
    }
