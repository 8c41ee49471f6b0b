"""Constructive local normal forms for smooth maps and equivariant momentum maps.

Domain chart coordinates are (x1, x2) with x1 in ker Df(m) and x2 in its
orthogonal complement (coimg); target coordinates are (y1, y2) with y1 in
coker and y2 in img, both measured from f(m).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .action import CompactGroupRep, LieAlgebraAction, momentum_jacobian, _momentum_components
from .symplin import canonical_signs, null_space, numerical_rank, orthonormal_basis

NEWTON_MAXIT = 50
NEWTON_STEP_TOL = 1e-12
RADII = [2.0 ** -i for i in range(21)]
N_SPHERE = 32


class IllSeparatedRank(UserWarning):
    pass


class NoLocalInversion(RuntimeError):
    pass


class UpgradeRefused(RuntimeError):
    pass


def fd_jacobian(f: Callable, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = np.cbrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    f0 = np.atleast_1d(f(x))
    return np.column_stack(cols) if cols else np.zeros((f0.size, 0))


@dataclass(frozen=True, eq=False)
class SmoothMap:
    f: Callable
    domain_dim: int
    target_dim: int
    base_point: np.ndarray
    jacobian: Callable | None = None

    def __post_init__(self):
        m = np.asarray(self.base_point, dtype=float).ravel()
        object.__setattr__(self, "base_point", m)
        if m.size != self.domain_dim:
            raise ValueError("base point has the wrong dimension")
        if self.jacobian is not None and self.target_dim:
            J = self.jac(m)
            Jfd = fd_jacobian(self.__call__, m)
            scale = max(1.0, np.abs(Jfd).max())
            if np.abs(J - Jfd).max() > 1e-5 * scale:
                raise ValueError("analytic jacobian disagrees with finite differences")

    def __call__(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float))

    def jac(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian is None:
            return fd_jacobian(self.__call__, x).reshape(self.target_dim, self.domain_dim)
        return np.asarray(self.jacobian(x), dtype=float).reshape(self.target_dim, self.domain_dim)


@dataclass(frozen=True, eq=False)
class LinearSplitting:
    ker: np.ndarray
    coimg: np.ndarray
    coker: np.ndarray
    img: np.ndarray
    T_hat: np.ndarray
    ill_separated: bool = False

    @property
    def dims(self) -> dict:
        return {"ker": self.ker.shape[1], "coimg": self.coimg.shape[1],
                "coker": self.coker.shape[1], "img": self.img.shape[1]}

    def check(self, T: np.ndarray, tol: float = 1e-10) -> float:
        n, p = self.ker.shape[0], self.img.shape[0]
        r1 = np.linalg.norm(self.ker @ self.ker.T + self.coimg @ self.coimg.T - np.eye(n))
        r2 = np.linalg.norm(self.coker @ self.coker.T + self.img @ self.img.T - np.eye(p))
        r3 = np.linalg.norm(self.img.T @ T @ self.coimg - self.T_hat)
        worst = max(r1, r2, r3)
        if worst > tol * max(1.0, np.linalg.norm(T)):
            raise AssertionError(f"splitting invariant violated ({worst:.2e})")
        return worst


def _average_basis(B: np.ndarray, average: Callable | None) -> np.ndarray:
    if average is None or B.shape[1] == 0:
        return B
    P = average(B @ B.T)
    return canonical_signs(orthonormal_basis(P, eps=1e-10))


def split_jacobian(T, tol: float | None = None, average_domain: Callable | None = None,
                   average_target: Callable | None = None) -> LinearSplitting:
    """SVD-based ker/coimg/coker/img splitting of a matrix."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    p, n = T.shape
    U, s, Vt = np.linalg.svd(T)
    smax = s[0] if s.size else 0.0
    if tol is None:
        tol = max(1e-9 * smax, 1e-12)
    r = int(np.sum(s > tol))
    ill = False
    if 0 < r < s.size and s[r] > 0 and s[r - 1] / max(s[r], 1e-300) < 10:
        ill = True
    if r > 0 and s[r - 1] / tol < 10:
        ill = True
    if ill:
        warnings.warn("ill-separated rank", IllSeparatedRank, stacklevel=2)
    V = Vt.T
    K = canonical_signs(V[:, r:])
    C = canonical_signs(V[:, :r])
    Ck = canonical_signs(U[:, r:])
    I = canonical_signs(U[:, :r])
    K = _average_basis(K, average_domain)
    if average_domain is not None and K.shape[1]:
        C = canonical_signs(null_space(K.T)) if K.shape[1] < n else np.zeros((n, 0))
    Ck = _average_basis(Ck, average_target)
    if average_target is not None and Ck.shape[1]:
        I = canonical_signs(null_space(Ck.T)) if Ck.shape[1] < p else np.zeros((p, 0))
    T_hat = I.T @ T @ C
    if r and numerical_rank(T_hat) < r:
        raise np.linalg.LinAlgError("restricted jacobian is not invertible")
    return LinearSplitting(K, C, Ck, I, T_hat, ill)


def damped_newton(g: Callable, jac: Callable, x0: np.ndarray, maxit: int = NEWTON_MAXIT):
    """Solve g(x) = 0; returns (x, converged)."""
    x = np.asarray(x0, dtype=float).copy()
    if x.size == 0:
        return x, True
    r = g(x)
    for _ in range(maxit):
        step = np.linalg.lstsq(jac(x), -r, rcond=None)[0]
        t = 1.0
        nr0 = np.linalg.norm(r)
        for _ in range(30):
            xn = x + t * step
            rn = g(xn)
            if np.all(np.isfinite(rn)) and np.linalg.norm(rn) <= nr0 * (1 - 1e-4 * t) + 1e-300:
                break
            t *= 0.5
        else:
            if np.linalg.norm(step) <= NEWTON_STEP_TOL * (1 + np.linalg.norm(x)):
                return x, True
            return x, False
        x, r = xn, rn
        if np.linalg.norm(t * step) <= NEWTON_STEP_TOL * (1 + np.linalg.norm(x)):
            return x, True
        if np.linalg.norm(r) == 0.0:
            return x, True
    return x, bool(np.linalg.norm(r) <= 1e-12 * (1 + np.linalg.norm(x)))


@dataclass(frozen=True, eq=False)
class DomainChart:
    """psi(x1, x2) = (x1, T_hat^{-1} pr_img (f(m + K x1 + C x2) - f(m)))."""

    fmap: SmoothMap
    sp: LinearSplitting
    validity_radius: float = 1.0

    @property
    def n_ker(self) -> int:
        return self.sp.ker.shape[1]

    def point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.n_ker
        return self.fmap.base_point + self.sp.ker @ x[:k] + self.sp.coimg @ x[k:]

    def coords(self, p) -> np.ndarray:
        d = np.asarray(p, dtype=float) - self.fmap.base_point
        return np.concatenate([self.sp.ker.T @ d, self.sp.coimg.T @ d])

    def _second(self, x) -> np.ndarray:
        fm = self.fmap(self.fmap.base_point)
        return np.linalg.solve(self.sp.T_hat, self.sp.img.T @ (self.fmap(self.point(x)) - fm)) \
            if self.sp.T_hat.size else np.zeros(0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([x[:self.n_ker], self._second(x)])

    def inverse(self, y, raise_on_fail: bool = True):
        y = np.asarray(y, dtype=float)
        k = self.n_ker
        a, b = y[:k], y[k:]
        sp = self.sp

        def g(x2):
            return self._second(np.concatenate([a, x2])) - b

        def jac(x2):
            D = self.fmap.jac(self.point(np.concatenate([a, x2])))
            return np.linalg.solve(sp.T_hat, sp.img.T @ D @ sp.coimg)

        x2, ok = damped_newton(g, jac, b.copy())
        if not ok and raise_on_fail:
            raise NoLocalInversion(f"Newton failed at |y|={np.linalg.norm(y):.3g}")
        out = np.concatenate([a, x2])
        return out if raise_on_fail else (out, ok)


def _search_radius(chart: DomainChart, rng: np.random.Generator) -> float:
    n = chart.fmap.domain_dim
    dirs = rng.normal(size=(N_SPHERE, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for r in RADII:
        ok = True
        for d in dirs:
            y = r * d
            x, conv = chart.inverse(y, raise_on_fail=False)
            if not conv or np.linalg.norm(chart(x) - y) > 1e-9 * (1 + r):
                ok = False
                break
        if ok:
            return r
    raise NoLocalInversion("Newton inversion failed at every radius")


def deform_domain(fmap: SmoothMap, splitting: LinearSplitting, seed: int = 0) -> DomainChart:
    chart = DomainChart(fmap, splitting)
    r = _search_radius(chart, np.random.default_rng(seed))
    return replace(chart, validity_radius=r)


@dataclass(frozen=True, eq=False)
class TargetChart:
    """phi(y1, y2) = (y1 + c(0, T_hat^{-1} y2), y2) with c = pr_coker f o psi^{-1}."""

    psi: DomainChart

    def coords(self, v) -> np.ndarray:
        sp = self.psi.sp
        d = np.asarray(v, dtype=float) - self.psi.fmap(self.psi.fmap.base_point)
        return np.concatenate([sp.coker.T @ d, sp.img.T @ d])

    def shift(self, y2) -> np.ndarray:
        sp = self.psi.sp
        k = self.psi.n_ker
        x2 = np.linalg.solve(sp.T_hat, y2) if sp.T_hat.size else np.zeros(0)
        p = self.psi.point(self.psi.inverse(np.concatenate([np.zeros(k), x2])))
        return sp.coker.T @ (self.psi.fmap(p) - self.psi.fmap(self.psi.fmap.base_point))

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        c = self.psi.sp.coker.shape[1]
        return np.concatenate([y[:c] + self.shift(y[c:]), y[c:]])

    def inverse(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        c = self.psi.sp.coker.shape[1]
        return np.concatenate([z[:c] - self.shift(z[c:]), z[c:]])


def deform_target(fmap: SmoothMap, splitting: LinearSplitting, psi: DomainChart) -> TargetChart:
    phi = TargetChart(psi)
    c = splitting.coker.shape[1]
    if c:
        # derivative of phi along coker is the identity
        y0 = np.zeros(c + splitting.img.shape[1])
        D = fd_jacobian(phi, y0)[:, :c]
        E = np.zeros_like(D)
        E[:c, :c] = np.eye(c)
        if np.abs(D - E).max() > 1e-8:
            raise AssertionError("target chart derivative along coker is not the identity")
    return phi


def _report(residuals: list, samples: list) -> dict:
    if not residuals:
        return {"max_residual": 0.0, "worst_sample": None, "n_samples": 0}
    i = int(np.argmax(residuals))
    return {"max_residual": float(residuals[i]), "worst_sample": np.asarray(samples[i]).tolist(),
            "n_samples": len(residuals)}


@dataclass(frozen=True, eq=False)
class NormalFormData:
    fmap: SmoothMap
    splitting: LinearSplitting
    psi: DomainChart
    phi: TargetChart

    @property
    def validity_radius(self) -> float:
        return self.psi.validity_radius

    def f_sing(self, x) -> np.ndarray:
        """pr_coker o phi^{-1} o f o psi^{-1} at chart point x = (x1, x2)."""
        x = np.asarray(x, dtype=float)
        p = self.psi.point(self.psi.inverse(x))
        z = self.phi.inverse(self.phi.coords(self.fmap(p)))
        return z[:self.splitting.coker.shape[1]]

    def normal_form(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.psi.n_ker
        return np.concatenate([self.f_sing(x), self.splitting.T_hat @ x[k:]])

    def sample_patch(self, rng: np.random.Generator, n: int, frac: float = 0.5) -> np.ndarray:
        d = self.fmap.domain_dim
        v = rng.normal(size=(n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * (frac * self.validity_radius * rng.random((n, 1)) ** (1.0 / max(d, 1)))

    def verify(self, n_samples: int = 64, seed: int = 0) -> dict:
        rng = np.random.default_rng(seed)
        k = self.psi.n_ker
        X = self.sample_patch(rng, n_samples)
        zero_res, chart_res, zs_res = [], [], []
        for x in X:
            x0 = x.copy()
            x0[:k] = 0.0
            zero_res.append(float(np.linalg.norm(self.f_sing(x0))))
            # end to end: phi^{-1} f(p) against (f_sing(psi(p)), T_hat x2) with p sampled in the domain
            p = self.psi.point(x)
            y = self.psi(x)
            lhs = self.phi.inverse(self.phi.coords(self.fmap(p)))
            chart_res.append(float(np.linalg.norm(lhs - self.normal_form(y))))
            # zero set: |f(psi^{-1}(x1, 0)) - f(m)| = |f_sing(x1, 0)|
            x10 = x.copy()
            x10[k:] = 0.0
            q = self.psi.point(self.psi.inverse(x10))
            lhs = np.linalg.norm(self.fmap(q) - self.fmap(self.fmap.base_point))
            zs_res.append(float(abs(lhs - np.linalg.norm(self.f_sing(x10)))))
        D = fd_jacobian(self.f_sing, np.zeros(self.fmap.domain_dim))
        return {
            "f_sing_vanishes_on_coimg": _report(zero_res, list(X)),
            "f_sing_derivative_at_origin": {"max_residual": float(np.linalg.norm(D)),
                                            "worst_sample": None, "n_samples": 1},
            "chart_identity": _report(chart_res, list(X)),
            "zero_set": _report(zs_res, list(X)),
        }


def compute_normal_form(fmap: SmoothMap, tol: float | None = None, average_domain=None,
                        average_target=None, seed: int = 0) -> NormalFormData:
    sp = split_jacobian(fmap.jac(fmap.base_point), tol, average_domain, average_target)
    psi = deform_domain(fmap, sp, seed)
    phi = deform_target(fmap, sp, psi)
    return NormalFormData(fmap, sp, psi, phi)


def demo_model(name: str) -> SmoothMap:
    """Small maps used by the CLI demo and the tests."""
    models = {
        "graph": (lambda x: np.array([x[1] + x[0] ** 2]), 2, 1),
        "fold": (lambda x: np.array([x[1], x[0] ** 2]), 2, 2),
        "mixed": (lambda x: np.array([x[1], x[0] ** 2 - x[1] * x[0]]), 2, 2),
        "cubic": (lambda x: np.array([x[0], x[0] ** 3]), 1, 2),
        "identity": (lambda x: np.array(x, dtype=float), 2, 2),
        "submersion": (lambda x: np.array([x[0] + np.sin(x[1]) + x[2] ** 2]), 3, 1),
    }
    if name not in models:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(models)}")
    f, n, p = models[name]
    return SmoothMap(f, n, p, np.zeros(n))


DEMO_MODELS = ("graph", "fold", "mixed", "cubic", "identity", "submersion")


# --------------------------------------------------------------------------
# momentum-map normal forms


@dataclass(frozen=True, eq=False)
class MGSData:
    """Local model (ker, omega_bar, J_sing) with the stabilizer acting linearly on ker.

    ``J_sing(x)[i]`` is the pairing of the singular part with the i-th basis
    vector of the stabilizer algebra, and ``h_generators[i]`` is its action on ker.
    """

    dim_ker: int
    omega_bar: Callable
    J_sing: Callable
    h_generators: np.ndarray
    h_elements: tuple = ()
    strong: bool = False
    radius: float = 1.0
    base: NormalFormData | None = None
    embedding: Callable | None = None
    info: dict = field(default_factory=dict)

    @property
    def omega0(self) -> np.ndarray:
        return np.asarray(self.omega_bar(np.zeros(self.dim_ker)))

    def sample(self, rng, n, frac: float = 0.5) -> np.ndarray:
        d = self.dim_ker
        v = rng.normal(size=(n, d))
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        return v * (frac * self.radius * rng.random((n, 1)) ** (1.0 / max(d, 1)))

    def momentum_identity(self, n_samples: int = 128, seed: int = 0) -> dict:
        """omega_bar_x(xi.x, w) + kappa(DJ_sing(x) w, xi) on sampled (x, w, xi)."""
        rng = np.random.default_rng(seed)
        res, samples = [], []
        nh = self.h_generators.shape[0]
        if nh == 0 or self.dim_ker == 0:
            return _report([], [])
        for x in self.sample(rng, n_samples):
            w = rng.normal(size=self.dim_ker)
            i = int(rng.integers(nh))
            xi_x = self.h_generators[i] @ x
            lhs = xi_x @ self.omega_bar(x) @ w
            h = np.cbrt(np.finfo(float).eps) * (1 + np.linalg.norm(x))
            dj = (self.J_sing(x + h * w)[i] - self.J_sing(x - h * w)[i]) / (2 * h)
            res.append(abs(lhs + dj))
            samples.append(x)
        return _report(res, samples)

    def quadratic_identity(self, n_samples: int = 128, seed: int = 1) -> dict:
        """kappa(J_sing(x), xi) = 1/2 omega_bar_0(x, xi.x)."""
        rng = np.random.default_rng(seed)
        W0 = self.omega0
        res, samples = [], []
        for x in self.sample(rng, n_samples):
            js = np.atleast_1d(self.J_sing(x))
            quad = np.array([0.5 * x @ W0 @ (A @ x) for A in self.h_generators])
            res.append(float(np.linalg.norm(js - quad)) if quad.size else 0.0)
            samples.append(x)
        return _report(res, samples)

    def nondegeneracy(self) -> float:
        """Smallest singular value of omega_bar_0 (0 if degenerate)."""
        if self.dim_ker == 0:
            return np.inf
        return float(np.linalg.svd(self.omega0, compute_uv=False).min())


def _stabilizer_average(rep: CompactGroupRep, m, transform: Callable) -> Callable | None:
    if rep.variant == "matrix":
        return None
    elems = rep.stabilizer(m).quadrature()

    def average(P):
        return np.mean([transform(g) @ P @ np.linalg.inv(transform(g)) for g in elems], axis=0)

    return average


def assemble_mgs(action: LieAlgebraAction, rep: CompactGroupRep, m, J_map: SmoothMap | None = None,
                 seed: int = 0) -> MGSData:
    """MGS local model of the quadratic momentum map at m."""
    m = np.asarray(m, dtype=float)
    n, k = action.dim, action.k
    W = action.space.omega
    if J_map is None:
        J_map = SmoothMap(lambda x: _momentum_components(action, x), n, k, m,
                          jacobian=lambda x: momentum_jacobian(action, x))
    mu = J_map(m)
    # g_mu from the coadjoint action; abelian => everything
    if action.structure_constants is None or action.abelian:
        gmu = np.eye(k)
    else:
        ad = np.stack([-action.structure_constants[i] @ mu for i in range(k)], axis=1)
        gmu = null_space(ad, eps=1e-10)
    orbit_mu = np.column_stack([action.matrix(b) @ m for b in gmu.T]) if gmu.shape[1] else np.zeros((n, 0))
    G = rep.invariant_metric()
    # slice directions: G-orthogonal complement of g_mu . m, G-orthonormal basis
    Bo = null_space(orbit_mu.T @ G, eps=1e-10) if numerical_rank(orbit_mu, 1e-10) else np.eye(n)
    L = np.linalg.cholesky(Bo.T @ G @ Bo)
    B = Bo @ np.linalg.inv(L).T
    s = B.shape[1]

    fmap = SmoothMap(lambda y: J_map(m + B @ y) - mu, s, k, np.zeros(s),
                     jacobian=lambda y: J_map.jac(m + B @ y) @ B)

    def to_slice(g):
        return B.T @ G @ g @ B

    avg = _stabilizer_average(rep, m, to_slice)
    nf = compute_normal_form(fmap, average_domain=avg, seed=seed)
    sp = nf.splitting
    K, C, I, Ck = sp.ker, sp.coimg, sp.img, sp.coker
    dk = K.shape[1]

    hb = null_space(action.orbit_tangent(m), eps=1e-10) if k else np.zeros((0, 0))
    nh = hb.shape[1] if k else 0
    h_gens = np.stack([K.T @ to_slice(action.matrix(b)) @ K for b in hb.T]) if nh else np.zeros((0, dk, dk))

    def iota_coords(x1):
        return nf.psi.inverse(np.concatenate([x1, np.zeros(C.shape[1])]))

    def iota(x1):
        return m + B @ nf.psi.point(iota_coords(x1))

    def d_iota(x1):
        y = nf.psi.point(iota_coords(x1))
        Df = fmap.jac(y)
        if C.shape[1]:
            dx2 = -np.linalg.solve(I.T @ Df @ C, I.T @ Df @ K)
            return B @ (K + C @ dx2)
        return B @ K

    def omega_bar(x1):
        D = d_iota(np.asarray(x1, dtype=float))
        return D.T @ W @ D

    def J_sing(x1):
        c = Ck @ nf.f_sing(np.concatenate([np.asarray(x1, dtype=float), np.zeros(C.shape[1])]))
        return hb.T @ c if nh else np.zeros(0)

    # discrete part of the stabilizer acting on ker
    elems = ()
    if rep.variant == "finite":
        elems = tuple(K.T @ to_slice(g) @ K for g in rep.stabilizer(m).elements)

    mgs = MGSData(dk, omega_bar, J_sing, h_gens, elems, strong=False,
                  radius=nf.validity_radius, base=nf, embedding=iota,
                  info={"mu": mu.tolist(), "slice_dim": s, "stabilizer_algebra_dim": nh,
                        "splitting": sp.dims})
    if dk and mgs.nondegeneracy() < 1e-8:
        raise AssertionError("omega_bar_0 is degenerate on ker")
    if _is_constant(mgs) and mgs.quadratic_identity(32)["max_residual"] <= 1e-8:
        mgs = replace(mgs, strong=True)
    return mgs


def _is_constant(mgs: MGSData, n: int = 16, tol: float = 1e-10) -> bool:
    rng = np.random.default_rng(7)
    W0 = mgs.omega0
    return all(np.abs(mgs.omega_bar(x) - W0).max() <= tol * max(1.0, np.abs(W0).max())
               for x in mgs.sample(rng, n))


def moser_map(omega_bar: Callable, dim: int, dt: float = 1e-3) -> Callable:
    """F with F^* omega_bar = omega_bar(0), from the flow of X_t = omega_t^{-1} sigma."""
    W0 = np.asarray(omega_bar(np.zeros(dim)))
    nodes, weights = np.polynomial.legendre.leggauss(8)
    s_nodes = 0.5 * (nodes + 1)
    s_w = 0.5 * weights

    def sigma(x):
        # radial primitive of beta = omega_bar - W0: sigma_x(v) = int_0^1 s beta_{sx}(x, v) ds
        out = np.zeros(dim)
        for s, w in zip(s_nodes, s_w):
            beta = np.asarray(omega_bar(s * x)) - W0
            out += w * s * (x @ beta)
        return out

    def field(t, x):
        Wt = W0 + t * (np.asarray(omega_bar(x)) - W0)
        # omega_t(X, .) = -sigma  <=>  -W_t X = -sigma
        return np.linalg.solve(Wt, sigma(x))

    n_steps = int(round(1.0 / dt))

    def F(x):
        x = np.asarray(x, dtype=float).copy()
        t = 0.0
        for _ in range(n_steps):
            k1 = field(t, x)
            k2 = field(t + dt / 2, x + dt / 2 * k1)
            k3 = field(t + dt / 2, x + dt / 2 * k2)
            k4 = field(t + dt, x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        return x

    return F


def strong_upgrade(mgs: MGSData, dt: float = 1e-3, check_samples: int = 16) -> MGSData:
    if mgs.strong:
        return mgs
    if mgs.dim_ker and mgs.nondegeneracy() < 1e-10:
        raise UpgradeRefused("omega_bar_0 is degenerate")
    if _is_constant(mgs):
        out = replace(mgs, strong=True)
        r = out.quadratic_identity(check_samples)["max_residual"]
        if r > 1e-8:
            raise AssertionError(f"quadratic identity fails for a constant form ({r:.2e})")
        return out
    if mgs.dim_ker > 8:
        raise UpgradeRefused("Moser upgrade limited to dim ker <= 8")
    rng = np.random.default_rng(3)
    for x in [np.zeros(mgs.dim_ker), *mgs.sample(rng, 16, frac=1.0)]:
        if np.linalg.svd(mgs.omega_bar(x), compute_uv=False).min() < 1e-10:
            raise UpgradeRefused("omega_bar degenerates on the patch")
    F = moser_map(mgs.omega_bar, mgs.dim_ker, dt)
    W0 = mgs.omega0
    J_old = mgs.J_sing
    out = replace(mgs, omega_bar=lambda x: W0, J_sing=lambda x: J_old(F(x)), strong=True,
                  info={**mgs.info, "moser": {"dt": dt}, "moser_map": F}, radius=0.5 * mgs.radius)
    r = out.quadratic_identity(check_samples)["max_residual"]
    out.info["quadratic_identity_after_upgrade"] = r
    if r > 1e-6:
        raise AssertionError(f"quadratic identity after Moser upgrade fails ({r:.2e})")
    return out


def _local_type(mgs: MGSData, x, tol: float = 1e-9) -> tuple:
    nh = mgs.h_generators.shape[0]
    if nh:
        T = np.column_stack([A @ x for A in mgs.h_generators])
        cont = nh - numerical_rank(T, 1e-8) if np.linalg.norm(T) > tol else nh
    else:
        cont = 0
    disc = sum(1 for g in mgs.h_elements if np.linalg.norm(g @ x - x) <= tol * (1 + np.linalg.norm(x)))
    return (cont, disc)


def approximation_property_check(mgs: MGSData, orbit_types=None, budget: int = 200,
                                 seed: int = 0) -> dict:
    """Witnesses of each orbit type in ker near 0 lying on J_sing^{-1}(0), tested along rays."""
    rng = np.random.default_rng(seed)
    d = mgs.dim_ker
    found: dict = {}
    nh = mgs.h_generators.shape[0]

    def project(x):
        if nh == 0:
            return x, True

        def jac(y):
            return fd_jacobian(lambda z: np.atleast_1d(mgs.J_sing(z)), y)

        y, ok = damped_newton(lambda z: np.atleast_1d(mgs.J_sing(z)), jac, x)
        return y, ok and np.linalg.norm(mgs.J_sing(y)) <= 1e-10

    subspaces = [np.eye(d)]
    # fixed subspaces of single generators and of discrete elements reach smaller strata
    for A in mgs.h_generators:
        N = null_space(A, eps=1e-10)
        if N.shape[1]:
            subspaces.append(N)
    for g in mgs.h_elements:
        N = null_space(g - np.eye(d), eps=1e-10)
        if N.shape[1]:
            subspaces.append(N)
    origin_type = _local_type(mgs, np.zeros(d))
    found[origin_type] = {"witness": [0.0] * d, "ray_ok": True}
    for it in range(budget):
        S = subspaces[it % len(subspaces)]
        x = S @ rng.normal(size=S.shape[1])
        x *= 0.3 * mgs.radius / max(np.linalg.norm(x), 1e-300)
        x, ok = project(x)
        if not ok or np.linalg.norm(x) < 1e-6 or np.linalg.norm(x) > mgs.radius:
            continue
        t = _local_type(mgs, x)
        if t in found:
            continue
        ray_ok = True
        for a in [0.5 ** j for j in range(1, 11)]:
            y = a * x
            if np.linalg.norm(mgs.J_sing(y)) > 1e-8 or _local_type(mgs, y) != t:
                ray_ok = False
                break
        found[t] = {"witness": x.tolist(), "ray_ok": ray_ok,
                    "limit_norm": float(np.linalg.norm(x) * 0.5 ** 10)}
    targets = orbit_types if orbit_types is not None else list(found)
    result = {}
    for t in targets:
        key = f"cont={t[0]};disc={t[1]}"
        if t in found:
            result[key] = {"status": "found" if found[t]["ray_ok"] else "ray_failed", **found[t]}
        else:
            result[key] = {"status": "inconclusive"}
    return result
