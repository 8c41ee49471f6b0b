"""SU(2) representation variety of a closed surface group.

Points are 2g unit quaternions (a_1, b_1, ..., a_g, b_g) with
prod_i [a_i, b_i] = 1.  Quaternions are arrays (w, x, y, z).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


SOLVE_TOL = 1e-10
SOLVE_MAXIT = 200
COMMUTANT_TOL = 1e-6
RANK_REL_TOL = 1e-6
IMAG_BASIS = np.eye(4)[1:]


def qmul(p, q) -> np.ndarray:
    w1, x1, y1, z1 = p
    w2, x2, y2, z2 = q
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def qconj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def qexp(v) -> np.ndarray:
    """exp of a purely imaginary quaternion given by its 3-vector."""
    v = np.asarray(v, dtype=float)
    t = np.linalg.norm(v)
    if t < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.concatenate([[np.cos(t)], np.sin(t) * v / t])


ONE = np.array([1.0, 0.0, 0.0, 0.0])


def _word(g: int) -> list:
    """Letters (generator index, +1 / -1) of prod_i a_i b_i a_i^-1 b_i^-1."""
    out = []
    for i in range(g):
        a, b = 2 * i, 2 * i + 1
        out += [(a, 1), (b, 1), (a, -1), (b, -1)]
    return out


def relator(elements) -> np.ndarray:
    g = len(elements) // 2
    r = ONE.copy()
    for j, s in _word(g):
        q = elements[j] if s > 0 else qconj(elements[j])
        r = qmul(r, q)
    return r


def relator_jacobian(elements) -> np.ndarray:
    """4 x 6g derivative of the relator under right perturbations q -> q (1 + v)."""
    g = len(elements) // 2
    word = _word(g)
    factors = [elements[j] if s > 0 else qconj(elements[j]) for j, s in word]
    L = len(factors)
    prefix = [ONE]
    for f in factors:
        prefix.append(qmul(prefix[-1], f))
    suffix = [ONE] * (L + 1)
    for p in range(L - 1, -1, -1):
        suffix[p] = qmul(factors[p], suffix[p + 1])
    J = np.zeros((4, 6 * g))
    for p, (j, s) in enumerate(word):
        for c in range(3):
            v = IMAG_BASIS[c]
            # a -> a (1 + e v), a^{-1} -> (1 - e v) a^{-1}
            mid = qmul(factors[p], v) if s > 0 else -qmul(v, factors[p])
            J[:, 3 * j + c] += qmul(qmul(prefix[p], mid), suffix[p + 1])
    return J


@dataclass
class RepPoint:
    g: int
    elements: np.ndarray  # 2g x 4
    solved: bool = False
    residual: float = np.inf
    iterations: int = 0

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=float).reshape(2 * self.g, 4)
        norms = np.linalg.norm(self.elements, axis=1)
        if np.abs(norms - 1).max() > 1e-12:
            raise ValueError("elements must be unit quaternions")
        if self.solved and relator_residual(self.elements) > 1e-8:
            raise ValueError("point marked solved violates the relator")

    def conjugate(self, q) -> "RepPoint":
        q = np.asarray(q, dtype=float) / np.linalg.norm(q)
        el = np.array([qmul(qmul(q, a), qconj(q)) for a in self.elements])
        el /= np.linalg.norm(el, axis=1, keepdims=True)
        return RepPoint(self.g, el, self.solved, relator_residual(el), self.iterations)


def relator_residual(elements) -> float:
    return float(np.linalg.norm(relator(elements) - ONE))


class ConvergenceFailure(RuntimeError):
    def __init__(self, msg, point: RepPoint):
        super().__init__(msg)
        self.point = point


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def circle_start(g: int, rng: np.random.Generator) -> np.ndarray:
    """All elements in one one-parameter subgroup exp(t u)."""
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    return np.array([qexp(t * u) for t in rng.uniform(-np.pi, np.pi, 2 * g)])


def solve_rep(g: int, seed: int, start=None, maxit: int = SOLVE_MAXIT, raise_on_fail: bool = False) -> RepPoint:
    """Gauss-Newton on |prod [a_i, b_i] - 1|^2 with retraction by normalization."""
    if g < 1:
        raise ValueError("genus must be at least 1")
    rng = np.random.default_rng(seed)
    if start is None:
        el = random_unit_quaternions(rng, 2 * g)
    elif isinstance(start, str) and start == "circle":
        el = circle_start(g, rng)
    else:
        el = np.asarray(start, dtype=float).reshape(2 * g, 4)
        el = el / np.linalg.norm(el, axis=1, keepdims=True)
    res = relator_residual(el)
    it = 0
    while res > SOLVE_TOL and it < maxit:
        r = relator(el) - ONE
        J = relator_jacobian(el)
        step = -np.linalg.lstsq(J, r, rcond=None)[0]
        t = 1.0
        for _ in range(20):
            trial = np.array([qmul(el[j], qexp(t * step[3 * j:3 * j + 3])) for j in range(2 * g)])
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            tres = relator_residual(trial)
            if tres < res:
                break
            t *= 0.5
        el, res = trial, tres
        it += 1
    ok = res <= SOLVE_TOL
    pt = RepPoint(g, el, ok, res, it)
    if not ok and raise_on_fail:
        raise ConvergenceFailure(f"no convergence after {it} iterations (residual {res:.2e})", pt)
    return pt


def commutant_singular_values(rep: RepPoint) -> np.ndarray:
    """Singular values of v -> (Im q x v)_q over all elements; the null space is the commutant in Im H."""
    rows = []
    for q in rep.elements:
        u = q[1:]
        rows.append(np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]]))
    return np.linalg.svd(np.vstack(rows), compute_uv=False)


def stabilizer_type(rep: RepPoint, tol: float = COMMUTANT_TOL) -> str:
    s = commutant_singular_values(rep)
    if np.any((s > tol / 10) & (s < tol * 10)):
        return "indeterminate"
    dim = int(np.sum(s <= tol))
    return {3: "full_group", 1: "circle", 0: "center"}.get(dim, "indeterminate")


STABILIZER_DIM = {"full_group": 3, "circle": 1, "center": 0}


@dataclass
class RepStratumReport:
    stabilizer_class: str
    count: int
    hom_dimension: int
    reduced_dimension: int
    rank_ambiguous: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


def stratum_dimension(rep: RepPoint) -> RepStratumReport:
    cls = stabilizer_type(rep)
    J = relator_jacobian(rep.elements)
    s = np.linalg.svd(J, compute_uv=False)
    smax = s.max() if s.size else 0.0
    tol = RANK_REL_TOL * smax if smax > 0 else RANK_REL_TOL
    rank = int(np.sum(s > tol))
    ambiguous = bool(np.any((s > tol / 10) & (s < tol * 10)))
    hom = 6 * rep.g - rank
    if cls not in STABILIZER_DIM:
        return RepStratumReport(cls, 1, hom, -1, True)
    red = hom - (3 - STABILIZER_DIM[cls])
    if red < 0:
        raise AssertionError("negative reduced dimension")
    if cls == "center" and rep.g >= 2 and red != 6 * rep.g - 6:
        raise AssertionError(f"irreducible stratum has dimension {red}, expected {6 * rep.g - 6}")
    return RepStratumReport(cls, 1, hom, red, ambiguous)


def survey(g: int, seeds, start=None) -> dict:
    """Solve from many seeds and aggregate stratum statistics by class."""
    seeds = [int(s) for s in seeds]
    classes: dict = {}
    converged = 0
    failures = []
    for s in seeds:
        pt = solve_rep(g, int(s), start)
        if not pt.solved:
            failures.append({"seed": int(s), "residual": pt.residual})
            continue
        converged += 1
        rep = stratum_dimension(pt)
        c = classes.setdefault(rep.stabilizer_class, {"count": 0, "hom_dimensions": [], "reduced_dimensions": []})
        c["count"] += 1
        c["hom_dimensions"].append(rep.hom_dimension)
        c["reduced_dimensions"].append(rep.reduced_dimension)
    summary = {}
    for k, c in sorted(classes.items()):
        summary[k] = {
            "count": c["count"],
            "hom_dimension": sorted(set(c["hom_dimensions"])),
            "reduced_dimension": sorted(set(c["reduced_dimensions"])),
            "all_even": all(d % 2 == 0 for d in c["reduced_dimensions"]),
        }
    return {"genus": g, "samples": len(seeds), "converged": converged, "classes": summary,
            "failures": failures}
