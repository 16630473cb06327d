"""Finite-dimensional checks behind the rigidity arguments.

Complex structures are realised on R^{2m} with coordinates (Re z_1, Im z_1, ...),
so a complex entry a + ib becomes the block [[a, -b], [b, a]] and the complex
structure J is the block-diagonal rotation by a quarter turn. The symplectic form
is sum_i e_{2i-1} ^ e_{2i}, whose matrix is J as well; this makes
su(3) subset u(3) subset sp(6, R) hold literally.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import ContractViolation
from .liealg import (
    AlgElement,
    commutant,
    lie_closure,
    orthonormal_span,
    so_basis,
    span_contains,
)

SPAN_TOL = 1e-9
CLOSURE_TOL = 1e-10


# ---------------------------------------------------------------------------
# subalgebra specifications
# ---------------------------------------------------------------------------


@dataclass
class SubalgebraSpec:
    name: str
    basis: list  # AlgElement in gl(m)
    claimed_dim: int

    @property
    def mats(self) -> list[np.ndarray]:
        return [np.asarray(b.mat, dtype=float) for b in self.basis]

    @property
    def dim(self) -> int:
        return orthonormal_span(np.array([M.ravel() for M in self.mats])).shape[0]

    def closure_residual(self) -> float:
        """Largest distance of a pairwise bracket from the span of the basis."""
        mats = self.mats
        brackets = [A @ B - B @ A for A, B in combinations(mats, 2)]
        if not brackets:
            return 0.0
        return span_contains(mats, brackets)

    def is_closed(self, tol: float = CLOSURE_TOL) -> bool:
        return self.closure_residual() < tol

    def contains(self, other: "SubalgebraSpec", tol: float = SPAN_TOL) -> bool:
        return span_contains(self.mats, other.mats) < tol


def realify(Z: np.ndarray) -> np.ndarray:
    """Real 2m x 2m matrix of a complex m x m matrix acting on C^m = R^{2m}."""
    Z = np.asarray(Z, dtype=complex)
    m = Z.shape[0]
    out = np.zeros((2 * m, 2 * m))
    out[0::2, 0::2] = Z.real
    out[0::2, 1::2] = -Z.imag
    out[1::2, 0::2] = Z.imag
    out[1::2, 1::2] = Z.real
    return out


def complex_structure(m: int = 3) -> np.ndarray:
    return realify(1j * np.eye(m))


def symplectic_form(m: int = 3) -> np.ndarray:
    """Matrix of sum_i e_{2i-1} ^ e_{2i} on R^{2m}."""
    return complex_structure(m)


def _unit(m: int, i: int, j: int, dtype=complex) -> np.ndarray:
    E = np.zeros((m, m), dtype=dtype)
    E[i, j] = 1
    return E


def _su_complex(m: int) -> list[np.ndarray]:
    out = []
    for i, j in combinations(range(m), 2):
        out.append(_unit(m, i, j) - _unit(m, j, i))
        out.append(1j * (_unit(m, i, j) + _unit(m, j, i)))
    for i in range(m - 1):
        out.append(1j * (_unit(m, i, i) - _unit(m, i + 1, i + 1)))
    return out


def _spec(name: str, mats: Sequence[np.ndarray], claimed: int) -> SubalgebraSpec:
    size = mats[0].shape[0]
    return SubalgebraSpec(name, [AlgElement(np.asarray(M, dtype=float), f"gl({size})") for M in mats], claimed)


def su3() -> SubalgebraSpec:
    return _spec("su(3)", [realify(Z) for Z in _su_complex(3)], 8)


def u3() -> SubalgebraSpec:
    return _spec("u(3)", [realify(Z) for Z in _su_complex(3)] + [complex_structure(3)], 9)


def so6() -> SubalgebraSpec:
    return _spec("so(6)", so_basis(6), 15)


def sp6() -> SubalgebraSpec:
    """Stabiliser of the form Omega: A^T Omega + Omega A = 0, i.e. A = Omega^{-1} S with S symmetric."""
    Om = symplectic_form(3)
    mats = []
    for i in range(6):
        for j in range(i, 6):
            S = np.zeros((6, 6))
            S[i, j] = S[j, i] = 1.0
            mats.append(np.linalg.solve(Om, S))
    return _spec("sp(6,R)", mats, 21)


def sl3c() -> SubalgebraSpec:
    mats = []
    for i in range(3):
        for j in range(3):
            if i != j:
                mats += [realify(_unit(3, i, j)), realify(1j * _unit(3, i, j))]
    for i in range(2):
        D = _unit(3, i, i) - _unit(3, i + 1, i + 1)
        mats += [realify(D), realify(1j * D)]
    return _spec("sl(3,C)", mats, 16)


def sl6() -> SubalgebraSpec:
    mats = []
    for i in range(6):
        for j in range(6):
            if i != j:
                mats.append(_unit(6, i, j, float))
    for i in range(5):
        mats.append(_unit(6, i, i, float) - _unit(6, i + 1, i + 1, float))
    return _spec("sl(6,R)", mats, 35)


def standard_specs() -> list[SubalgebraSpec]:
    return [su3(), u3(), so6(), sp6(), sl3c(), sl6()]


# ---------------------------------------------------------------------------
# normalizer / conformal lemma
# ---------------------------------------------------------------------------


def is_conformal(A: np.ndarray, tol: float = 1e-9) -> tuple[bool, float]:
    """A^T A proportional to the identity?"""
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    P = A.T @ A
    c = np.trace(P) / k
    res = float(np.linalg.norm(P - c * np.eye(k)) / max(abs(c), 1e-300))
    return res < tol and c > 0, res


def _orbit_points(gens: Sequence[np.ndarray], x0: np.ndarray, count: int, rng) -> np.ndarray:
    pts = []
    for _ in range(count):
        g = np.eye(len(x0))
        for _ in range(3):
            coef = rng.normal(size=len(gens)) * 2.0
            g = sla.expm(sum(c * A for c, A in zip(coef, gens))) @ g
        pts.append(g @ x0)
    return np.array(pts)


def sphere_transitivity(gens: Sequence, eps: float = 0.1, tests: int = 40, samples: int = 200,
                        seed: int = 0) -> dict:
    """Certify that exp(span gens) acts transitively on the unit sphere.

    Two pieces of evidence: the infinitesimal orbit {A e_1} has rank k-1 (the orbit
    is open, hence everything for a compact connected group), and sampled orbit
    points, refined by a few ascent steps, come within ``eps`` of random test points.
    """
    mats = [np.asarray(getattr(g, "mat", g), dtype=float) for g in gens]
    k = mats[0].shape[0]
    rng = np.random.default_rng(seed)
    x0 = np.zeros(k)
    x0[0] = 1.0
    tangent_rank = int(np.linalg.matrix_rank(np.array([A @ x0 for A in mats]), tol=1e-9))
    pts = _orbit_points(mats, x0, samples, rng)
    worst = 0.0
    for _ in range(tests):
        y = rng.normal(size=k)
        y /= np.linalg.norm(y)
        x = pts[np.argmax(pts @ y)]
        for _ in range(60):
            if np.linalg.norm(x - y) < eps / 4:
                break
            coef = np.array([y @ (A @ x) for A in mats])
            step = sum(c * A for c, A in zip(coef, mats))
            x = sla.expm(0.5 * step) @ x
        worst = max(worst, float(np.linalg.norm(x - y)))
    return {"tangent_rank": tangent_rank, "max_distance": worst,
            "transitive": tangent_rank == k - 1 and worst <= eps}


def normalizer_conformal_check(gens: Sequence, candidates: Sequence[np.ndarray], group_tag: str | None = None,
                               tol: float = SPAN_TOL) -> list[dict]:
    """For each candidate A: does A g A^{-1} lie in g, and is A conformal?

    ``implication_ok`` is False only when A normalizes g but is not conformal while
    the group acts transitively on the sphere, i.e. when the lemma would be contradicted.
    """
    mats = [np.asarray(getattr(g, "mat", g), dtype=float) for g in gens]
    trans = sphere_transitivity(mats)["transitive"]
    out = []
    for A in candidates:
        A = np.asarray(A, dtype=float)
        Ainv = np.linalg.inv(A)
        res = span_contains(mats, [A @ X @ Ainv for X in mats])
        norm = res < tol
        conf, cres = is_conformal(A)
        out.append({
            "group": group_tag,
            "normalizes": bool(norm),
            "span_residual": float(res),
            "conformal": bool(conf),
            "conformal_residual": cres,
            "transitive": bool(trans),
            "implication_ok": bool((not norm) or conf or not trans),
        })
    return out


# ---------------------------------------------------------------------------
# isotypic decomposition of End(R^k)
# ---------------------------------------------------------------------------


def conjugation_action(gens: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Matrices of X -> [A, X] on End(R^k) in the row-major basis of matrix units."""
    out = []
    for A in gens:
        k = A.shape[0]
        I = np.eye(k)
        out.append(np.kron(A, I) - np.kron(I, A.T))
    return out


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(values)
    groups, cur = [], [order[0]]
    for i in order[1:]:
        if abs(values[i] - values[cur[-1]]) < tol:
            cur.append(i)
        else:
            groups.append(np.array(cur))
            cur = [i]
    groups.append(np.array(cur))
    return groups


def isotypic_decomposition(gens: Sequence, seed: int = 0, tol: float = 1e-7) -> list[np.ndarray]:
    """Isotypic components of End(R^k) under conjugation by exp(span gens).

    The components are the joint eigenspaces of the centre of the commutant of the
    action; the centre is obtained with ``liealg.commutant`` and a random symmetric
    element of it separates the components (generic eigenvalues).
    """
    mats = [np.asarray(getattr(g, "mat", g), dtype=float) for g in gens]
    comm = _fast_commutant(conjugation_action(mats), seed)
    centre = _centre(comm)
    rng = np.random.default_rng(seed)
    Z = sum(rng.normal() * (C + C.T) for C in centre)
    w, V = np.linalg.eigh(Z)
    return [V[:, g] for g in _cluster(w, tol * max(1.0, np.abs(w).max()))]


def _fast_commutant(action: list[np.ndarray], seed: int) -> list[np.ndarray]:
    """Commutant computed from two random combinations of the action, then verified.

    Two generic elements generate the Lie algebra, so their commutant is the full
    one; a residual check against every generator guards the shortcut.
    """
    if len(action) > 2:
        rng = np.random.default_rng(seed + 1)
        pair = [sum(rng.normal() * A for A in action) for _ in range(2)]
        comm = commutant(pair)
        if all(np.abs(A @ C - C @ A).max() < 1e-8 for A in action for C in comm):
            return comm
    return commutant(action)


def _centre(algebra: list[np.ndarray]) -> list[np.ndarray]:
    """Elements of span(algebra) commuting with every element of it."""
    if len(algebra) <= 1:
        return list(algebra)
    rows = np.array([np.concatenate([(A @ B - B @ A).ravel() for B in algebra]) for A in algebra])
    # absolute threshold: the commutant basis is orthonormal, so brackets are O(1) or roundoff
    _, sv, Vt = np.linalg.svd(rows.T, full_matrices=True)
    rank = int(np.sum(sv > 1e-9))
    coef = Vt[rank:].T
    return [sum(c * A for c, A in zip(col, algebra)) for col in coef.T]


def isotypic_dims(gens: Sequence, seed: int = 0) -> list[int]:
    return sorted(int(B.shape[1]) for B in isotypic_decomposition(gens, seed))


def _sl_basis(k: int) -> list[np.ndarray]:
    mats = []
    for i in range(k):
        for j in range(k):
            if i != j:
                E = np.zeros((k, k))
                E[i, j] = 1.0
                mats.append(E)
    for i in range(k - 1):
        D = np.zeros((k, k))
        D[i, i], D[i + 1, i + 1] = 1.0, -1.0
        mats.append(D)
    return mats


def _subset_sums(dims: Sequence[int]) -> set[int]:
    sums = {0}
    for d in dims:
        sums |= {s + d for s in sums}
    return sums


def so_to_conf_audit(k: int, d: int) -> dict:
    """Check the hypotheses of the SO(k)-to-conformal lemma and emit the decompositions it relies on."""
    if k < 2:
        raise ContractViolation("k must be at least 2")
    so_dims = isotypic_dims(so_basis(k))
    sl_dims = isotypic_dims(_sl_basis(k))
    hyp = k >= 3 and 1 < d < k * k - 1
    no_sl_subrep = d not in _subset_sums(sl_dims)
    return {
        "k": k,
        "d": d,
        "hypotheses": bool(hyp),
        "so_isotypic_dims": so_dims,
        "sl_isotypic_dims": sl_dims,
        "dims_sum": int(sum(so_dims)),
        "no_sl_subrepresentation_of_dim_d": bool(no_sl_subrep),
        "verdict": bool(hyp and no_sl_subrep and sl_dims == [1, k * k - 1]),
    }


# ---------------------------------------------------------------------------
# fixed subspaces and containments
# ---------------------------------------------------------------------------


@dataclass
class FixedSubspace:
    group: str
    size: int
    dim: int
    basis: list
    expected_dim: int
    contains_identity: bool
    contains_J: bool | None
    commute_residual: float

    @property
    def matches(self) -> bool:
        return self.dim == self.expected_dim and self.contains_identity and self.contains_J is not False

    def as_row(self) -> dict:
        return {"group": self.group, "size": self.size, "dim": self.dim, "expected_dim": self.expected_dim,
                "contains_identity": self.contains_identity, "contains_J": self.contains_J,
                "commute_residual": self.commute_residual, "matches": self.matches}


def _fixed(group: str, gens: list[np.ndarray], expected: int, J: np.ndarray | None, seed: int) -> FixedSubspace:
    k = gens[0].shape[0]
    basis = commutant(gens)
    inI = span_contains(basis, [np.eye(k)]) < 1e-9 if basis else False
    inJ = (span_contains(basis, [J]) < 1e-9 if basis else False) if J is not None else None
    if group == "SO(2)":
        inJ = span_contains(basis, so_basis(2)) < 1e-9
    rng = np.random.default_rng(seed)
    res = 0.0
    for _ in range(5):
        g = sla.expm(sum(rng.normal() * A for A in gens))
        for B in basis:
            res = max(res, float(np.abs(g @ B - B @ g).max()))
    return FixedSubspace(group, k, len(basis), basis, expected, bool(inI), inJ, res)


def fixed_subspace_catalog(seed: int = 0) -> list[FixedSubspace]:
    """Fixed points of conjugation on End(R^m) for the structure groups of the rigidity cases."""
    rows = [_fixed("SO(2)", so_basis(2), 2, None, seed)]
    for n in range(4, 10):
        rows.append(_fixed(f"SO({n - 1})", so_basis(n - 1), 1, None, seed))
    J = complex_structure(3)
    rows.append(_fixed("SU(3)", su3().mats, 2, J, seed))
    rows.append(_fixed("U(3)", u3().mats, 2, J, seed))
    return rows


@dataclass
class ContainmentAudit:
    names: list
    contains: np.ndarray  # contains[i, j]: spec i contains spec j
    closed: list
    dims: list
    claimed: list
    contains_su3: list

    def as_rows(self) -> list[dict]:
        rows = []
        for i, a in enumerate(self.names):
            rows.append({"algebra": a, "dim": self.dims[i], "claimed_dim": self.claimed[i], "closed": self.closed[i],
                         "contains_su3": self.contains_su3[i],
                         "contains": ";".join(self.names[j] for j in range(len(self.names))
                                              if j != i and self.contains[i, j])})
        return rows


def containment_audit(specs: Sequence[SubalgebraSpec] | None = None) -> ContainmentAudit:
    specs = list(specs) if specs is not None else standard_specs()
    base = su3()
    k = len(specs)
    C = np.zeros((k, k), dtype=bool)
    for i, a in enumerate(specs):
        for j, b in enumerate(specs):
            if a.mats[0].shape == b.mats[0].shape:
                C[i, j] = a.contains(b)
    return ContainmentAudit(
        [s.name for s in specs], C, [s.is_closed() for s in specs], [s.dim for s in specs],
        [s.claimed_dim for s in specs],
        [s.mats[0].shape == base.mats[0].shape and s.contains(base) for s in specs],
    )


def perturbed_spec(spec: SubalgebraSpec, size: float = 1e-3, seed: int = 0) -> SubalgebraSpec:
    """Negative control: jitter one basis element so the span is no longer bracket-closed."""
    rng = np.random.default_rng(seed)
    mats = spec.mats
    mats[0] = mats[0] + size * rng.normal(size=mats[0].shape)
    return _spec(spec.name + "~", mats, spec.claimed_dim)


def closure_dimension(gens: Sequence) -> int:
    return lie_closure([np.asarray(getattr(g, "mat", g), dtype=float) for g in gens]).dim
