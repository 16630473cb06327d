"""Lie group and Lie algebra kernel.

Matrices are plain ``numpy`` arrays wrapped in thin tagged containers so that
membership invariants (skew-symmetry, Lorentz-skewness, orthogonality) can be
checked where it matters. The heavy lifting is delegated to ``scipy.linalg``
(Pade scaling-and-squaring exponential, Schur-based logarithm, SVD null spaces).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from . import ContractViolation, LogBranchError

ALG_TOL = 1e-12
GRP_TOL = 1e-10
RANK_TOL = 1e-8
EXPM_NORM_LIMIT = 50.0
LOG_RADIUS = 0.5
SAMPLE_TIMES = (0.3, 0.7, 1.1)
WORD_LENGTH = 8

_GROUP_OF = {"so": "SO", "so1": "SO0(1,n)", "u3": "SO", "gl": "GL"}


def minkowski(n: int) -> np.ndarray:
    """The Lorentz form diag(-1, 1, ..., 1) on R^{1,n}."""
    J = np.eye(n + 1)
    J[0, 0] = -1.0
    return J


def matrix_unit(i: int, j: int, size: int, dtype=np.int64) -> np.ndarray:
    """E_{i,j} with 0-based indices."""
    E = np.zeros((size, size), dtype=dtype)
    E[i, j] = 1
    return E


def _kind(tag: str) -> str:
    if tag.startswith("so(1,"):
        return "so1"
    if tag.startswith("so("):
        return "so"
    if tag.startswith("u("):
        return "u3"
    if tag.startswith("gl("):
        return "gl"
    raise ContractViolation(f"unknown algebra tag {tag!r}")


@dataclass(frozen=True)
class AlgElement:
    """A square real matrix tagged with the algebra it is meant to live in.

    Tags: ``so(m)``, ``so(1,n)``, ``u(3)`` (realised as real 6x6 matrices) and ``gl(m)``.
    """

    mat: np.ndarray
    algebra: str

    def __post_init__(self):
        object.__setattr__(self, "mat", np.asarray(self.mat))
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise ContractViolation("algebra element must be a square matrix")
        _kind(self.algebra)

    @property
    def size(self) -> int:
        return self.mat.shape[0]

    def residual(self) -> float:
        """Violation of the membership equation for the tagged algebra."""
        M = np.asarray(self.mat, dtype=float)
        kind = _kind(self.algebra)
        if kind in ("so", "u3"):
            return float(np.max(np.abs(M.T + M), initial=0.0))
        if kind == "so1":
            J = minkowski(M.shape[0] - 1)
            return float(np.max(np.abs(M.T @ J + J @ M), initial=0.0))
        return 0.0

    def is_valid(self, tol: float = ALG_TOL) -> bool:
        return self.residual() <= tol

    def __add__(self, other: "AlgElement") -> "AlgElement":
        return AlgElement(self.mat + other.mat, _common_tag(self, other))

    def __sub__(self, other: "AlgElement") -> "AlgElement":
        return AlgElement(self.mat - other.mat, _common_tag(self, other))

    def __neg__(self) -> "AlgElement":
        return AlgElement(-self.mat, self.algebra)

    def __mul__(self, c) -> "AlgElement":
        return AlgElement(c * self.mat, self.algebra)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:  # exact comparison, used for integer tables
        return (
            isinstance(other, AlgElement)
            and self.mat.shape == other.mat.shape
            and bool(np.array_equal(self.mat, other.mat))
        )

    __hash__ = None


@dataclass(frozen=True)
class GrpElement:
    """A group element; tags ``SO(m)``, ``SO0(1,n)`` or ``GL(m)``."""

    mat: np.ndarray
    group: str

    def __post_init__(self):
        object.__setattr__(self, "mat", np.asarray(self.mat, dtype=float))
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise ContractViolation("group element must be a square matrix")

    def residual(self) -> float:
        M = self.mat
        if self.group.startswith("SO0"):
            J = minkowski(M.shape[0] - 1)
            return float(np.max(np.abs(M.T @ J @ M - J)))
        if self.group.startswith("SO"):
            return float(np.max(np.abs(M.T @ M - np.eye(M.shape[0]))))
        return 0.0

    def is_valid(self, tol: float = GRP_TOL) -> bool:
        if self.residual() > tol:
            return False
        if self.group.startswith("SO0"):
            return bool(self.mat[0, 0] >= 1.0 - tol)
        if self.group.startswith("SO"):
            return bool(np.linalg.det(self.mat) > 0)
        return True

    def __matmul__(self, other: "GrpElement") -> "GrpElement":
        tag = self.group if self.group == other.group else f"GL({self.mat.shape[0]})"
        return GrpElement(self.mat @ other.mat, tag)

    def inverse(self) -> "GrpElement":
        if self.group.startswith("SO0"):
            J = minkowski(self.mat.shape[0] - 1)
            return GrpElement(J @ self.mat.T @ J, self.group)
        if self.group.startswith("SO"):
            return GrpElement(self.mat.T.copy(), self.group)
        return GrpElement(np.linalg.inv(self.mat), self.group)


def _common_tag(a: AlgElement, b: AlgElement) -> str:
    if a.mat.shape != b.mat.shape:
        raise ContractViolation(f"dimension mismatch {a.mat.shape} vs {b.mat.shape}")
    return a.algebra if a.algebra == b.algebra else f"gl({a.size})"


def group_tag_for(algebra: str, size: int) -> str:
    kind = _kind(algebra)
    if kind == "so1":
        return f"SO0(1,{size - 1})"
    if kind in ("so", "u3"):
        return f"SO({size})"
    return f"GL({size})"


def algebra_tag_for(group: str, size: int) -> str:
    if group.startswith("SO0"):
        return f"so(1,{size - 1})"
    if group.startswith("SO"):
        return f"so({size})"
    return f"gl({size})"


# ---------------------------------------------------------------------------
# The standard basis of so(1,n)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardBasis:
    """Integer matrices X, U_i^+, U_i^-, R_{i,j} in so(1,n), labels i, j in 2..n.

    Labels follow the 1-based convention of the closed formulas, so ``U_plus[i]``
    has its nonzero off-diagonal entries in row/column ``i`` of the 0-based array
    (the column of the frame vector e_i). ``R`` is defined for all labels
    1 <= i < j <= n; the labels 2..n span the so(n-1) block that acts on the
    normal frame.
    """

    n: int
    X: AlgElement = field(init=False)
    U_plus: dict = field(init=False)
    U_minus: dict = field(init=False)
    R: dict = field(init=False)

    def __post_init__(self):
        n = self.n
        if n < 2:
            raise ContractViolation("StandardBasis needs n >= 2")
        N = n + 1
        tag = f"so(1,{n})"

        def E(i, j):  # 1-based, as in the closed formulas
            return matrix_unit(i - 1, j - 1, N)

        object.__setattr__(self, "X", AlgElement(E(1, 2) + E(2, 1), tag))
        up, um, R = {}, {}, {}
        for i in range(2, n + 1):
            up[i] = AlgElement(-E(1, i + 1) - E(2, i + 1) - E(i + 1, 1) + E(i + 1, 2), tag)
            um[i] = AlgElement(-E(1, i + 1) + E(2, i + 1) - E(i + 1, 1) - E(i + 1, 2), tag)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i != j:
                    R[(i, j)] = AlgElement(E(i + 1, j + 1) - E(j + 1, i + 1), tag)
        object.__setattr__(self, "U_plus", up)
        object.__setattr__(self, "U_minus", um)
        object.__setattr__(self, "R", R)

    @property
    def labels(self) -> range:
        return range(2, self.n + 1)

    def so_pairs(self) -> list[tuple[int, int]]:
        """Label pairs (i, j), 2 <= i < j <= n, indexing the so(n-1) basis."""
        return list(combinations(self.labels, 2))

    def so_block_basis(self) -> list[np.ndarray]:
        """R_{i,j} restricted to the (n-1)x(n-1) normal block, in ``so_pairs`` order."""
        return [np.asarray(self.R[p].mat[2:, 2:], dtype=float) for p in self.so_pairs()]

    def horizontal(self) -> list[AlgElement]:
        return [self.X] + [self.U_plus[i] for i in self.labels] + [self.U_minus[i] for i in self.labels]


def so_basis(m: int) -> list[np.ndarray]:
    """Basis E_ij - E_ji (i < j) of so(m) as float matrices."""
    out = []
    for i, j in combinations(range(m), 2):
        A = np.zeros((m, m))
        A[i, j], A[j, i] = 1.0, -1.0
        out.append(A)
    return out


def so_coordinates(A: np.ndarray) -> np.ndarray:
    """Coordinates of a skew matrix in the basis ``so_basis``: the upper triangle."""
    iu = np.triu_indices(A.shape[0], 1)
    return np.asarray(A)[iu]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def bracket(a: AlgElement, b: AlgElement) -> AlgElement:
    """Commutator ab - ba (exact for integer matrices)."""
    tag = _common_tag(a, b)
    return AlgElement(a.mat @ b.mat - b.mat @ a.mat, tag)


def expm(a: AlgElement, t: float = 1.0) -> GrpElement:
    """exp(t a); refuses arguments with ||t a|| > 50 (Frobenius)."""
    M = t * np.asarray(a.mat, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ContractViolation("non-finite entries in exponential argument")
    if np.linalg.norm(M) > EXPM_NORM_LIMIT:
        raise ContractViolation(f"||t*a|| = {np.linalg.norm(M):.3g} exceeds {EXPM_NORM_LIMIT}")
    return GrpElement(sla.expm(M), group_tag_for(a.algebra, a.size))


def logm(g: GrpElement) -> AlgElement:
    """Principal logarithm of a group element close to the identity.

    Raises ``LogBranchError`` when an eigenvalue lies on the closed negative real
    axis or further than 0.5 from 1; callers are expected to shrink their loops.
    """
    M = np.asarray(g.mat, dtype=float)
    eig = np.linalg.eigvals(M)
    if np.any((np.abs(eig.imag) < 1e-12) & (eig.real <= 0)):
        raise LogBranchError("eigenvalue on the negative real axis", eigenvalues=eig.tolist())
    dist = float(np.max(np.abs(eig - 1.0)))
    if dist > LOG_RADIUS:
        raise LogBranchError(f"spectral distance {dist:.3g} from identity exceeds {LOG_RADIUS}")
    L = sla.logm(M)
    L = np.real_if_close(L, tol=1e6)
    if np.iscomplexobj(L):
        raise LogBranchError("logarithm is not real")
    L = np.asarray(L, dtype=float)
    kind = g.group
    if kind.startswith("SO0"):
        J = minkowski(M.shape[0] - 1)
        L = 0.5 * (L - J @ L.T @ J)
    elif kind.startswith("SO"):
        L = 0.5 * (L - L.T)
    return AlgElement(L, algebra_tag_for(g.group, M.shape[0]))


def orthonormal_span(vectors: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning the rows of ``vectors`` (SVD rank at tol * sigma_max)."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.size == 0:
        return np.zeros((0, V.shape[-1]))
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, V.shape[1]))
    rank = int(np.sum(s > tol * s[0]))
    return vt[:rank]


@dataclass(frozen=True)
class ClosureResult:
    basis: list  # orthonormal (Frobenius) matrices
    dim: int
    rounds: int


def lie_closure(gens: Sequence, tol: float = RANK_TOL, max_rounds: int = 50) -> ClosureResult:
    """Smallest bracket-closed subspace containing ``gens``.

    ``gens`` may hold ``AlgElement`` values or bare matrices. Repeatedly brackets
    the current orthonormal basis with itself and re-orthonormalises until the
    dimension stops growing.
    """
    mats = [np.asarray(g.mat if isinstance(g, AlgElement) else g, dtype=float) for g in gens]
    if not mats:
        return ClosureResult([], 0, 0)
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ContractViolation("generators of different sizes")
    basis = orthonormal_span(np.array([m.ravel() for m in mats]), tol)
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        B = [b.reshape(shape) for b in basis]
        new = [a @ b - b @ a for a, b in combinations(B, 2)]
        stacked = np.vstack([basis] + ([np.array([c.ravel() for c in new])] if new else []))
        grown = orthonormal_span(stacked, tol)
        if grown.shape[0] == basis.shape[0]:
            basis = grown
            break
        basis = grown
    return ClosureResult([b.reshape(shape) for b in basis], int(basis.shape[0]), rounds)


def span_contains(basis: Sequence[np.ndarray], mats: Iterable[np.ndarray], tol: float = 1e-8) -> float:
    """Largest relative distance of ``mats`` from span(basis); 0 means contained."""
    B = np.array([np.asarray(b, dtype=float).ravel() for b in basis]) if len(basis) else None
    worst = 0.0
    for M in mats:
        m = np.asarray(M, dtype=float).ravel()
        nm = np.linalg.norm(m)
        if nm == 0:
            continue
        if B is None:
            worst = max(worst, 1.0)
            continue
        coef, *_ = np.linalg.lstsq(B.T, m, rcond=None)
        worst = max(worst, float(np.linalg.norm(B.T @ coef - m) / nm))
    return worst


def commutant(action: Sequence, tol: float = RANK_TOL) -> list[np.ndarray]:
    """Orthonormal basis of {A in End(R^m) : gA = Ag for every g in ``action``}."""
    mats = [np.asarray(g.mat if isinstance(g, GrpElement) else g, dtype=float) for g in action]
    if not mats:
        raise ContractViolation("empty action")
    m = mats[0].shape[0]
    I = np.eye(m)
    # row-major vec: vec(gA) = (g kron I) vec A, vec(Ag) = (I kron g^T) vec A
    L = np.vstack([np.kron(g, I) - np.kron(I, g.T) for g in mats])
    if not np.any(L):
        ns = np.eye(m * m)
    else:
        ns = sla.null_space(L, rcond=tol)
    return [ns[:, k].reshape(m, m) for k in range(ns.shape[1])]


def group_sample(generators: Sequence, times: Sequence[float] = SAMPLE_TIMES) -> list[np.ndarray]:
    """exp(t g) for each generator g and t in ``times``: a deterministic group sample."""
    out = []
    for g in generators:
        G = np.asarray(g.mat if isinstance(g, AlgElement) else g, dtype=float)
        out.extend(sla.expm(t * G) for t in times)
    return out


def _spectral_growth(g: np.ndarray) -> float:
    ev = np.abs(np.linalg.eigvals(g))
    return float(np.max(np.abs(np.log(ev))))


def invariant_inner_product(
    sample: Sequence, word_length: int = WORD_LENGTH, tol: float = 1e-8
) -> np.ndarray | None:
    """Inner product h with g^T h g = h for every g in the sample, or ``None``.

    The average of g^T g over words of length up to ``word_length`` is formed by
    iterating the averaging operator; it is then projected onto the space of
    exactly invariant symmetric forms (an SVD null space), which removes the
    slowly decaying non-invariant part. Samples whose words grow or shrink in
    norm (an eigenvalue off the unit circle) are rejected.
    """
    mats = [np.asarray(g.mat if isinstance(g, GrpElement) else g, dtype=float) for g in sample]
    if not mats:
        raise ContractViolation("empty sample")
    m = mats[0].shape[0]
    # growth guard: norms of powers up to the word length
    for g in mats:
        if _spectral_growth(g) * word_length > np.log(1.0 + 1e3 * tol) + 1e-12:
            return None
        P = np.eye(m)
        for _ in range(word_length):
            P = P @ g
        if np.linalg.norm(P, 2) * np.linalg.norm(np.linalg.inv(P), 2) > 1e6:
            return None
    h = np.eye(m)
    ext = mats + [np.linalg.inv(g) for g in mats] + [np.eye(m)]
    for _ in range(word_length):
        h = sum(g.T @ h @ g for g in ext) / len(ext)
        h = 0.5 * (h + h.T)
        h *= m / np.trace(h)
    # exact projection onto invariant symmetric forms
    sym = []
    for i in range(m):
        for j in range(i, m):
            S = np.zeros((m, m))
            S[i, j] = S[j, i] = 1.0
            sym.append(S)
    Smat = np.array([s.ravel() for s in sym]).T  # m^2 x p
    L = np.vstack([(np.kron(g.T, g.T) - np.eye(m * m)) @ Smat for g in mats])
    ns = sla.null_space(L, rcond=tol)
    if ns.shape[1] == 0:
        return None
    Q = Smat @ ns  # invariant symmetric forms, as vectors
    coef, *_ = np.linalg.lstsq(Q, h.ravel(), rcond=None)
    h_inv = (Q @ coef).reshape(m, m)
    h_inv = 0.5 * (h_inv + h_inv.T)
    if np.min(np.linalg.eigvalsh(h_inv)) <= 0:
        return None
    h_inv *= m / np.trace(h_inv)
    # stationarity under one more averaging step
    h_next = sum(g.T @ h_inv @ g for g in ext) / len(ext)
    if np.linalg.norm(h_next - h_inv) > 1e3 * tol * np.linalg.norm(h_inv):
        return None
    return h_inv


def conformal_containment(sample: Sequence, h: np.ndarray, tol: float = 1e-6) -> tuple[bool, float]:
    """Whether every g preserves h up to a scalar: max ||g^T h g - lam h|| / ||h||."""
    h = np.asarray(h, dtype=float)
    nh = np.linalg.norm(h)
    worst = 0.0
    for g in sample:
        G = np.asarray(g.mat if isinstance(g, GrpElement) else g, dtype=float)
        P = G.T @ h @ G
        lam = float(np.sum(P * h) / np.sum(h * h))
        worst = max(worst, float(np.linalg.norm(P - lam * h) / nh))
    return worst < tol, worst


def g_ad(A: np.ndarray, B: np.ndarray) -> float:
    """Bi-invariant inner product -1/2 tr(AB) on so(m); R_ij has unit norm."""
    return float(-0.5 * np.trace(np.asarray(A) @ np.asarray(B)))


# ---------------------------------------------------------------------------
# commutation relations of the standard basis
# ---------------------------------------------------------------------------

RELATIONS = (
    "[X,U+i]=U+i",
    "[X,U-i]=-U-i",
    "[U+i,U+j]=0",
    "[U-i,U-j]=0",
    "[U+i,U-i]=2X",
    "[U+i,U-j]=2Rij",
    "[X,Rij]=0",
    "[Rij,U+k]=djk U+i-dik U+j",
    "[Rij,U-k]=djk U-i-dik U-j",
    "[Rij,Rkl]=djk Ril-dik Rjl-djl Rik+dil Rjk",
    "m-part[U+i,U-i]=0",
    "m-part[U+-i,U+-j]=0",
)


def bracket_table(n: int) -> list[dict]:
    """Check the twelve commutation relations of ``StandardBasis(n)`` in exact integer arithmetic.

    Returns one row per relation with the number of index tuples checked and the
    number of failures. The m-part of a matrix is its so(n-1) block (rows and
    columns 2..n of the frame).
    """
    B = StandardBasis(n)
    L = list(B.labels)
    N = n + 1
    Z = np.zeros((N, N), dtype=np.int64)
    X, Up, Um = B.X.mat, {i: B.U_plus[i].mat for i in L}, {i: B.U_minus[i].mat for i in L}

    def R(i, j):
        return Z if i == j else B.R[(i, j)].mat

    def br(a, b):
        return a @ b - b @ a

    def mpart(A):
        out = np.zeros_like(A)
        out[2:, 2:] = A[2:, 2:]
        return out

    d = lambda a, b: int(a == b)  # noqa: E731
    pairs = [(i, j) for i in L for j in L if i != j]
    checks = {
        RELATIONS[0]: [(br(X, Up[i]), Up[i]) for i in L],
        RELATIONS[1]: [(br(X, Um[i]), -Um[i]) for i in L],
        RELATIONS[2]: [(br(Up[i], Up[j]), Z) for i in L for j in L],
        RELATIONS[3]: [(br(Um[i], Um[j]), Z) for i in L for j in L],
        RELATIONS[4]: [(br(Up[i], Um[i]), 2 * X) for i in L],
        RELATIONS[5]: [(br(Up[i], Um[j]), 2 * R(i, j)) for i, j in pairs],
        RELATIONS[6]: [(br(X, R(i, j)), Z) for i, j in pairs],
        RELATIONS[7]: [(br(R(i, j), Up[k]), d(j, k) * Up[i] - d(i, k) * Up[j]) for i, j in pairs for k in L],
        RELATIONS[8]: [(br(R(i, j), Um[k]), d(j, k) * Um[i] - d(i, k) * Um[j]) for i, j in pairs for k in L],
        RELATIONS[9]: [(br(R(i, j), R(k, l)),
                        d(j, k) * R(i, l) - d(i, k) * R(j, l) - d(j, l) * R(i, k) + d(i, l) * R(j, k))
                       for i, j in pairs for k, l in pairs],
        RELATIONS[10]: [(mpart(br(Up[i], Um[i])), Z) for i in L],
        RELATIONS[11]: [(mpart(br(P[i], P[j])), Z) for P in (Up, Um) for i in L for j in L],
    }
    rows = []
    for name, items in checks.items():
        fails = sum(1 for lhs, rhs in items if not np.array_equal(lhs, rhs))
        rows.append({"n": n, "relation": name, "checked": len(items), "failures": fails,
                     "dtype": str(items[0][0].dtype) if items else "int64"})
    return rows
