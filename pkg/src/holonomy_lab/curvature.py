"""Curvature of the dynamical connection, estimated from small csu loops.

Every estimate here comes from a closed loop built out of exact leaf moves and
flow segments (so it measures the dynamical connection, not a chart connection)
and is normalised as log(holonomy)/h^2. Two step sizes h, h/2 are combined by
Richardson extrapolation.

Bundles are represented by small "bundle flow" objects that know how to turn a
closed csu loop on the frame bundle into a Lie algebra element:

* ``FrameBundle``: the normal frame bundle, structure group SO(n-1);
* ``UnstableBundle``: the linear cocycle on E_u (values in gl(n-1));
* ``FlatFlow``: a product bundle with trivial transport (negative control);
* ``LineBundleFlow``: the product SM x R with drift s -> s + t a, whose transport
  along stable/unstable legs is trivial and along a center leg of length tau is a
  translation by tau a.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ContractViolation, ExtrapolationError
from .flows import propagate
from .geometry import ModelSpace, frame_pairing, lorentz_inverse
from .holonomy import (
    CsuPath,
    CsuSolver,
    LeafCharts,
    _as_matrix,
    _parallel_map,
    loop_holonomy,
    quadrilateral,
)
from .liealg import AlgElement, GrpElement, g_ad, logm, so_basis

H_DEFAULT = 1e-2
DISAGREE_TOL = 0.10
ABS_FLOOR = 1e-3
RANK_RTOL = 1e-6
RANK_ATOL = 1e-9
NORMALIZATION = "g_Ad(A, B) = -tr(AB)/2, so ||R_ij|| = 1"


# ---------------------------------------------------------------------------
# bundle flows
# ---------------------------------------------------------------------------


class BundleFlow:
    """A principal or linear extension of the frame-flow base, seen through loop holonomy."""

    tag = "abstract"
    algebra = "gl(1)"

    def algebra_basis(self) -> list[np.ndarray]:
        raise NotImplementedError

    def inner(self, A: np.ndarray, B: np.ndarray) -> float:
        """The bi-invariant metric used to dualise the curvature."""
        return g_ad(A, B)

    def loop_log(self, space: ModelSpace, loop: CsuPath, charts: LeafCharts) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"tag": self.tag, "algebra": self.algebra}


class FrameBundle(BundleFlow):
    tag = "Frame"

    def __init__(self, n: int):
        self.m = n - 1
        self.algebra = f"so({self.m})"

    def algebra_basis(self):
        return so_basis(self.m)

    def loop_log(self, space, loop, charts):
        hol = loop_holonomy(space, "Frame", loop, charts).map
        return logm(GrpElement(hol, f"SO({self.m})")).mat


class UnstableBundle(BundleFlow):
    tag = "E_u"

    def __init__(self, n: int):
        self.m = n - 1
        self.algebra = f"gl({self.m})"

    def algebra_basis(self):
        m = self.m
        return [np.eye(m)[:, [i]] @ np.eye(m)[[j], :] for i in range(m) for j in range(m)]

    def inner(self, A, B):
        return float(np.sum(A * B))

    def loop_log(self, space, loop, charts):
        hol = loop_holonomy(space, "E_u", loop, charts).map
        return logm(GrpElement(hol, f"GL({self.m})")).mat


@dataclass
class FlatFlow(BundleFlow):
    """Product bundle SM x G with the flow acting on the first factor only."""

    group: str = "SO(3)"

    def __post_init__(self):
        k = int(self.group[self.group.index("(") + 1: self.group.index(")")])
        self.k = k
        self.tag = f"Flat[{self.group}]"
        self.algebra = f"so({k})" if self.group.startswith("SO") else f"gl({k})"

    def algebra_basis(self):
        return so_basis(self.k) if self.group.startswith("SO") else UnstableBundle(self.k + 1).algebra_basis()

    def loop_log(self, space, loop, charts):
        return np.zeros((self.k, self.k))


@dataclass
class LineBundleFlow(BundleFlow):
    """SM x R with the flow (v, s) -> (phi_t v, s + t a).

    The structure group R acts on fibers by s . r = s - r, so the holonomy of a
    loop whose center legs have total signed length T is the group element -a T.
    """

    a: float = 0.0

    def __post_init__(self):
        self.tag = f"LineBundle[a={self.a:g}]"
        self.algebra = "gl(1)"

    def algebra_basis(self):
        return [np.ones((1, 1))]

    def inner(self, A, B):
        return float(np.sum(A * B))

    def loop_log(self, space, loop, charts):
        return np.array([[-self.a * loop.center_time()]])

    def fiber_map(self, s: float, t: float) -> float:
        return s + t * self.a


def make_flat_flow(space: ModelSpace, group: str = "SO(3)") -> FlatFlow:
    del space  # the flat extension does not depend on the base geometry
    return FlatFlow(group)


def make_line_bundle_flow(space: ModelSpace, a: float) -> LineBundleFlow:
    del space
    return LineBundleFlow(float(a))


def resolve_bundle(space: ModelSpace, bundle) -> BundleFlow:
    if isinstance(bundle, BundleFlow):
        return bundle
    if bundle == "Frame":
        return FrameBundle(space.n)
    if bundle == "E_u":
        return UnstableBundle(space.n)
    raise ContractViolation(f"unknown bundle {bundle!r}")


# ---------------------------------------------------------------------------
# loop estimates
# ---------------------------------------------------------------------------


@dataclass
class CurvatureEstimate:
    value: np.ndarray  # Richardson-extrapolated
    coarse: np.ndarray  # estimate at h
    fine: np.ndarray  # estimate at h/2
    h: float
    disagreement: float

    def element(self, algebra: str) -> AlgElement:
        return AlgElement(self.value, algebra)


class LoopEstimator:
    """Shared leaf charts and csu solver for many small loops at one or several frames."""

    def __init__(self, space: ModelSpace, bundle="Frame", symmetric: bool | None = None):
        self.space = space
        self.bundle = resolve_bundle(space, bundle)
        self.charts = LeafCharts(space)
        self.solver = CsuSolver(self.charts)
        # odd-order terms vanish identically in constant curvature; elsewhere average them out
        self.symmetric = (not space.is_hyperbolic) if symmetric is None else symmetric

    def _loop(self, G, leg1, leg2, h, s1=1.0, s2=1.0):
        (k1, y1), (k2, y2) = leg1, leg2
        steps = [(k1, s1 * h * y1), (k2, s2 * h * y2), (k1, -s1 * h * y1), (k2, -s2 * h * y2)]
        return quadrilateral(self.charts, G, steps, self.solver)

    def raw(self, G, leg1, leg2, h) -> np.ndarray:
        """log(holonomy)/h^2 around the loop leg1, leg2, -leg1, -leg2 (closed by csu)."""
        leg1 = (leg1[0], np.asarray(leg1[1], dtype=float))
        leg2 = (leg2[0], np.asarray(leg2[1], dtype=float))
        if not self.symmetric:
            return self.bundle.loop_log(self.space, self._loop(G, leg1, leg2, h), self.charts) / h ** 2
        acc = 0.0
        for s1, s2 in ((1, 1), (-1, -1), (-1, 1), (1, -1)):
            loop = self._loop(G, leg1, leg2, h, s1, s2)
            acc = acc + s1 * s2 * self.bundle.loop_log(self.space, loop, self.charts)
        return acc / (4.0 * h ** 2)

    def estimate(self, G, leg1, leg2, h=H_DEFAULT, check: bool = True) -> CurvatureEstimate:
        G = _as_matrix(G)
        leg1 = (leg1[0], np.asarray(leg1[1], dtype=float))
        leg2 = (leg2[0], np.asarray(leg2[1], dtype=float))
        Ec = self.raw(G, leg1, leg2, h)
        Ef = self.raw(G, leg1, leg2, h / 2)
        ER = (4.0 * Ef - Ec) / 3.0
        dis = float(np.linalg.norm(Ec - Ef) / max(np.linalg.norm(ER), ABS_FLOOR))
        if check and dis > DISAGREE_TOL:
            raise ExtrapolationError("h too large or regularity insufficient", disagreement=dis, h=h)
        return CurvatureEstimate(np.asarray(ER), np.asarray(Ec), np.asarray(Ef), h, dis)


def _unit(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    nrm = np.linalg.norm(y)
    if abs(nrm - 1.0) > 1e-9:
        raise ContractViolation("leaf directions must be Sasaki-unit", norm=float(nrm))
    return y


def parallelogram_curvature(space: ModelSpace, bundle, v, xi_plus, xi_minus, h: float = H_DEFAULT,
                            estimator: LoopEstimator | None = None) -> AlgElement:
    """Estimate Omega_v(xi_plus, xi_minus) for xi_plus in E_u, xi_minus in E_s.

    The directions are coefficient vectors in the Sasaki-orthonormal bases of E_u and
    E_s at v (see ``LeafCharts.basis``); on hyperbolic space these are the unit
    vectors aligned with U_i^+ and U_j^-.
    """
    est = estimator or LoopEstimator(space, bundle)
    e = est.estimate(v, ("u", _unit(xi_plus)), ("s", _unit(xi_minus)), h)
    return e.element(est.bundle.algebra)


# ---------------------------------------------------------------------------
# dynamical connection
# ---------------------------------------------------------------------------


def _so1n_coords(A: np.ndarray) -> np.ndarray:
    """Coordinates of A in so(1,n): first row (boosts) then the strict upper spatial triangle."""
    N = A.shape[0]
    iu = np.triu_indices(N - 1, 1)
    return np.concatenate([A[0, 1:], A[1:, 1:][iu]])


@dataclass
class DynConnection:
    """Vertical projector of the dynamical connection on the frame bundle.

    Tangent vectors at a frame G are written G A with A in so(1,n). The horizontal
    space is spanned by the flow generator and the leaf directions of E_s and E_u
    (obtained by differentiating leaf moves); the vertical space is the so(n-1)
    block acting on the normal frame.
    """

    space: ModelSpace
    bundle: str = "Frame"
    fd_step: float = 1e-5

    def __post_init__(self):
        self.charts = LeafCharts(self.space)

    def horizontal(self, G) -> np.ndarray:
        G = _as_matrix(G)
        m = self.space.n - 1
        eps = self.fd_step
        Ginv = lorentz_inverse(G)
        cols = []
        fp = propagate(self.space, G, eps).G
        fm = propagate(self.space, G, -eps).G
        cols.append(_so1n_coords(Ginv @ (fp - fm) / (2 * eps)))
        for kind in ("s", "u"):
            for k in range(m):
                y = np.zeros(m)
                y[k] = eps
                gp = self.charts.move(G, y, kind)
                gm = self.charts.move(G, -y, kind)
                cols.append(_so1n_coords(Ginv @ (gp - gm) / (2 * eps)))
        return np.array(cols).T

    def vertical(self) -> np.ndarray:
        n = self.space.n
        cols = []
        for A in so_basis(n - 1):
            full = np.zeros((n + 1, n + 1))
            full[2:, 2:] = A
            cols.append(_so1n_coords(full))
        return np.array(cols).T

    def projector(self, G) -> np.ndarray:
        """Projector onto the vertical along the horizontal space, in so(1,n) coordinates."""
        Hm = self.horizontal(G)
        V = self.vertical()
        B = np.hstack([Hm, V])
        k = Hm.shape[1]
        D = np.diag([0.0] * k + [1.0] * V.shape[1])
        return B @ D @ np.linalg.inv(B)

    def theta(self, G, A: np.ndarray) -> np.ndarray:
        """Connection form on the tangent vector G A, as an so(n-1) matrix."""
        P = self.projector(G)
        c = P @ _so1n_coords(A)
        n = self.space.n
        iu = np.triu_indices(n, 1)
        M = np.zeros((n, n))
        M[iu] = c[n:]
        M = M - M.T
        return M[1:, 1:]


# ---------------------------------------------------------------------------
# curvature morphism
# ---------------------------------------------------------------------------


@dataclass
class CurvatureMorphism:
    """F: Lie(G) -> End(E_u|v) as a matrix with columns vec(F(basis_k)) (row-major)."""

    base: np.ndarray  # frame matrix at which F was assembled
    matrix: np.ndarray
    rank: int
    algebra: str
    eu_basis: np.ndarray  # Sasaki-orthonormal E_u basis in frame coordinates (J, J')
    es_basis: np.ndarray
    omega: np.ndarray  # omega[a, b] = Omega(xi+_a, xi-_b) as algebra matrices
    pairing: np.ndarray  # d(lambda)(xi+_c, xi-_b)
    normalization: str = NORMALIZATION
    max_disagreement: float = 0.0

    @property
    def m(self) -> int:
        return self.eu_basis.shape[1]

    def apply(self, k: int) -> np.ndarray:
        """F of the k-th algebra basis element as an m x m matrix."""
        return self.matrix[:, k].reshape(self.m, self.m)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "normalization": self.normalization,
            "rank": self.rank,
            "matrix": self.matrix.tolist(),
            "eu_basis": self.eu_basis.tolist(),
            "base_frame": np.asarray(self.base).tolist(),
        }


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL, atol: float = RANK_ATOL) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] < atol:
        return 0
    return int(np.sum(s > max(rtol * s[0], atol)))


def curvature_morphism(space: ModelSpace, bundle, v, h: float = H_DEFAULT,
                       estimator: LoopEstimator | None = None, workers: int = 1,
                       rank_rtol: float = RANK_RTOL) -> CurvatureMorphism:
    """Assemble F at v from the loop estimates Omega(xi+_a, xi-_b) over basis pairs.

    Solves g(omega(xi+_a, xi-_b), e_k) = d(lambda)(F(e_k) xi+_a, xi-_b) for F(e_k).
    """
    G = _as_matrix(v)
    est = estimator or LoopEstimator(space, bundle)
    m = space.n - 1
    Bu = est.charts.basis(G, "u")
    Bs = est.charts.basis(G, "s")
    P = np.array([[frame_pairing(Bu[:, c], Bs[:, b]) for b in range(m)] for c in range(m)])
    pairs = [(a, b) for a in range(m) for b in range(m)]

    def one(ab):
        a, b = ab
        return est.estimate(G, ("u", np.eye(m)[a]), ("s", np.eye(m)[b]), h)

    results = _parallel_map(one, pairs, workers)
    k_dim = est.bundle.algebra_basis()[0].shape[0]
    W = np.zeros((m, m, k_dim, k_dim))
    dis = 0.0
    for (a, b), e in zip(pairs, results):
        W[a, b] = e.value
        dis = max(dis, e.disagreement)
    basis = est.bundle.algebra_basis()
    Pinv = np.linalg.inv(P)
    cols = []
    for E in basis:
        Mk = np.array([[est.bundle.inner(W[a, b], E) for b in range(m)] for a in range(m)])
        Fk = (Mk @ Pinv).T
        cols.append(Fk.reshape(-1))
    F = np.array(cols).T
    return CurvatureMorphism(G, F, numerical_rank(F, rank_rtol), est.bundle.algebra, Bu, Bs, W, P,
                             max_disagreement=dis)


def inclusion_morphism(m: int) -> np.ndarray:
    """The inclusion so(m) -> End(R^m) in the same column layout as ``CurvatureMorphism``."""
    return np.array([A.reshape(-1) for A in so_basis(m)]).T


# ---------------------------------------------------------------------------
# structural identities, equivariance, rank, homotheties
# ---------------------------------------------------------------------------


def leaf_differential(est: LoopEstimator, G, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrices of d(phi_t) on E_u and E_s in the Sasaki-orthonormal bases, and the frame at time t."""
    G = _as_matrix(G)
    res = propagate(est.space, G, t, with_jacobi=True)
    out = []
    for kind in ("u", "s"):
        B0 = est.charts.basis(G, kind)
        B1 = est.charts.basis(res.G, kind)
        coef, *_ = np.linalg.lstsq(B1, res.Phi @ B0, rcond=None)
        out.append(coef)
    return out[0], out[1], res.G


@dataclass
class IdentityReport:
    iota_X: float
    restrict_Es: float
    restrict_Eu: float
    invariance: dict = field(default_factory=dict)  # t -> residual
    scale: float = 1.0

    def as_rows(self) -> list[dict]:
        rows = [
            {"identity": "iota_X", "t": None, "residual": self.iota_X},
            {"identity": "restrict_Es", "t": None, "residual": self.restrict_Es},
            {"identity": "restrict_Eu", "t": None, "residual": self.restrict_Eu},
        ]
        rows += [{"identity": "flow_invariance", "t": t, "residual": r} for t, r in self.invariance.items()]
        return rows

    @property
    def worst(self) -> float:
        return max([self.iota_X, self.restrict_Es, self.restrict_Eu, *self.invariance.values()])


def check_structural_identities(space: ModelSpace, bundle, v, t_list: Sequence[float] = (1.0,),
                                h: float = H_DEFAULT, estimator: LoopEstimator | None = None) -> IdentityReport:
    """Residuals of iota_X Omega = 0, Omega|E_s x E_s = 0, Omega|E_u x E_u = 0 and flow invariance.

    Residuals are absolute operator norms of Lie algebra elements; the mixed value
    Omega(xi+_1, xi-_2) sets the scale (it has norm 1 on hyperbolic frame bundles).
    """
    G = _as_matrix(v)
    est = estimator or LoopEstimator(space, bundle)
    m = space.n - 1
    e = np.eye(m)
    nrm = lambda A: float(np.linalg.norm(A, 2))  # noqa: E731
    a, b = 0, 1 % m
    iota = max(nrm(est.estimate(G, ("c", np.ones(1)), (k, e[0]), h, check=False).value) for k in ("u", "s"))
    rs = nrm(est.estimate(G, ("s", e[a]), ("s", e[b]), h, check=False).value) if m > 1 else 0.0
    ru = nrm(est.estimate(G, ("u", e[a]), ("u", e[b]), h, check=False).value) if m > 1 else 0.0
    # invariance: Omega_{phi_t v}(D xi+, D' xi-) against Omega_v(xi+, xi-) for one mixed pair
    base = est.estimate(G, ("u", e[a]), ("s", e[b]), h).value
    inv = {}
    for t in t_list:
        Du, Ds, Gt = leaf_differential(est, G, t)
        xu, xs = Du @ e[a], Ds @ e[b]
        su, ss = np.linalg.norm(xu), np.linalg.norm(xs)
        val = est.estimate(Gt, ("u", xu / su), ("s", xs / ss), h).value * su * ss
        inv[float(t)] = nrm(val - base)
    return IdentityReport(iota, rs, ru, inv, nrm(base))


def check_equivariance(space: ModelSpace, bundle, v, t: float, h: float = H_DEFAULT,
                       F0: CurvatureMorphism | None = None, estimator: LoopEstimator | None = None) -> float:
    """Relative residual of F_{phi_t v}(xi) D_t = D_t F_v(xi) over an algebra basis.

    Frame coordinates are carried along by the frame flow, so Ad(Phi_t) is the
    identity on the algebra basis; D_t is d(phi_t) on E_u in the orthonormal bases.
    """
    G = _as_matrix(v)
    est = estimator or LoopEstimator(space, bundle)
    if t == 0:
        return 0.0
    F0 = F0 or curvature_morphism(space, bundle, G, h, est)
    Du, _, Gt = leaf_differential(est, G, t)
    Ft = curvature_morphism(space, bundle, Gt, h, est)
    num, den = 0.0, 0.0
    for k in range(F0.matrix.shape[1]):
        lhs = Ft.apply(k) @ Du
        rhs = Du @ F0.apply(k)
        num = max(num, float(np.linalg.norm(lhs - rhs, 2)))
        den = max(den, float(np.linalg.norm(rhs, 2)))
    return num / den if den > 0 else num


@dataclass
class RankSurvey:
    ranks: list
    constant: bool
    expected: int | None = None


def rank_survey(space: ModelSpace, bundle, points: Sequence, h: float = H_DEFAULT,
                workers: int = 1) -> RankSurvey:
    est = LoopEstimator(space, bundle)
    ranks = [curvature_morphism(space, bundle, p, h, est, workers).rank for p in points]
    return RankSurvey(ranks, len(set(ranks)) <= 1)


def homothetical_detector(F: CurvatureMorphism, tol: float = 1e-6) -> tuple[bool, float, bool]:
    """Is every F(xi) a multiple of the identity? Returns (verdict, residual, flat flag)."""
    m = F.m
    worst = 0.0
    scale = float(np.max(np.abs(F.matrix))) if F.matrix.size else 0.0
    for k in range(F.matrix.shape[1]):
        A = F.apply(k)
        worst = max(worst, float(np.linalg.norm(A - np.trace(A) / m * np.eye(m), 2)))
    flat = scale < RANK_ATOL
    rel = worst / scale if scale > 0 else 0.0
    return rel < tol, rel, flat


def line_bundle_ratio(space: ModelSpace, flow: LineBundleFlow, v, h: float = H_DEFAULT) -> tuple[float, float]:
    """Measured omega/d(lambda) on a pair (xi+_1, xi-_1) with nonzero pairing; returns (ratio, pairing)."""
    G = _as_matrix(v)
    est = LoopEstimator(space, flow)
    m = space.n - 1
    e = est.estimate(G, ("u", np.eye(m)[0]), ("s", np.eye(m)[0]), h)
    Bu, Bs = est.charts.basis(G, "u"), est.charts.basis(G, "s")
    dl = frame_pairing(Bu[:, 0], Bs[:, 0])
    return float(e.value[0, 0] / dl), dl


__all__ = [
    "BundleFlow", "FrameBundle", "UnstableBundle", "FlatFlow", "LineBundleFlow", "make_flat_flow",
    "make_line_bundle_flow", "CurvatureEstimate", "LoopEstimator", "parallelogram_curvature",
    "DynConnection", "CurvatureMorphism", "curvature_morphism", "inclusion_morphism",
    "check_structural_identities", "check_equivariance", "rank_survey", "RankSurvey",
    "homothetical_detector", "line_bundle_ratio", "IdentityReport", "numerical_rank",
    "leaf_differential",
]
