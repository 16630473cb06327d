"""Dynamical parallel transport along stable, center and unstable leaves.

Leaf charts. On hyperbolic space the stable (unstable) leaf of a frame G is the
orbit G N_s (G N_u) of the horospherical subgroup exp(span U^+) (exp(span U^-));
a frame moved this way is already the dynamically transported frame. On a
perturbed space the same is true once the forward (backward) orbit has left the
perturbation support, so a leaf move is: flow out to the exterior, move along
the horosphere there, flow back. The displacement ``y`` is expressed in the
Sasaki-orthonormal basis of E_s (E_u) at the starting frame, so that ``y`` is the
initial velocity of the leaf curve.

The limits Pi_t = Phi_{-t} o tau o Phi_t are evaluated on relative frames
K_t = G_v(t)^{-1} G_w(t), which stay O(1) while the frames themselves grow like
e^t. Once both orbits are outside the support, K_t is propagated in closed form
after projecting it onto the stable horospherical group (removing integrator noise
in the expanding directions, which would otherwise be amplified by e^t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ContractViolation, ConvergenceError, LogBranchError
from .flows import (
    boost,
    exact_graph,
    graph_basis,
    hyperbolic_jacobi,
    lc_transport_rel,
    propagate,
    symplectic_inverse,
    exterior_time,
)
from .geometry import FramePoint, ModelSpace, PhasePoint, complete_frame, lorentz_inverse
from .liealg import (
    AlgElement,
    conformal_containment,
    invariant_inner_product,
    lie_closure,
    logm,
    GrpElement,
)

SQRT2 = np.sqrt(2.0)
LEAF_TOL = 1e-7
CSU_TOL = 1e-12
HOL_TOL = 1e-8
T_STEP = 0.5
T_MAX = 40.0
TWIST = 0.05
BUNDLES = ("Frame", "E_u", "E_s")


# ---------------------------------------------------------------------------
# horospherical algebra in closed form
# ---------------------------------------------------------------------------


def horo(c: np.ndarray, kind: str) -> np.ndarray:
    """exp(sum_k c_k U_k^+) for kind 's', exp(sum_k c_k U_k^-) for kind 'u' (Y^3 = 0)."""
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    N = m + 2
    Y = np.zeros((N, N))
    if kind == "s":
        Y[0, 2:] = -c
        Y[1, 2:] = -c
        Y[2:, 0] = -c
        Y[2:, 1] = c
    elif kind == "u":
        Y[0, 2:] = -c
        Y[1, 2:] = c
        Y[2:, 0] = -c
        Y[2:, 1] = -c
    else:
        raise ContractViolation(f"leaf kind must be 's' or 'u', got {kind!r}")
    return np.eye(N) + Y + 0.5 * (Y @ Y)


def leaf_generator_coefficients(y: np.ndarray) -> np.ndarray:
    """Sasaki-unit leaf coordinates y to coefficients c of U^+- (Y = -sum y U / sqrt 2)."""
    return -np.asarray(y, dtype=float) / SQRT2


@dataclass(frozen=True)
class CsuCoordinates:
    """g = horo(cs,'s') exp(tau X) horo(cu,'u') m."""

    cs: np.ndarray
    tau: float
    cu: np.ndarray
    m: np.ndarray


def csu_decompose(g: np.ndarray) -> CsuCoordinates:
    """Closed-form (stable, center, unstable, rotation) coordinates of g in SO0(1,n).

    Uses the null vectors l+- = e_0 +- e_1: N_s fixes l+, N_u fixes l-, and
    exp(tau X) scales them by e^{+-tau}. Defined on the open set where g l- has a
    positive l- component.
    """
    g = np.asarray(g, dtype=float)
    N = g.shape[0]
    lm = np.zeros(N)
    lm[0], lm[1] = 1.0, -1.0
    lp = np.zeros(N)
    lp[0], lp[1] = 1.0, 1.0
    L = g @ lm
    alpha = 0.5 * (L[0] - L[1])
    if alpha <= 0:
        raise ConvergenceError("frames outside the horospherical product chart")
    tau = -np.log(alpha)
    cs = -L[2:] / (2.0 * alpha)
    h = horo(cs, "s") @ boost(tau, N)
    r = lorentz_inverse(h) @ g
    Lp = r @ lp
    cu = -Lp[2:] / 2.0
    mm = lorentz_inverse(horo(cu, "u")) @ r
    return CsuCoordinates(cs, float(tau), cu, mm[2:, 2:].copy())


# ---------------------------------------------------------------------------
# leaf charts
# ---------------------------------------------------------------------------


@dataclass
class _GraphData:
    S: np.ndarray
    T: float
    Phi: np.ndarray
    GT: np.ndarray
    basis: np.ndarray


class LeafCharts:
    """Stable/unstable leaf moves with a small cache of exterior data per frame."""

    def __init__(self, space: ModelSpace, margin: float = 0.5, cache_size: int = 256):
        self.space = space
        self.margin = margin
        self._cache: dict = {}
        self._cache_size = cache_size

    def graph(self, G: np.ndarray, kind: str) -> _GraphData:
        key = (kind, np.asarray(G).tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        S, T, Phi, GT = exact_graph(self.space, G, kind, self.margin)
        data = _GraphData(S, T, Phi, GT, graph_basis(S))
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = data
        return data

    def basis(self, G: np.ndarray, kind: str) -> np.ndarray:
        """Sasaki-orthonormal basis of E_s ('s') or E_u ('u') at G, stacked (J, J')."""
        return self.graph(G, kind).basis

    def exterior_coefficients(self, G: np.ndarray, y: np.ndarray, kind: str) -> tuple[np.ndarray, _GraphData]:
        d = self.graph(G, kind)
        m = self.space.n - 1
        vec = d.Phi @ (d.basis @ np.asarray(y, dtype=float))
        z = SQRT2 * vec[:m]  # exterior unit basis (e_a, -+e_a)/sqrt2
        return leaf_generator_coefficients(z), d

    def move(self, G: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
        """Frame obtained by moving G along its stable/unstable leaf by y."""
        G = np.asarray(G, dtype=float)
        y = np.asarray(y, dtype=float)
        if not np.any(y):
            return G.copy()
        if self.space.is_hyperbolic:
            return G @ horo(leaf_generator_coefficients(y), kind)
        c, d = self.exterior_coefficients(G, y, kind)
        moved = d.GT @ horo(c, kind)
        sgn = 1.0 if kind == "s" else -1.0
        if not _stays_outside(self.space, moved, sgn):
            extra = exterior_time(self.space, moved, sgn)
            moved = propagate(self.space, moved, sgn * extra).G
            back = propagate(self.space, moved, -(d.T + sgn * extra)).G
            return back
        return propagate(self.space, moved, -d.T).G

    def leaf_length(self, G: np.ndarray, y: np.ndarray, kind: str, nodes: int = 6) -> float:
        """Sasaki arclength of s -> move(G, s y), s in [0, 1], by Gauss-Legendre quadrature."""
        y = np.asarray(y, dtype=float)
        if self.space.is_hyperbolic or not np.any(y):
            return float(np.linalg.norm(y))
        c, d = self.exterior_coefficients(G, y, kind)
        z = -SQRT2 * c
        sgn = 1.0 if kind == "s" else -1.0
        vel = np.concatenate([z, -sgn * z]) / SQRT2
        xs, ws = np.polynomial.legendre.leggauss(nodes)
        total = 0.0
        for xi, wi in zip(xs, ws):
            s = 0.5 * (xi + 1.0)
            Gs = d.GT @ horo(s * c, kind)
            back = propagate(self.space, Gs, -d.T, with_jacobi=True)
            total += 0.5 * wi * float(np.linalg.norm(back.Phi @ vel))
        return total


def _stays_outside(space: ModelSpace, G: np.ndarray, sgn: float) -> bool:
    from .flows import _entry_time

    if space.is_hyperbolic:
        return True
    return G[0, 0] >= space.support_level and _entry_time(G, sgn, space.support_level) is None


# ---------------------------------------------------------------------------
# csu paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Leg:
    kind: str  # 's', 'c' or 'u'
    start: np.ndarray  # frame matrices
    end: np.ndarray
    param: np.ndarray  # leaf displacement (Sasaki-unit basis) or [tau]

    @property
    def label(self) -> str:
        return {"s": "stable", "c": "center", "u": "unstable"}[self.kind]


@dataclass
class CsuPath:
    legs: list = field(default_factory=list)
    closed: bool = False
    residual: float = 0.0

    @property
    def start(self) -> np.ndarray | None:
        return self.legs[0].start if self.legs else None

    @property
    def end(self) -> np.ndarray | None:
        return self.legs[-1].end if self.legs else None

    def __len__(self) -> int:
        return len(self.legs)

    def center_time(self) -> float:
        return float(sum(l.param[0] for l in self.legs if l.kind == "c"))

    def reversed(self, charts: "LeafCharts") -> "CsuPath":
        """The same path traversed backwards (legs recomputed from their end frames)."""
        out = []
        for leg in reversed(self.legs):
            if leg.kind == "c":
                tau = -leg.param[0]
                end = propagate(charts.space, leg.end, tau).G
                out.append(Leg("c", leg.end, end, np.array([tau])))
            else:
                # the leaf is flat: moving back by the chart inverse returns to start's phase point
                out.append(Leg(leg.kind, leg.end, leg.start, -leg.param))
        return CsuPath(out, self.closed)


def build_path(charts: LeafCharts, G0: np.ndarray, steps: Sequence[tuple]) -> CsuPath:
    """Concatenate legs ('s', y), ('c', tau), ('u', y) starting from the frame G0."""
    G = np.asarray(G0, dtype=float)
    legs = []
    for kind, p in steps:
        if kind == "c":
            tau = float(np.atleast_1d(p)[0])
            Gn = propagate(charts.space, G, tau).G if tau != 0 else G.copy()
            legs.append(Leg("c", G, Gn, np.array([tau])))
        else:
            y = np.asarray(p, dtype=float)
            Gn = charts.move(G, y, kind)
            legs.append(Leg(kind, G, Gn, y))
        G = Gn
    return CsuPath(legs)


def _as_matrix(f) -> np.ndarray:
    if isinstance(f, FramePoint):
        return f.mat
    if isinstance(f, PhasePoint):
        return complete_frame(f).mat
    return np.asarray(f, dtype=float)


def _phase_residual(Gw: np.ndarray, G: np.ndarray) -> np.ndarray:
    K = lorentz_inverse(Gw) @ G
    return np.concatenate([K[1:, 0], K[2:, 1]])


class CsuSolver:
    """Solve for (y_s, tau, y_u) connecting v to w by stable, center and unstable legs.

    The mismatch is measured in the closed-form hyperbolic coordinates of
    G_end^{-1} G_w, which vanish exactly when the phase points agree. On a perturbed
    space that map is a small deformation of minus the identity in the unknowns, so
    Broyden iteration started from -I converges in a handful of steps.
    """

    def __init__(self, charts: LeafCharts, tol: float = CSU_TOL, max_iter: int = 40):
        self.charts = charts
        self.tol = tol
        self.max_iter = max_iter

    def _endpoint(self, Gv, p):
        m = self.charts.space.n - 1
        G1 = self.charts.move(Gv, p[:m], "s")
        G2 = propagate(self.charts.space, G1, p[m]).G if p[m] != 0 else G1
        return self.charts.move(G2, p[m + 1:], "u")

    @staticmethod
    def initial_guess(Gv, Gw) -> np.ndarray:
        d = csu_decompose(lorentz_inverse(Gv) @ Gw)
        return np.concatenate([-SQRT2 * d.cs, [d.tau], -SQRT2 * d.cu])

    def solve(self, v, w) -> CsuPath:
        Gv, Gw = _as_matrix(v), _as_matrix(w)
        m = self.charts.space.n - 1
        if np.max(np.abs(_phase_residual(Gw, Gv))) == 0.0:
            return CsuPath([], closed=False, residual=0.0)
        p = self.initial_guess(Gv, Gw)
        if not self.charts.space.is_hyperbolic:
            p = self._broyden(Gv, Gw, p)
        path = build_path(self.charts, Gv, [("s", p[:m]), ("c", p[m]), ("u", p[m + 1:])])
        path.residual = float(np.max(np.abs(_phase_residual(Gw, path.end))))
        return path

    def _broyden(self, Gv, Gw, p):
        k = p.shape[0]
        Binv = -np.eye(k)
        q = self.initial_guess(self._endpoint(Gv, p), Gw)
        for _ in range(self.max_iter):
            if np.max(np.abs(q)) < self.tol:
                return p
            dp = -Binv @ q
            p = p + dp
            q_new = self.initial_guess(self._endpoint(Gv, p), Gw)
            dq = q_new - q
            denom = dp @ (Binv @ dq)
            if abs(denom) > 1e-300:
                Binv = Binv + np.outer(dp - Binv @ dq, dp @ Binv) / denom
            q = q_new
        raise ConvergenceError("outside product chart: csu iteration did not converge",
                               residual=float(np.max(np.abs(q))))


def csu_connect(space: ModelSpace, v, w, charts: LeafCharts | None = None, tol: float = CSU_TOL) -> CsuPath:
    """Three-leg path (stable, center, unstable) from v to the phase point of w."""
    charts = charts or LeafCharts(space)
    return CsuSolver(charts, tol=tol).solve(v, w)


# ---------------------------------------------------------------------------
# holonomy elements
# ---------------------------------------------------------------------------


@dataclass
class HolonomyElement:
    """Fiber map in frame coordinates (source: frame at start, target: frame at end)."""

    map: np.ndarray
    bundle: str
    path: CsuPath | None = None
    T_used: float = 0.0
    last_increment: float = 0.0
    rate: float = float("nan")
    trace: list = field(default_factory=list)

    def compose(self, first: "HolonomyElement") -> "HolonomyElement":
        """self o first."""
        return HolonomyElement(self.map @ first.map, self.bundle)


def _twist_rotation(normals_coords: np.ndarray, theta: float) -> np.ndarray:
    """Rotation by theta in the plane spanned by the columns of ``normals_coords``."""
    m = normals_coords.shape[0]
    a1 = normals_coords[:, 0]
    a2 = normals_coords[:, 1]
    n1 = a1 / np.linalg.norm(a1)
    a2 = a2 - (a2 @ n1) * n1
    n2 = a2 / np.linalg.norm(a2)
    return (np.eye(m) + np.sin(theta) * (np.outer(n2, n1) - np.outer(n1, n2))
            + (np.cos(theta) - 1.0) * (np.outer(n1, n1) + np.outer(n2, n2)))


@dataclass(frozen=True)
class AuxConnection:
    """An auxiliary connection on the normal frame bundle used inside the limit.

    ``kind='lc'``: Levi-Civita transport of the background metric (exact on the
    exterior region). ``kind='twisted'``: Levi-Civita followed by a rotation of the
    target normal space by angle kappa * <x_w - x_v, v_v> in the plane spanned by
    the projections of two fixed ambient vectors. Both are smooth, equivariant and
    agree with the identity at v = w.
    """

    kind: str = "lc"
    kappa: float = TWIST

    def rel_map(self, K: np.ndarray, Gw: np.ndarray) -> np.ndarray:
        """Fiber map (frame coordinates) of transport from G_v to the phase point of G_w = G_v K."""
        Tr = lc_transport_rel(K)
        m_lc = (lorentz_inverse(K) @ Tr)[2:, 2:]
        if self.kind == "lc":
            return m_lc
        if self.kind != "twisted":
            raise ContractViolation(f"unknown auxiliary connection {self.kind!r}")
        theta = self.kappa * K[1, 0]
        N = Gw.shape[0]
        c = np.zeros((N, 2))
        c[N - 2, 0] = 1.0
        c[N - 1, 1] = 1.0
        c[1, 1] = 0.5
        coords = Gw[:, 2:].T @ c  # spatial entries; the time row is zero in c
        return _twist_rotation(coords, theta) @ m_lc


def _relative_exterior(K0: np.ndarray, sgn: float):
    """Project K0 onto the leaf group (N_s M for sgn>0, N_u M for sgn<0); report the residual."""
    N = K0.shape[0]
    if sgn > 0:
        d = csu_decompose(K0)
        resid = abs(d.tau) + float(np.linalg.norm(d.cu))
        Mfull = np.eye(N)
        Mfull[2:, 2:] = d.m
        # K0 ~ horo(cs) exp(tau X) horo(cu) m; on the leaf tau = cu = 0
        return ("s", d.cs, Mfull), resid
    # conjugation by Q = diag(1, -1, 1, ..., 1) swaps N_s and N_u and reverses X
    Q = np.eye(N)
    Q[1, 1] = -1.0
    d = csu_decompose(Q @ K0 @ Q)
    resid = abs(d.tau) + float(np.linalg.norm(d.cu))
    Mfull = np.eye(N)
    Mfull[2:, 2:] = d.m
    return ("u", d.cs, Mfull), resid


def _rel_at(proj, s: float, sgn: float) -> np.ndarray:
    """K_t for t = T0 + s (sgn>0) or T0 - s (sgn<0) from the projected exterior data."""
    kind, c, Mfull = proj
    N = Mfull.shape[0]
    if kind == "s":
        return horo(c * np.exp(-s), "s") @ Mfull
    Q = np.eye(N)
    Q[1, 1] = -1.0
    return Q @ horo(c * np.exp(-s), "s") @ Mfull @ Q


def _fit_rate(ts: Sequence[float], incs: Sequence[float]) -> float:
    ts = np.asarray(ts, dtype=float)
    incs = np.asarray(incs, dtype=float)
    mask = incs > 1e-13
    if mask.sum() < 3:
        return float("inf")
    slope, _ = np.polyfit(ts[mask], np.log(incs[mask]), 1)
    return float(-slope)


def _leaf_limit(space: ModelSpace, bundle: str, Gv: np.ndarray, Gw: np.ndarray, sgn: float,
                T_max: float, tol: float, step: float, connection: AuxConnection,
                charts: LeafCharts) -> HolonomyElement:
    if bundle not in BUNDLES:
        raise ContractViolation(f"bundle must be one of {BUNDLES}")
    m = space.n - 1
    # exterior time for both orbits
    T0 = max(exterior_time(space, Gv, sgn), exterior_time(space, Gw, sgn))
    T0 = float(np.ceil(T0 / step) * step) if T0 > 0 else 0.0
    rv = propagate(space, Gv, sgn * T0, with_jacobi=True)
    rw = propagate(space, Gw, sgn * T0, with_jacobi=True)
    K0 = lorentz_inverse(rv.G) @ rw.G
    proj, resid = _relative_exterior(K0, sgn)
    if resid > LEAF_TOL:
        raise ContractViolation("w is not on the leaf of v", leaf_residual=resid)

    vector_bundle = bundle != "Frame"
    if vector_bundle:
        kind_e = "s" if bundle == "E_s" else "u"
        Bv = charts.basis(Gv, kind_e)
        Bw_all = np.hstack([charts.basis(Gw, "s"), charts.basis(Gw, "u")])
        col = slice(0, m) if kind_e == "s" else slice(m, 2 * m)

    def frames_at(t):
        """(K_t, Gw_t, Phi_v(t), Phi_w(t)) at time t (unsigned, along sgn)."""
        if t <= T0 + 1e-12:
            a = propagate(space, Gv, sgn * t, with_jacobi=vector_bundle)
            b = propagate(space, Gw, sgn * t, with_jacobi=vector_bundle)
            return lorentz_inverse(a.G) @ b.G, b.G, a.Phi, b.Phi
        s = t - T0
        K = _rel_at(proj, s, sgn)
        Gwt = rw.G @ boost(sgn * s, space.n + 1)
        if vector_bundle:
            H = hyperbolic_jacobi(sgn * s, m)
            return K, Gwt, H @ rv.Phi, H @ rw.Phi
        return K, Gwt, None, None

    def pi_at(t):
        K, Gwt, Pv, Pw = frames_at(t)
        mt = connection.rel_map(K, Gwt)
        if not vector_bundle:
            return mt
        Mt = np.zeros((2 * m, 2 * m))
        Mt[:m, :m] = mt
        Mt[m:, m:] = mt
        vec = symplectic_inverse(Pw) @ (Mt @ (Pv @ Bv))
        coef = np.linalg.solve(Bw_all, vec)
        return coef[col]

    ts, incs, trace = [], [], []
    prev = pi_at(0.0)
    t = 0.0
    inc = np.inf
    while t < T_max - 1e-12:
        t += step
        cur = pi_at(t)
        inc = float(np.linalg.norm(cur - prev, 2))
        ts.append(t)
        incs.append(inc)
        trace.append((t, inc))
        prev = cur
        if inc < tol and t >= T0:
            return HolonomyElement(cur, bundle, None, t, inc, _fit_rate(ts, incs), trace)
    raise ConvergenceError("fiber bunching violated or T_max too small", last_increment=inc,
                           rate=_fit_rate(ts, incs), T_max=T_max)


def stable_holonomy(space: ModelSpace, bundle: str, v, w, T_max: float = T_MAX, tol: float = HOL_TOL,
                    step: float = T_STEP, connection: AuxConnection | None = None,
                    charts: LeafCharts | None = None) -> HolonomyElement:
    """Pi^s_{v->w} = lim Phi_{-t} o tau_{phi_t v -> phi_t w} o Phi_t, w on the stable leaf of v.

    The result is expressed in the frames of v and w: for the frame bundle it is the
    rotation m with Pi(F_v) = F_w m; for E_s/E_u it is the matrix between the
    Sasaki-orthonormal bases at v and w.
    """
    Gv, Gw = _as_matrix(v), _as_matrix(w)
    return _leaf_limit(space, bundle, Gv, Gw, 1.0, T_max, tol, step, connection or AuxConnection(),
                       charts or LeafCharts(space))


def unstable_holonomy(space: ModelSpace, bundle: str, v, w, T_max: float = T_MAX, tol: float = HOL_TOL,
                      step: float = T_STEP, connection: AuxConnection | None = None,
                      charts: LeafCharts | None = None) -> HolonomyElement:
    """Time-reversed version of ``stable_holonomy`` for w on the unstable leaf of v."""
    Gv, Gw = _as_matrix(v), _as_matrix(w)
    return _leaf_limit(space, bundle, Gv, Gw, -1.0, T_max, tol, step, connection or AuxConnection(),
                       charts or LeafCharts(space))


def lc_fiber_map(v, w) -> np.ndarray:
    """Direct background Levi-Civita transport v -> w in frame coordinates."""
    Gv, Gw = _as_matrix(v), _as_matrix(w)
    K = lorentz_inverse(Gv) @ Gw
    return (lorentz_inverse(K) @ lc_transport_rel(K))[2:, 2:]


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------


def _frame_loop_map(path: CsuPath) -> np.ndarray:
    K = lorentz_inverse(path.start) @ path.end
    return K[2:, 2:]


def _vector_leg_map(space, bundle, leg: Leg, charts: LeafCharts) -> np.ndarray:
    m = space.n - 1
    kind_e = "s" if bundle == "E_s" else "u"
    if leg.kind == "c":
        if space.is_hyperbolic:
            tau = leg.param[0]
            return np.exp(tau if kind_e == "u" else -tau) * np.eye(m)
        res = propagate(space, leg.start, leg.param[0], with_jacobi=True)
        Bs = charts.basis(leg.start, kind_e)
        Be = charts.basis(leg.end, kind_e)
        coef, *_ = np.linalg.lstsq(Be, res.Phi @ Bs, rcond=None)
        return coef
    if space.is_hyperbolic:
        return np.eye(m)
    fn = stable_holonomy if leg.kind == "s" else unstable_holonomy
    return fn(space, bundle, leg.start, leg.end, charts=charts).map


def loop_holonomy(space: ModelSpace, bundle: str, loop: CsuPath, charts: LeafCharts | None = None) -> HolonomyElement:
    """Holonomy of a closed csu path, acting on the fiber at its base point.

    For the frame bundle the legs already carry dynamically transported frames, so
    the holonomy is the rotation relating the final frame to the initial one. For
    E_u/E_s the leg maps are composed in the Sasaki-orthonormal bases.
    """
    if not loop.legs:
        m = space.n - 1
        return HolonomyElement(np.eye(m), bundle, loop)
    res = float(np.max(np.abs(_phase_residual(loop.start, loop.end))))
    if res > 1e-8:
        raise ContractViolation("path is not closed", residual=res)
    if bundle == "Frame":
        return HolonomyElement(_frame_loop_map(loop), bundle, loop)
    if bundle not in ("E_u", "E_s"):
        raise ContractViolation(f"unknown bundle {bundle!r}")
    if space.is_hyperbolic:
        return HolonomyElement(_hyperbolic_vector_hol(loop, bundle), bundle, loop)
    charts = charts or LeafCharts(space)
    m = space.n - 1
    M = np.eye(m)
    for leg in loop.legs:
        M = _vector_leg_map(space, bundle, leg, charts) @ M
    # the final frame differs from the initial one by a rotation; re-express in the initial basis
    R = _frame_loop_map(loop)
    Bend = charts.basis(loop.end, "s" if bundle == "E_s" else "u")
    Bstart = charts.basis(loop.start, "s" if bundle == "E_s" else "u")
    Mfull = np.zeros((2 * m, 2 * m))
    Mfull[:m, :m] = R
    Mfull[m:, m:] = R
    coef, *_ = np.linalg.lstsq(Bstart, Mfull @ Bend, rcond=None)
    return HolonomyElement(coef @ M, bundle, loop)


def _hyperbolic_vector_hol(loop: CsuPath, bundle: str) -> np.ndarray:
    tau = loop.center_time()
    scale = np.exp(tau if bundle == "E_u" else -tau)
    return scale * _frame_loop_map(loop)


def close_loop(charts: LeafCharts, open_path: CsuPath, solver: CsuSolver | None = None) -> CsuPath:
    """Append the csu path from the end of ``open_path`` back to its start's phase point."""
    solver = solver or CsuSolver(charts)
    closing = solver.solve(open_path.end, open_path.start)
    return CsuPath(open_path.legs + closing.legs, closed=True, residual=closing.residual)


def quadrilateral(charts: LeafCharts, G0: np.ndarray, steps: Sequence[tuple], solver: CsuSolver | None = None) -> CsuPath:
    return close_loop(charts, build_path(charts, G0, steps), solver)


# ---------------------------------------------------------------------------
# holonomy group estimation
# ---------------------------------------------------------------------------


@dataclass
class GroupEstimate:
    dim: int
    algebra_basis: list
    conformal: bool | None = None
    conformal_residual: float | None = None
    metric: np.ndarray | None = None
    loops: list = field(default_factory=list)  # per-loop rows
    retries: int = 0


def _random_loop(charts, G0, rng, scale, solver):
    m = charts.space.n - 1
    steps = [(k, rng.uniform(-scale, scale, m)) for k in ("s", "u", "s", "u")]
    return quadrilateral(charts, G0, steps, solver)


def holonomy_group_estimate(space: ModelSpace, bundle: str, v, num_loops: int = 12, loop_scale: float = 0.3,
                            seed: int = 0, workers: int = 1, conformal_tol: float = 1e-6) -> GroupEstimate:
    """Sample random s-u-s-u loops at v, take logs of holonomies and close them under brackets.

    For the E_u bundle the holonomies are normalised to unit determinant before the
    logarithm (the scale part is a homothety) and a conformal-invariance verdict is
    computed from the raw sample.
    """
    G0 = _as_matrix(v)
    charts = LeafCharts(space)
    solver = CsuSolver(charts)
    m = space.n - 1
    scale = loop_scale
    retries = 0
    ss = np.random.SeedSequence(seed)
    seeds = ss.spawn(num_loops)
    while True:
        try:
            rows, logs, sample = [], [], []

            def one(i):
                rng = np.random.default_rng(seeds[i])
                loop = _random_loop(charts, G0, rng, scale, solver)
                H = loop_holonomy(space, bundle, loop, charts)
                Hm = H.map
                if bundle == "Frame":
                    L = logm(GrpElement(Hm, f"SO({m})")).mat
                else:
                    det = np.linalg.det(Hm)
                    L = logm(GrpElement(Hm / abs(det) ** (1.0 / m), f"GL({m})")).mat
                return i, Hm, L, loop.center_time()

            results = _parallel_map(one, range(num_loops), workers)
            for i, Hm, L, tau in sorted(results, key=lambda r: r[0]):
                sample.append(Hm)
                logs.append(L)
                rows.append({"loop": i, "scale": scale, "log_norm": float(np.linalg.norm(L)),
                             "center_time": tau})
            break
        except LogBranchError:
            retries += 1
            if retries > 5:
                raise
            scale *= 0.5
    closure = lie_closure(logs)
    est = GroupEstimate(closure.dim, [AlgElement(b, f"gl({m})") for b in closure.basis], loops=rows, retries=retries)
    if bundle != "Frame":
        normed = [H / abs(np.linalg.det(H)) ** (1.0 / m) for H in sample]
        h = invariant_inner_product(normed)
        if h is None:
            est.conformal, est.conformal_residual = False, float("inf")
        else:
            ok, res = conformal_containment(sample, h, conformal_tol)
            est.conformal, est.conformal_residual, est.metric = ok, res, h
    return est


def _parallel_map(fn: Callable, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# uniform bound
# ---------------------------------------------------------------------------


@dataclass
class UniformBoundFit:
    d_s: list
    deviations: list
    ratios: list
    C: float
    spread: float  # max/min ratio - 1


def uniform_bound(space: ModelSpace, v, direction: np.ndarray, d_values: Sequence[float] = (0.05, 0.1, 0.2),
                  connection: AuxConnection | None = None) -> UniformBoundFit:
    """Fit C in ||Pi^s_{v->w} - tau_{v->w}|| <= C d_s(v, w) along one stable direction."""
    G0 = _as_matrix(v)
    charts = LeafCharts(space)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    ds_list, devs, ratios = [], [], []
    for d in d_values:
        y = d * direction
        Gw = charts.move(G0, y, "s")
        ds = charts.leaf_length(G0, y, "s")
        Pi = stable_holonomy(space, "Frame", G0, Gw, connection=connection, charts=charts).map
        dev = float(np.linalg.norm(Pi - lc_fiber_map(G0, Gw), 2))
        ds_list.append(ds)
        devs.append(dev)
        ratios.append(dev / ds)
    r = np.asarray(ratios)
    spread = float(r.max() / r.min() - 1.0) if r.min() > 0 else float("inf")
    return UniformBoundFit(ds_list, devs, ratios, float(r.max()), spread)
