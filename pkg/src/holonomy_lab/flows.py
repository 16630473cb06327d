"""Geodesic flow, frame flow, Jacobi fields and the stable/unstable splitting.

Frames are Lorentz matrices G = (x, v, e_2, ..., e_n) normalised for the background
hyperbolic metric (see ``geometry``). With the conformal factor e^{2u} the frame
flow, i.e. the geodesic flow together with parallel transport of the normal frame,
solves

    dG/dt = e^{-u(x)} G (X + W),   W = sum_b du(e_b) (E_{b,1} - E_{1,b}),

in arclength time t of the model metric. Outside the perturbation support u = 0
and the solution is G exp(tX); entry and exit times of the support are obtained in
closed form or by event detection, so only the interior part is integrated.

Jacobi fields are stored in the unit parallel frame e^{-u} e_2, ..., e^{-u} e_n as
stacked vectors (J, J'), and the 2(n-1) x 2(n-1) matrix ``Phi`` is the
differential of the geodesic flow on the normal part of T(SM).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from . import ConvergenceError
from .geometry import FramePoint, ModelSpace, PhasePoint, complete_frame, mink
from .liealg import minkowski

RTOL = 1e-10
ATOL = 1e-10
SUBSPACE_TOL = 1e-9
T_STEP = 0.5
T_MAX = 40.0


# ---------------------------------------------------------------------------
# closed-form pieces
# ---------------------------------------------------------------------------


def boost(t: float, N: int) -> np.ndarray:
    """exp(tX) in SO0(1, N-1)."""
    B = np.eye(N)
    c, s = np.cosh(t), np.sinh(t)
    B[0, 0] = B[1, 1] = c
    B[0, 1] = B[1, 0] = s
    return B


def hyperbolic_jacobi(t: float, m: int) -> np.ndarray:
    """Jacobi propagator in constant curvature -1: [[cosh, sinh], [sinh, cosh]] (x) I."""
    c, s = np.cosh(t), np.sinh(t)
    I = np.eye(m)
    return np.block([[c * I, s * I], [s * I, c * I]])


def symplectic_inverse(P: np.ndarray) -> np.ndarray:
    """Inverse of a symplectic matrix [[A, B], [C, D]]: [[D^T, -B^T], [-C^T, A^T]]."""
    m = P.shape[0] // 2
    A, B, C, D = P[:m, :m], P[:m, m:], P[m:, :m], P[m:, m:]
    return np.block([[D.T, -B.T], [-C.T, A.T]])


def wronskian_form(m: int) -> np.ndarray:
    I = np.eye(m)
    Z = np.zeros((m, m))
    return np.block([[Z, I], [-I, Z]])


def reproject(G: np.ndarray) -> np.ndarray:
    """Nearest-frame correction: Lorentz Gram-Schmidt of the columns of G."""
    N = G.shape[0]
    J = minkowski(N - 1)
    out = np.empty_like(G)
    for k in range(N):
        w = G[:, k].copy()
        for j in range(k):
            w -= (out[:, j] @ J @ w) * J[j, j] * out[:, j]
        nrm = w @ J @ w
        out[:, k] = w / np.sqrt(abs(nrm))
    return out


def _entry_time(G: np.ndarray, sgn: float, level: float) -> float | None:
    """First tau >= 0 at which x_0(tau) = level along the background geodesic, if any."""
    A, B = G[0, 0], sgn * G[0, 1]
    if B >= 0:
        return None
    R2 = A * A - B * B
    R = np.sqrt(max(R2, 1.0))
    if R >= level:
        return None
    tstar = np.arctanh(-B / A)
    te = tstar - np.arccosh(level / R)
    return max(te, 0.0)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


@dataclass
class FlowResult:
    """End state of a frame-flow propagation."""

    G: np.ndarray
    Phi: np.ndarray | None
    t: float
    exterior: bool  # the orbit is outside the support from the end time on
    nfev: int = 0
    err: float = 0.0


def _rhs_factory(space: ModelSpace, N: int, with_jacobi: bool):
    m = N - 2

    def rhs(t, y):
        G = y[: N * N].reshape(N, N)
        x = G[:, 0]
        val, grad, _ = space.jet(x, 1)
        e = np.exp(-val)
        w = grad @ G[:, 2:]  # du(e_b)
        dG = np.empty((N, N))
        dG[:, 0] = G[:, 1]
        dG[:, 1] = G[:, 0] + G[:, 2:] @ w
        dG[:, 2:] = -np.outer(G[:, 1], w)
        dG *= e
        if not with_jacobi:
            return dG.ravel()
        P = y[N * N:].reshape(2 * m, 2 * m)
        K = space.jacobi_matrix(G)
        dP = np.vstack([P[m:], -K @ P[:m]])
        return np.concatenate([dG.ravel(), dP.ravel()])

    return rhs


def propagate(
    space: ModelSpace,
    G: np.ndarray,
    t: float,
    with_jacobi: bool = False,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "RK45",
) -> FlowResult:
    """Frame flow (and optionally the Jacobi propagator) for signed time t."""
    G = np.array(G, dtype=float)
    N = G.shape[0]
    m = N - 2
    Phi = np.eye(2 * m) if with_jacobi else None
    if t == 0:
        return FlowResult(G, Phi, 0.0, _is_exterior(space, G, 1.0))
    sgn = 1.0 if t > 0 else -1.0
    if space.is_hyperbolic:
        Gt = G @ boost(t, N)
        return FlowResult(Gt, hyperbolic_jacobi(t, m) @ Phi if with_jacobi else None, t, True)
    level = space.support_level
    remaining = abs(t)
    nfev = 0
    rhs = _rhs_factory(space, N, with_jacobi)
    guard = 0
    while remaining > 0:
        guard += 1
        if guard > 6:
            raise ConvergenceError("propagation did not settle into the exterior region")
        if G[0, 0] >= level:
            te = _entry_time(G, sgn, level)
            step = remaining if te is None else min(te, remaining)
            if step > 0:
                G = G @ boost(sgn * step, N)
                if with_jacobi:
                    Phi = hyperbolic_jacobi(sgn * step, m) @ Phi
                remaining -= step
            if remaining <= 0 or te is None:
                break
            # now on the boundary moving inwards: integrate
        y0 = G.ravel() if not with_jacobi else np.concatenate([G.ravel(), np.eye(2 * m).ravel()])

        def exit_event(tt, y):
            return y[0] - level  # y[0] = G[0, 0] = x_0

        exit_event.terminal = True
        exit_event.direction = 1.0  # sign change along the integration order
        started_on_boundary = G[0, 0] >= level - 1e-13
        sol = solve_ivp(rhs, (0.0, sgn * remaining), y0, method=method, rtol=rtol, atol=atol,
                        events=exit_event)
        nfev += sol.nfev
        if sol.status < 0:
            raise ConvergenceError(f"integrator failure: {sol.message}")
        tau = abs(sol.t[-1])
        y = sol.y[:, -1]
        if sol.status == 1 and tau < 1e-12 and started_on_boundary:
            # spurious event at the start point; nudge by re-integrating without events
            sol = solve_ivp(rhs, (0.0, sgn * remaining), y0, method=method, rtol=rtol, atol=atol)
            nfev += sol.nfev
            tau = abs(sol.t[-1])
            y = sol.y[:, -1]
        Gn = reproject(y[: N * N].reshape(N, N))
        if with_jacobi:
            Phi = y[N * N:].reshape(2 * m, 2 * m) @ Phi
        G = Gn
        remaining -= tau
        if sol.status != 1:
            break
        # exited the support; lift x_0 onto the boundary level exactly is not needed
    return FlowResult(G, Phi, t, _is_exterior(space, G, sgn), nfev)


def integrate(space: ModelSpace, G: np.ndarray, t_eval: Sequence[float], with_jacobi: bool = True,
              rtol: float = RTOL, atol: float = ATOL, method: str = "DOP853") -> list[FlowResult]:
    """Pure ODE integration (no closed-form shortcuts) sampled at nonnegative times ``t_eval``.

    Used to validate the closed forms and the piecewise propagator.
    """
    G = np.array(G, dtype=float)
    N = G.shape[0]
    m = N - 2
    ts = np.asarray(sorted(t_eval), dtype=float)
    y0 = G.ravel() if not with_jacobi else np.concatenate([G.ravel(), np.eye(2 * m).ravel()])
    sol = solve_ivp(_rhs_factory(space, N, with_jacobi), (0.0, float(ts[-1])), y0, method=method,
                    rtol=rtol, atol=atol, t_eval=ts)
    if sol.status < 0:
        raise ConvergenceError(f"integrator failure: {sol.message}")
    out = []
    for k, t in enumerate(sol.t):
        y = sol.y[:, k]
        Phi = y[N * N:].reshape(2 * m, 2 * m) if with_jacobi else None
        out.append(FlowResult(y[: N * N].reshape(N, N), Phi, float(t), False, sol.nfev))
    return out


def _is_exterior(space: ModelSpace, G: np.ndarray, sgn: float) -> bool:
    if space.is_hyperbolic:
        return True
    return bool(G[0, 0] >= space.support_level - 1e-9 and sgn * G[0, 1] >= 0) or (
        G[0, 0] >= space.support_level and _entry_time(G, sgn, space.support_level) is None
    )


def exterior_time(space: ModelSpace, G: np.ndarray, sgn: float = 1.0, margin: float = 0.0) -> float:
    """Smallest time >= 0 after which the orbit stays outside the support (plus ``margin``)."""
    if space.is_hyperbolic:
        return 0.0
    G = np.asarray(G, dtype=float)
    level = space.support_level
    total = 0.0
    for _ in range(6):
        if G[0, 0] >= level:
            te = _entry_time(G, sgn, level)
            if te is None:
                return total + margin
            G = G @ boost(sgn * te, G.shape[0])
            total += te
        tau, G = _exit_after(space, G, sgn)
        total += tau
        if _entry_time(G, sgn, level) is None:
            return total + margin
    raise ConvergenceError("orbit does not leave the perturbation support")


def _exit_after(space: ModelSpace, G: np.ndarray, sgn: float):
    N = G.shape[0]
    level = space.support_level
    rhs = _rhs_factory(space, N, False)

    def ev(tt, y):
        return y[0] - level

    ev.terminal = True
    ev.direction = 1.0
    sol = solve_ivp(rhs, (0.0, sgn * 50.0), G.ravel(), rtol=RTOL, atol=ATOL, events=ev)
    if sol.status != 1:
        raise ConvergenceError("orbit trapped inside the perturbation support")
    return float(abs(sol.t[-1])), reproject(sol.y[:, -1].reshape(N, N))


# ---------------------------------------------------------------------------
# public propagators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobiState:
    """A normal Jacobi field (J, J') in unit parallel-frame coordinates."""

    J: np.ndarray
    dJ: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.J, self.dJ])


@dataclass(frozen=True)
class Propagation:
    start: FramePoint
    end: FramePoint
    t: float
    map: np.ndarray
    err: float = 0.0


def geodesic_flow(space: ModelSpace, p: PhasePoint, t: float) -> PhasePoint:
    F = complete_frame(p)
    return FramePoint(propagate(space, F.mat, t).G).phase


def frame_flow(space: ModelSpace, f: FramePoint, t: float) -> FramePoint:
    return FramePoint(propagate(space, f.mat, t).G)


def jacobi_propagate(space: ModelSpace, f: FramePoint, state: JacobiState, t: float) -> JacobiState:
    """Solve J'' + R(J, g')g' = 0 along the geodesic of ``f`` for time t."""
    res = propagate(space, f.mat, t, with_jacobi=True)
    y = res.Phi @ state.stacked()
    m = space.n - 1
    return JacobiState(y[:m], y[m:])


def flow_differential(space: ModelSpace, f: FramePoint, t: float) -> Propagation:
    """d(phi_t) on the normal part of T(SM) as a matrix in parallel frames."""
    res = propagate(space, f.mat, t, with_jacobi=True)
    return Propagation(f, FramePoint(res.G), t, res.Phi, res.err)


def wronskian(a: np.ndarray, b: np.ndarray) -> float:
    m = a.shape[0] // 2
    return float(a[m:] @ b[:m] - a[:m] @ b[m:])


# ---------------------------------------------------------------------------
# Stable / unstable subspaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubspaceResult:
    """Orthonormal basis (columns, stacked (J, J')) of E_s or E_u plus diagnostics."""

    basis: np.ndarray
    graph: np.ndarray  # S with subspace = {(Y, S Y)}
    T_used: float
    gap: float


def _graph_of(B: np.ndarray) -> np.ndarray:
    m = B.shape[1]
    return B[m:] @ np.linalg.inv(B[:m])


def graph_basis(S: np.ndarray) -> np.ndarray:
    """Sasaki-orthonormal basis of {(Y, S Y)}: QR of [I; S] with positive diagonal."""
    m = S.shape[0]
    Q, R = np.linalg.qr(np.vstack([np.eye(m), S]))
    return Q * np.sign(np.diag(R))


def _subspace(space, F: FramePoint, sgn: float, T_step: float, tol: float, T_max: float) -> SubspaceResult:
    m = space.n - 1
    seed = np.vstack([np.zeros((m, m)), np.eye(m)])  # vertical plane, transverse by Klingenberg
    G = F.mat
    P = np.eye(2 * m)
    prev = None
    T = 0.0
    gap = np.inf
    while T < T_max - 1e-12:
        res = propagate(space, G, sgn * T_step, with_jacobi=True)
        G = res.G
        P = res.Phi @ P
        # periodic re-orthonormalisation of the propagator columns
        T += T_step
        B = symplectic_inverse(P) @ seed
        B, _ = np.linalg.qr(B)
        if prev is not None:
            gap = float(np.max(sla.subspace_angles(B, prev)))
            if gap < tol:
                return SubspaceResult(graph_basis(_graph_of(B)), _graph_of(B), T, gap)
        prev = B
    raise ConvergenceError("bunching too weak / T_max exceeded", gap=gap, T_max=T_max)


def stable_subspace(space: ModelSpace, f: FramePoint, T_step: float = T_STEP, tol: float = SUBSPACE_TOL,
                    T_max: float = T_MAX) -> SubspaceResult:
    """E_s at f by the graph transform: pull back the vertical plane from phi_T(f)."""
    return _subspace(space, f, 1.0, T_step, tol, T_max)


def unstable_subspace(space: ModelSpace, f: FramePoint, T_step: float = T_STEP, tol: float = SUBSPACE_TOL,
                      T_max: float = T_MAX) -> SubspaceResult:
    return _subspace(space, f, -1.0, T_step, tol, T_max)


def exact_graph(space: ModelSpace, G: np.ndarray, kind: str, margin: float = 0.5):
    """Graph S of E_s ('s') or E_u ('u') at G from the exterior dynamics.

    Once the forward (backward) orbit has left the support, E_s (E_u) is exactly
    {(Y, -Y)} ({(Y, Y)}). Returns (S, T, Phi_T, G_T) with T the signed time used.
    """
    m = space.n - 1
    if space.is_hyperbolic:
        sgn = -1.0 if kind == "s" else 1.0
        return sgn * np.eye(m), 0.0, np.eye(2 * m), np.asarray(G, dtype=float)
    sgn = 1.0 if kind == "s" else -1.0
    T = exterior_time(space, G, sgn, margin)
    res = propagate(space, G, sgn * T, with_jacobi=True)
    P = res.Phi
    A, B, C, D = P[:m, :m], P[:m, m:], P[m:, :m], P[m:, m:]
    if kind == "s":  # C a + D S a = -(A a + B S a)
        S = -np.linalg.solve(D + B, C + A)
    else:  # C a + D S a = A a + B S a
        S = np.linalg.solve(D - B, A - C)
    return S, sgn * T, P, res.G


def splitting_determinant(Es: np.ndarray, Eu: np.ndarray) -> float:
    """|det| of the orthonormal bases of E_s and E_u side by side (1 means orthogonal)."""
    return float(abs(np.linalg.det(np.hstack([Es, Eu]))))


# ---------------------------------------------------------------------------
# Levi-Civita transport in the background metric
# ---------------------------------------------------------------------------


def transvection(x1: np.ndarray, x2: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Hyperbolic parallel transport of w in T_{x1} to T_{x2} along the geodesic."""
    c = -mink(x1, x2)
    q = x2 - c * x1
    alpha = -mink(w, x1)
    return w + alpha * ((c - 1.0) * x1 + q) + mink(w, q) * (x1 + q / (c + 1.0))


def rotate_onto(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Minimal rotation in span(a, b) taking the unit vector a to the unit vector b."""
    c = mink(a, b)
    bp = b - c * a
    s2 = mink(bp, bp)
    if s2 < 1e-30:
        return w
    s = np.sqrt(s2)
    bp = bp / s
    wa, wb = mink(w, a), mink(w, bp)
    return w - wa * a - wb * bp + (wa * c - wb * s) * a + (wa * s + wb * c) * bp


def lc_frame_transport(G1: np.ndarray, G2: np.ndarray) -> np.ndarray:
    """Transport the frame G1 to the phase point of G2.

    Levi-Civita transport along the geodesic x1 -> x2, followed by the minimal
    rotation carrying the transported v1 onto v2. Computed equivariantly in the
    coordinates of G1, i.e. as G1 * tau(I, G1^{-1} G2), which keeps the arithmetic
    well conditioned for frames far from the origin.
    """
    J = minkowski(G1.shape[0] - 1)
    K = J @ G1.T @ J @ G2
    return G1 @ lc_transport_rel(K)


def lc_transport_rel(K: np.ndarray) -> np.ndarray:
    N = K.shape[0]
    o = np.zeros(N)
    o[0] = 1.0
    x2, v2 = K[:, 0], K[:, 1]
    cols = [x2]
    T1 = transvection(o, x2, np.eye(N)[:, 1])
    for k in range(1, N):
        ek = np.zeros(N)
        ek[k] = 1.0
        cols.append(rotate_onto(T1, v2, transvection(o, x2, ek)))
    return np.column_stack(cols)
