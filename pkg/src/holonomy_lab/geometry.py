"""Model spaces on the hyperboloid and the Sasaki geometry of their unit tangent bundles.

Points live on the upper sheet {<x,x> = -1, x_0 > 0} of Minkowski space R^{1,n},
<a,b> = -a_0 b_0 + a_1 b_1 + ... + a_n b_n. The perturbed spaces carry the
conformal metric e^{2u} g_hyp, where u is a cosine series multiplied by a smooth
bump supported in a hyperbolic ball of radius r0 around the base point
o = (1, 0, ..., 0). Outside that ball the metric is exactly hyperbolic, which
the flow and holonomy modules exploit heavily.

Tangent vectors are stored as ambient (n+1)-vectors. ``PhasePoint.v`` and the
columns of ``FramePoint.mat`` are normalised for the background hyperbolic
metric; the unit vectors of e^{2u} g_hyp are obtained by multiplying with
e^{-u(x)} (``ModelSpace.scale``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ChartExit, ContractViolation
from .liealg import minkowski

NORM_TOL = 1e-10
DEFAULT_CHART_RADIUS = 30.0
_BUMP_EDGE = 1.0 - 1e-6


def mink(a: np.ndarray, b: np.ndarray) -> float:
    """Minkowski product -a0 b0 + sum_i ai bi."""
    return float(-a[0] * b[0] + np.dot(a[1:], b[1:]))


def tangent_projection(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient vector onto T_x of the hyperboloid."""
    return w + mink(w, x) * x


def lorentz_inverse(G: np.ndarray) -> np.ndarray:
    """Inverse of a Lorentz matrix, J G^T J (exact, no linear solve)."""
    J = minkowski(G.shape[0] - 1)
    return J @ G.T @ J


# ---------------------------------------------------------------------------
# Perturbation: bump times cosine series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """u(x) = b(s) * sum_k a_k cos(<w_k, x_spatial> + phi_k).

    s = (x_0 - 1) / (cosh r0 - 1) and b(s) = exp(1 - 1/(1 - s^2)) for s < 1, zero
    otherwise; the support is the closed hyperbolic ball of radius ``r0``.
    """

    amplitudes: np.ndarray
    wavevectors: np.ndarray  # (modes, n)
    phases: np.ndarray
    r0: float = 1.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        w = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
        p = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if not (a.shape[0] == w.shape[0] == p.shape[0]):
            raise ContractViolation("amplitudes, wavevectors and phases must have the same length")
        if self.r0 <= 0:
            raise ContractViolation("support radius must be positive")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "wavevectors", w)
        object.__setattr__(self, "phases", p)

    @property
    def dim(self) -> int:
        return self.wavevectors.shape[1]

    @property
    def level(self) -> float:
        """x_0 value of the support boundary."""
        return float(np.cosh(self.r0))

    def _bump(self, y0: float):
        kappa = 1.0 / (np.cosh(self.r0) - 1.0)
        s = (y0 - 1.0) * kappa
        if s >= _BUMP_EDGE:
            return 0.0, 0.0, 0.0, kappa
        q = 1.0 / (1.0 - s * s)
        b = np.exp(1.0 - q)
        b1 = b * (-2.0 * s * q * q)
        b2 = b * ((2.0 * s * q * q) ** 2 - 2.0 * q * q - 8.0 * s * s * q ** 3)
        return b, b1, b2, kappa

    def jet(self, y: np.ndarray, order: int = 2):
        """Value, ambient gradient and ambient Hessian of the extension to R^{n+1}."""
        y = np.asarray(y, dtype=float)
        N = y.shape[0]
        b, b1, b2, kappa = self._bump(y[0])
        if b == 0.0:
            return 0.0, np.zeros(N), np.zeros((N, N))
        ph = self.wavevectors @ y[1:] + self.phases
        cs, sn = np.cos(ph), np.sin(ph)
        c = float(self.amplitudes @ cs)
        dc = -(self.amplitudes * sn) @ self.wavevectors
        val = b * c
        grad = np.empty(N)
        grad[0] = kappa * b1 * c
        grad[1:] = b * dc
        if order < 2:
            return val, grad, None
        hess = np.empty((N, N))
        hess[0, 0] = kappa * kappa * b2 * c
        hess[0, 1:] = hess[1:, 0] = kappa * b1 * dc
        hess[1:, 1:] = -b * (self.wavevectors.T * (self.amplitudes * cs)) @ self.wavevectors
        return val, grad, hess

    def to_dict(self) -> dict:
        return {
            "amplitudes": self.amplitudes.tolist(),
            "wavevectors": self.wavevectors.tolist(),
            "phases": self.phases.tolist(),
            "r0": self.r0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Perturbation":
        return cls(d["amplitudes"], d["wavevectors"], d["phases"], float(d.get("r0", 1.0)))


def default_perturbation(n: int, amplitude: float = 0.003, r0: float = 1.5) -> Perturbation:
    """The fixed perturbation used by the acceptance runs.

    Three modes with deterministic wavevectors; the amplitude is tuned so that
    the pinching estimate lands between 1/2 and 0.8.
    """
    base = np.array([[1.3, -0.7, 0.4, 0.2, -0.5, 0.3, 0.1, -0.2],
                     [-0.4, 1.1, 0.9, -0.6, 0.2, 0.5, -0.3, 0.4],
                     [0.8, 0.5, -1.2, 0.3, 0.7, -0.1, 0.6, 0.2]])
    if n > base.shape[1]:
        raise ContractViolation("default perturbation defined for n <= 8")
    amps = amplitude * np.array([1.0, -0.8, 0.6])
    return Perturbation(amps, base[:, :n], np.array([0.3, 1.1, -0.6]), r0)


def random_perturbation(n: int, modes: int, amplitude: float, r0: float, seed: int) -> Perturbation:
    rng = np.random.default_rng(seed)
    return Perturbation(
        amplitude * rng.uniform(-1, 1, modes),
        rng.normal(size=(modes, n)),
        rng.uniform(0, 2 * np.pi, modes),
        r0,
    )


# ---------------------------------------------------------------------------
# Model spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpace:
    """Hyperbolic space H^n, optionally with a compactly supported conformal perturbation."""

    n: int
    perturbation: Perturbation | None = None
    chart_radius: float = DEFAULT_CHART_RADIUS

    def __post_init__(self):
        if self.n < 2:
            raise ContractViolation("dimension n must be at least 2")
        if self.perturbation is not None and self.perturbation.dim != self.n:
            raise ContractViolation("perturbation dimension does not match n")

    @classmethod
    def hyperbolic(cls, n: int) -> "ModelSpace":
        return cls(n)

    @classmethod
    def perturbed(cls, n: int, perturbation: Perturbation | None = None, **kw) -> "ModelSpace":
        return cls(n, perturbation if perturbation is not None else default_perturbation(n), **kw)

    @property
    def kind(self) -> str:
        return "hyperbolic" if self.perturbation is None else "perturbed"

    @property
    def is_hyperbolic(self) -> bool:
        return self.perturbation is None

    @property
    def support_level(self) -> float:
        """x_0 above which the metric is exactly hyperbolic (inf: nowhere perturbed)."""
        return -np.inf if self.perturbation is None else self.perturbation.level

    def __str__(self) -> str:
        return f"{'Hyperbolic' if self.is_hyperbolic else 'PerturbedHyperbolic'}({self.n})"

    # -- conformal factor ---------------------------------------------------
    def jet(self, x: np.ndarray, order: int = 2):
        if self.perturbation is None:
            N = self.n + 1
            return 0.0, np.zeros(N), np.zeros((N, N))
        if x[0] > np.cosh(self.chart_radius):
            raise ChartExit(f"point with x0 = {x[0]:.3g} outside the chart", x0=float(x[0]))
        return self.perturbation.jet(x, order)

    def u(self, x: np.ndarray) -> float:
        if self.perturbation is None:
            return 0.0
        return self.perturbation.jet(x, 1)[0]

    def scale(self, x: np.ndarray) -> float:
        """e^{-u(x)}: converts background-unit vectors into unit vectors of the model metric."""
        return float(np.exp(-self.u(x)))

    def metric(self, x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.exp(2 * self.u(x)) * mink(a, b))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Background gradient of u as a tangent vector at x."""
        _, g, _ = self.jet(x, 1)
        Jg = g.copy()
        Jg[0] = -Jg[0]
        return tangent_projection(x, Jg)

    def schouten_like(self, x: np.ndarray, vecs: np.ndarray) -> np.ndarray:
        """Matrix T(a_i, a_j) for the columns a_i of ``vecs``.

        T = Hess u - du (x) du + 1/2 |du|^2 g, all with respect to the background
        metric; it controls the curvature change under g -> e^{2u} g.
        """
        _, grad, hess = self.jet(x, 2)
        V = np.atleast_2d(vecs.T).T
        if not np.any(grad):
            return np.zeros((V.shape[1], V.shape[1]))
        Jg = grad.copy()
        Jg[0] = -Jg[0]
        gradu = tangent_projection(x, Jg)
        du2 = mink(gradu, gradu)
        duv = grad @ V
        Jm = minkowski(self.n)
        gram = V.T @ Jm @ V
        hess_t = V.T @ hess @ V + gram * float(grad @ x)
        return hess_t - np.outer(duv, duv) + 0.5 * du2 * gram

    def _T_sharp(self, x, a):
        _, grad, hess = self.jet(x, 2)
        Jg = grad.copy()
        Jg[0] = -Jg[0]
        gradu = tangent_projection(x, Jg)
        Ha = hess @ a
        Ha[0] = -Ha[0]
        hess_sharp = tangent_projection(x, Ha) + float(grad @ x) * a
        return hess_sharp - float(grad @ a) * gradu + 0.5 * mink(gradu, gradu) * a

    def riemann(self, x, a, b, c) -> np.ndarray:
        """R(a,b)c for the model metric, with g(R(a,b)b, a) = sectional * |a^b|^2.

        Convention: R(a,b)c = -(g(b,c) a - g(a,c) b) in curvature -1.
        """
        x, a, b, c = (np.asarray(t, dtype=float) for t in (x, a, b, c))
        out = -(mink(b, c) * a - mink(a, c) * b)
        if self.perturbation is None:
            return out
        V = np.column_stack([a, b, c])
        T = self.schouten_like(x, V)
        Q = (T[1, 2] * a - T[0, 2] * b + mink(b, c) * self._T_sharp(x, a)
             - mink(a, c) * self._T_sharp(x, b))
        return out - Q

    def sectional(self, x, a, b) -> float:
        """Sectional curvature of the plane span(a, b) at x for the model metric."""
        Rabb = self.riemann(x, a, b, b)
        num = self.metric(x, Rabb, a)
        den = self.metric(x, a, a) * self.metric(x, b, b) - self.metric(x, a, b) ** 2
        return num / den

    def jacobi_matrix(self, G: np.ndarray) -> np.ndarray:
        """K_ab = g(R(e_a, e_1) e_1, e_b) in the unit parallel frame built from G.

        With e_k = e^{-u} G[:, k] this reduces to -e^{-2u}((1 + T_11) I + T_NN).
        """
        m = self.n - 1
        if self.perturbation is None:
            return -np.eye(m)
        x = G[:, 0]
        T = self.schouten_like(x, G[:, 1:])
        w = np.exp(-2.0 * self.u(x))
        return -w * ((1.0 + T[0, 0]) * np.eye(m) + T[1:, 1:])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "chart_radius": self.chart_radius}
        if self.perturbation is not None:
            d["perturbation"] = self.perturbation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpace":
        kind = d.get("kind", "hyperbolic")
        n = int(d["n"])
        chart = float(d.get("chart_radius", DEFAULT_CHART_RADIUS))
        if kind == "hyperbolic":
            return cls(n, None, chart)
        if kind == "perturbed":
            p = d.get("perturbation")
            if p is None:
                pert = default_perturbation(n, float(d.get("amplitude", 0.003)), float(d.get("r0", 1.5)))
            else:
                pert = Perturbation.from_dict(p)
            return cls(n, pert, chart)
        raise ContractViolation(f"unknown space kind {kind!r}")


# ---------------------------------------------------------------------------
# Points of SM and of the frame bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhasePoint:
    """(x, v): x on the hyperboloid, v background-unit and Minkowski-orthogonal to x."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def residual(self) -> float:
        x, v = self.x, self.v
        return max(abs(mink(x, x) + 1), abs(mink(v, v) - 1), abs(mink(x, v)))

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        return self.residual() < tol and self.x[0] > 0


@dataclass(frozen=True)
class FramePoint:
    """A Lorentz matrix G whose columns are (x, v, e_2, ..., e_n)."""

    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mat", np.asarray(self.mat, dtype=float))

    @property
    def x(self) -> np.ndarray:
        return self.mat[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.mat[:, 1]

    @property
    def normals(self) -> np.ndarray:
        return self.mat[:, 2:]

    @property
    def phase(self) -> PhasePoint:
        return PhasePoint(self.mat[:, 0].copy(), self.mat[:, 1].copy())

    def gram(self) -> np.ndarray:
        F = self.mat[:, 1:]
        return F.T @ minkowski(self.mat.shape[0] - 1) @ F

    def residual(self) -> float:
        J = minkowski(self.mat.shape[0] - 1)
        return float(np.max(np.abs(self.mat.T @ J @ self.mat - J)))

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        return self.residual() < tol and self.mat[0, 0] > 0


def complete_frame(p: PhasePoint) -> FramePoint:
    """Deterministic orthonormal completion of (x, v) to a Lorentz frame."""
    x, v = p.x, p.v
    N = x.shape[0]
    cols = [x, v]
    for k in range(N):
        w = np.zeros(N)
        w[k] = 1.0
        for c in cols:
            w = w - (mink(w, c) / mink(c, c)) * c
        nw = mink(w, w)
        if nw > 1e-6:
            cols.append(w / np.sqrt(nw))
        if len(cols) == N:
            break
    G = np.column_stack(cols)
    if np.linalg.det(G) < 0:
        G[:, -1] = -G[:, -1]
    return FramePoint(G)


def random_frame(n: int, rng: np.random.Generator, radius: float = 1.0) -> FramePoint:
    """A frame at a point at hyperbolic distance <= radius from o, random orientation."""
    N = n + 1
    Q, Rq = np.linalg.qr(rng.normal(size=(n, n)))
    Q = Q * np.sign(np.diag(Rq))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    r = radius * rng.uniform(0, 1)
    d = rng.normal(size=n)
    d /= np.linalg.norm(d)
    # boost of rapidity r in direction d, composed with a rotation
    B = np.eye(N)
    B[0, 0] = np.cosh(r)
    B[0, 1:] = B[1:, 0] = np.sinh(r) * d
    B[1:, 1:] = np.eye(n) + (np.cosh(r) - 1) * np.outer(d, d)
    R = np.eye(N)
    R[1:, 1:] = Q
    return FramePoint(B @ R)


# ---------------------------------------------------------------------------
# Sasaki splitting of T(SM)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentSplit:
    """xi = aX * X + (h, k): flow part, horizontal and vertical normal vectors.

    ``h`` and ``k`` are ambient tangent vectors at x orthogonal to v; ``weight``
    is e^{2u(x)} so that model-metric products are ``weight * <., .>``.
    """

    aX: float
    h: np.ndarray
    k: np.ndarray
    weight: float = 1.0

    def sasaki_norm(self) -> float:
        return float(np.sqrt(self.aX ** 2 + self.weight * (mink(self.h, self.h) + mink(self.k, self.k))))


def _unit_v(space: ModelSpace, p: PhasePoint) -> np.ndarray:
    return space.scale(p.x) * p.v


def connection_map(space: ModelSpace, p: PhasePoint, dx: np.ndarray, dvhat: np.ndarray) -> np.ndarray:
    """K(xi) = covariant derivative of the unit field v along dx (model metric)."""
    x = p.x
    vhat = _unit_v(space, p)
    k = tangent_projection(x, dvhat)
    if space.perturbation is not None:
        _, grad, _ = space.jet(x, 1)
        gradu = space.gradient(x)
        k = k + float(grad @ dx) * vhat + float(grad @ vhat) * dx - mink(dx, vhat) * gradu
    return k


def sasaki_split(space: ModelSpace, p: PhasePoint, xi: Sequence[np.ndarray]) -> TangentSplit:
    """Split an ambient tangent vector xi = (dx, dv) of SM.

    ``dv`` is the derivative of the model-metric unit vector e^{-u} v.
    """
    dx, dv = (np.asarray(t, dtype=float) for t in xi)
    x = p.x
    w = np.exp(2 * space.u(x))
    vhat = _unit_v(space, p)
    aX = w * mink(dx, vhat)
    h = dx - aX * vhat
    k = connection_map(space, p, dx, dv)
    return TangentSplit(float(aX), h, k, float(w))


def reconstruct(space: ModelSpace, p: PhasePoint, s: TangentSplit) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of ``sasaki_split``: the ambient (dx, dv)."""
    x = p.x
    vhat = _unit_v(space, p)
    dx = s.aX * vhat + s.h
    dv = s.k + mink(dx, vhat) * x
    if space.perturbation is not None:
        _, grad, _ = space.jet(x, 1)
        gradu = space.gradient(x)
        corr = float(grad @ dx) * vhat + float(grad @ vhat) * dx - mink(dx, vhat) * gradu
        # the correction is tangent; undo it, keeping dv tangent to the unit sphere bundle
        dv = dv - corr
    return dx, dv


def liouville_pairing(p: PhasePoint, xi: TangentSplit, eta: TangentSplit) -> float:
    """d(lambda)(xi, eta) = g(h_xi, k_eta) - g(k_xi, h_eta)."""
    w = xi.weight
    return float(w * (mink(xi.h, eta.k) - mink(xi.k, eta.h)))


def split_to_frame(space: ModelSpace, F: FramePoint, s: TangentSplit) -> tuple[float, np.ndarray, np.ndarray]:
    """Coordinates (aX, J, J') of a split in the unit frame e^{-u} e_2..e_n."""
    sc = np.sqrt(s.weight)  # e^{u}; model products of frame vectors: e^{2u} * e^{-u} = e^{u}
    N = F.normals
    Jm = minkowski(space.n)
    return s.aX, sc * (N.T @ Jm @ s.h), sc * (N.T @ Jm @ s.k)


def frame_to_split(space: ModelSpace, F: FramePoint, aX: float, J: np.ndarray, dJ: np.ndarray) -> TangentSplit:
    x = F.x
    e = space.scale(x)
    N = F.normals
    return TangentSplit(float(aX), e * (N @ J), e * (N @ dJ), float(np.exp(2 * space.u(x))))


def frame_pairing(a: np.ndarray, b: np.ndarray) -> float:
    """d(lambda) in frame coordinates: vectors stacked as (J, J')."""
    m = a.shape[0] // 2
    return float(a[:m] @ b[m:] - a[m:] @ b[:m])


# ---------------------------------------------------------------------------
# Pinching
# ---------------------------------------------------------------------------


def beta_from_delta(delta: float) -> float:
    """Fiber-bunching constant delta^{-1/2} - 1."""
    if not 0 < delta <= 1:
        raise ContractViolation("pinching delta must lie in (0, 1]")
    return float(delta ** -0.5 - 1.0)


@dataclass(frozen=True)
class PinchingReport:
    delta: float
    beta: float
    kmin: float
    kmax: float
    samples: int


def sample_curvatures(space: ModelSpace, samples: int, seed: int) -> np.ndarray:
    """Sectional curvatures of random planes at random points of the perturbed ball."""
    rng = np.random.default_rng(seed)
    radius = space.perturbation.r0 if space.perturbation is not None else 1.0
    out = np.empty(samples)
    for i in range(samples):
        F = random_frame(space.n, rng, radius)
        x = F.x
        T = F.mat[:, 1:]
        c = rng.normal(size=(space.n, 2))
        a, b = T @ c[:, 0], T @ c[:, 1]
        out[i] = space.sectional(x, a, b)
    return out


def pinching(space: ModelSpace, samples: int = 2000, seed: int = 0) -> PinchingReport:
    """delta_est = min |K| / max |K| over samples and beta = delta^{-1/2} - 1."""
    K = sample_curvatures(space, samples, seed)
    if np.any(K >= 0):
        raise ContractViolation("non-negative sectional curvature sampled; space is not negatively curved")
    aK = np.abs(K)
    delta = float(aK.min() / aK.max())
    if space.is_hyperbolic:
        delta = 1.0 if abs(delta - 1.0) < 1e-12 else delta
    return PinchingReport(delta, beta_from_delta(delta), float(K.min()), float(K.max()), samples)
