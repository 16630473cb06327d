import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from holonomy_lab import ContractViolation
from holonomy_lab.geometry import ModelSpace, random_frame
from holonomy_lab.holonomy import (
    AuxConnection,
    CsuSolver,
    LeafCharts,
    build_path,
    csu_connect,
    csu_decompose,
    holonomy_group_estimate,
    horo,
    lc_fiber_map,
    loop_holonomy,
    quadrilateral,
    stable_holonomy,
    uniform_bound,
    unstable_holonomy,
)
from holonomy_lab.liealg import StandardBasis


def _U(c, kind):
    B = StandardBasis(len(c) + 1)
    U = B.U_plus if kind == "s" else B.U_minus
    return sum(ci * U[i].mat for ci, i in zip(c, B.labels)).astype(float)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.sampled_from(["s", "u"]))
def test_horospherical_closed_form(c, kind):
    c = np.array(c)
    assert np.allclose(horo(c, kind), expm(_U(c, kind)), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_csu_coordinates_reconstruct(seed):
    rng = np.random.default_rng(seed)
    cs, cu = rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3)
    tau = rng.uniform(-1, 1)
    X = StandardBasis(4).X.mat.astype(float)
    g = horo(cs, "s") @ expm(tau * X) @ horo(cu, "u")
    c = csu_decompose(g)
    assert c.tau == pytest.approx(tau, abs=1e-10)
    assert np.allclose(c.cs, cs, atol=1e-10) and np.allclose(c.cu, cu, atol=1e-10)
    assert np.allclose(c.m, np.eye(3), atol=1e-10)


@pytest.mark.parametrize("n", [3, 4])
def test_stable_holonomy_equals_levi_civita_on_hyperbolic(n):
    rng = np.random.default_rng(10 + n)
    H = ModelSpace.hyperbolic(n)
    charts = LeafCharts(H)
    conn = AuxConnection("twisted", 0.05)
    for kind, fn in (("s", stable_holonomy), ("u", unstable_holonomy)):
        G = random_frame(n, rng, 0.5).mat
        y = rng.normal(size=n - 1)
        y *= 0.3 / np.linalg.norm(y)
        Gw = charts.move(G, y, kind)
        e = fn(H, "Frame", G, Gw, connection=conn, charts=charts)
        assert np.linalg.norm(e.map - lc_fiber_map(G, Gw), 2) < 1e-6
        assert e.rate >= 0.8
        assert np.allclose(e.map.T @ e.map, np.eye(n - 1), atol=1e-10)


def test_leaf_moves_stay_on_leaf_and_compose():
    H = ModelSpace.hyperbolic(4)
    charts = LeafCharts(H)
    G = random_frame(4, np.random.default_rng(1), 0.5).mat
    a, b = np.array([0.1, -0.2, 0.05]), np.array([-0.07, 0.02, 0.1])
    one = charts.move(charts.move(G, a, "s"), b, "s")
    two = charts.move(G, a + b, "s")
    assert np.allclose(one, two, atol=1e-12)
    # a stable move does not change the forward asymptotic class: distance shrinks
    from holonomy_lab.flows import propagate

    d0 = np.linalg.norm(G[:, 0] - two[:, 0])
    d5 = np.linalg.norm(propagate(H, G, 5.0).G[:, 0] - propagate(H, two, 5.0).G[:, 0])
    assert d5 < 0.05 * d0


@pytest.mark.parametrize("space", ["hyperbolic", "perturbed"])
def test_csu_connect_reaches_target(space):
    S = ModelSpace.hyperbolic(3) if space == "hyperbolic" else ModelSpace.perturbed(3)
    rng = np.random.default_rng(2)
    v = random_frame(3, rng, 0.3).mat
    charts = LeafCharts(S)
    w = build_path(charts, v, [("s", [0.1, -0.05]), ("c", 0.2), ("u", [0.04, 0.08])]).end
    p = csu_connect(S, v, w, charts)
    assert [leg.kind for leg in p.legs] == ["s", "c", "u"]
    assert p.residual < 1e-10
    assert np.allclose(p.end[:, :2], w[:, :2], atol=1e-8)


def test_loop_holonomy_rejects_open_path():
    H = ModelSpace.hyperbolic(3)
    charts = LeafCharts(H)
    p = build_path(charts, random_frame(3, np.random.default_rng(0), 0.2).mat, [("s", [0.2, 0.1])])
    with pytest.raises(ContractViolation):
        loop_holonomy(H, "Frame", p, charts)


def test_small_loop_holonomy_is_a_rotation_by_the_curvature():
    # u(h e1), s(h e2), u(-h e1), s(-h e2): log of the holonomy is ~ h^2 R_12
    H = ModelSpace.hyperbolic(3)
    charts = LeafCharts(H)
    G = random_frame(3, np.random.default_rng(3), 0.3).mat
    h = 0.05
    loop = quadrilateral(charts, G, [("u", [h, 0]), ("s", [0, h]), ("u", [-h, 0]), ("s", [0, -h])])
    R = loop_holonomy(H, "Frame", loop, charts).map
    theta = np.arctan2(R[1, 0], R[0, 0])
    assert abs(theta) == pytest.approx(h * h, rel=1e-2)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_group_estimate_hyperbolic(n):
    H = ModelSpace.hyperbolic(n)
    G = random_frame(n, np.random.default_rng(n), 0.5).mat
    assert holonomy_group_estimate(H, "Frame", G, seed=1).dim == (n - 1) * (n - 2) // 2
    eu = holonomy_group_estimate(H, "E_u", G, seed=1)
    assert eu.conformal and eu.conformal_residual < 1e-6


def test_group_estimate_independent_of_workers():
    H = ModelSpace.hyperbolic(4)
    G = random_frame(4, np.random.default_rng(0), 0.5).mat
    a = holonomy_group_estimate(H, "Frame", G, num_loops=6, seed=5, workers=1)
    b = holonomy_group_estimate(H, "Frame", G, num_loops=6, seed=5, workers=3)
    assert a.dim == b.dim
    assert a.loops == b.loops


@pytest.mark.slow
def test_connection_independence_and_uniform_bound_perturbed():
    P = ModelSpace.perturbed(3)
    rng = np.random.default_rng(4)
    charts = LeafCharts(P)
    G = random_frame(3, rng, 0.3).mat
    Gw = charts.move(G, np.array([0.15, -0.1]), "s")
    a = stable_holonomy(P, "Frame", G, Gw, connection=AuxConnection("lc"), charts=charts)
    b = stable_holonomy(P, "Frame", G, Gw, connection=AuxConnection("twisted", 0.05), charts=charts)
    assert np.linalg.norm(a.map - b.map, 2) < 2e-6
    fit = uniform_bound(P, G, rng.normal(size=2))
    assert fit.spread <= 0.3
    assert np.all(np.diff(fit.deviations) > 0)


def test_csu_solver_is_exact_on_hyperbolic():
    H = ModelSpace.hyperbolic(4)
    charts = LeafCharts(H)
    rng = np.random.default_rng(8)
    v, w = random_frame(4, rng, 0.3).mat, random_frame(4, rng, 0.3).mat
    p = CsuSolver(charts).solve(v, w)
    assert p.residual < 1e-12
