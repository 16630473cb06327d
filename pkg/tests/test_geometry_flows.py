"""Model spaces, frames, the frame flow and the Jacobi propagator."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomy_lab.flows import (
    JacobiState,
    hyperbolic_jacobi,
    integrate,
    jacobi_propagate,
    lc_frame_transport,
    propagate,
    splitting_determinant,
    stable_subspace,
    unstable_subspace,
    wronskian,
    wronskian_form,
)
from holonomy_lab.geometry import (
    FramePoint,
    ModelSpace,
    beta_from_delta,
    frame_pairing,
    lorentz_inverse,
    pinching,
    random_frame,
)
from holonomy_lab.liealg import minkowski


@pytest.fixture(scope="module")
def perturbed3():
    return ModelSpace.perturbed(3)


def test_beta_formula_oracles():
    # delta^{-1/2} - 1
    assert beta_from_delta(1.0) == 0.0
    assert beta_from_delta(0.25) == 1.0
    assert beta_from_delta(4 / 9) == pytest.approx(0.5, abs=1e-15)


def test_hyperbolic_curvature_is_minus_one():
    rep = pinching(ModelSpace.hyperbolic(4), samples=100, seed=1)
    assert rep.kmin == pytest.approx(-1.0, abs=1e-12)
    assert rep.kmax == pytest.approx(-1.0, abs=1e-12)
    assert rep.delta == pytest.approx(1.0, abs=1e-12)


def test_perturbed_space_is_pinched_but_not_constant(perturbed3):
    rep = pinching(perturbed3, samples=1500, seed=0)
    assert 0.5 <= rep.delta < 1.0
    assert 0.0 < rep.beta < 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_random_frames_are_lorentz(n, seed):
    F = random_frame(n, np.random.default_rng(seed), radius=2.0)
    assert F.is_valid()
    G = F.mat
    assert np.allclose(lorentz_inverse(G) @ G, np.eye(n + 1), atol=1e-10)
    assert np.linalg.det(G) > 0 and G[0, 0] > 0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_integrated_jacobi_matches_closed_form(n):
    H = ModelSpace.hyperbolic(n)
    G = random_frame(n, np.random.default_rng(n), 0.5).mat
    m = n - 1
    W = wronskian_form(m)
    for r in integrate(H, G, [0.0, 1.0, 2.5, 5.0], rtol=1e-12, atol=1e-12):
        assert np.abs(r.Phi - hyperbolic_jacobi(r.t, m)).max() / np.cosh(r.t) < 1e-8
        assert np.abs(r.Phi.T @ W @ r.Phi - W).max() < 1e-8


def test_unstable_jacobi_field_grows_like_exp():
    H = ModelSpace.hyperbolic(3)
    f = random_frame(3, np.random.default_rng(0), 0.3)
    w = np.array([0.6, -0.8])
    out = jacobi_propagate(H, f, JacobiState(w, w), 2.0)
    assert np.allclose(out.J, np.exp(2.0) * w, rtol=1e-9)
    out = jacobi_propagate(H, f, JacobiState(w, -w), 2.0)
    assert np.allclose(out.J, np.exp(-2.0) * w, rtol=1e-9, atol=1e-12)


def test_flow_is_group_action(perturbed3):
    G = random_frame(3, np.random.default_rng(4), 0.3).mat
    a = propagate(perturbed3, propagate(perturbed3, G, 0.7).G, 0.8).G
    b = propagate(perturbed3, G, 1.5).G
    assert np.allclose(a, b, atol=1e-8)
    back = propagate(perturbed3, b, -1.5).G
    assert np.allclose(back, G, atol=1e-8)
    assert FramePoint(b).is_valid(1e-8)


def test_perturbed_propagator_is_symplectic(perturbed3):
    G = random_frame(3, np.random.default_rng(5), 0.3).mat
    res = propagate(perturbed3, G, 2.0, with_jacobi=True)
    W = wronskian_form(2)
    assert np.abs(res.Phi.T @ W @ res.Phi - W).max() < 1e-8


def test_hyperbolic_stable_unstable_graphs():
    H = ModelSpace.hyperbolic(4)
    f = random_frame(4, np.random.default_rng(2), 0.4)
    Es, Eu = stable_subspace(H, f), unstable_subspace(H, f)
    assert np.allclose(Es.graph, -np.eye(3), atol=1e-8)
    assert np.allclose(Eu.graph, np.eye(3), atol=1e-8)
    assert splitting_determinant(Es.basis, Eu.basis) == pytest.approx(1.0, abs=1e-8)


def test_perturbed_subspaces_are_lagrangian_and_transverse(perturbed3):
    f = random_frame(3, np.random.default_rng(7), 0.3)
    Es, Eu = stable_subspace(perturbed3, f), unstable_subspace(perturbed3, f)
    for B in (Es.basis, Eu.basis):
        assert abs(frame_pairing(B[:, 0], B[:, 1])) < 1e-8
    assert splitting_determinant(Es.basis, Eu.basis) > 0.5


def test_wronskian_pairing_conventions():
    e = np.array([1.0, 0.0])
    up, down = np.concatenate([e, e]), np.concatenate([e, -e])
    assert wronskian(up, down) == -wronskian(down, up)
    assert frame_pairing(up / np.sqrt(2), down / np.sqrt(2)) == pytest.approx(-1.0)


def test_lc_transport_of_a_frame_to_itself_is_identity():
    G = random_frame(4, np.random.default_rng(9), 1.0).mat
    assert np.allclose(lc_frame_transport(G, G), G, atol=1e-12)
    eta = minkowski(4)
    G2 = random_frame(4, np.random.default_rng(10), 1.0).mat
    T = lc_frame_transport(G, G2)
    assert np.allclose(T.T @ eta @ T, eta, atol=1e-10)
    assert np.allclose(T[:, :2], G2[:, :2], atol=1e-10)
