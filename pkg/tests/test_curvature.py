import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomy_lab import ContractViolation, ExtrapolationError, LogBranchError
from holonomy_lab.curvature import (
    DynConnection,
    LoopEstimator,
    check_equivariance,
    check_structural_identities,
    curvature_morphism,
    homothetical_detector,
    inclusion_morphism,
    line_bundle_ratio,
    make_flat_flow,
    make_line_bundle_flow,
    numerical_rank,
    parallelogram_curvature,
    rank_survey,
)
from holonomy_lab.geometry import ModelSpace, random_frame


def _frame(n, seed, radius=0.5):
    return random_frame(n, np.random.default_rng(seed), radius).mat


@pytest.mark.parametrize("n", [3, 4])
def test_morphism_is_the_inclusion_on_hyperbolic(n):
    H = ModelSpace.hyperbolic(n)
    F = curvature_morphism(H, "Frame", _frame(n, n), h=1e-2)
    I = inclusion_morphism(n - 1)
    assert np.linalg.norm(F.matrix - I, 2) / np.linalg.norm(I, 2) < 1e-3
    assert F.rank == (n - 1) * (n - 2) // 2
    sv = F.singular_values()
    assert np.allclose(sv, sv[0], rtol=1e-6)


def test_inclusion_is_isometric_embedding():
    I = inclusion_morphism(4)
    assert I.shape == (16, 6)
    assert np.allclose(I.T @ I, 2 * np.eye(6))
    assert numerical_rank(I) == 6


def test_parallelogram_on_paired_directions():
    H = ModelSpace.hyperbolic(3)
    G = _frame(3, 0)
    off = parallelogram_curvature(H, "Frame", G, [1, 0], [0, 1], h=1e-2)
    assert np.allclose(off.mat, [[0, 1], [-1, 0]], atol=1e-6)
    same = parallelogram_curvature(H, "Frame", G, [1, 0], [1, 0], h=1e-2)
    assert np.abs(same.mat).max() < 1e-8
    with pytest.raises(ContractViolation):
        parallelogram_curvature(H, "Frame", G, [2, 0], [1, 0])


def test_refinement_of_the_raw_loop_estimate_is_fourth_order_on_hyperbolic():
    # the h^2 error term cancels in constant curvature; the leading error is h^4/12
    H = ModelSpace.hyperbolic(3)
    est = LoopEstimator(H, "Frame")
    G = _frame(3, 1)
    exact = np.array([[0.0, 1.0], [-1.0, 0.0]])
    errs = [np.linalg.norm(est.raw(G, ("u", [1, 0]), ("s", [0, 1]), h) - exact, 2) for h in (0.2, 0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(16.0, rel=0.05)


def test_structural_identities_hyperbolic():
    H = ModelSpace.hyperbolic(4)
    r = check_structural_identities(H, "Frame", _frame(4, 2), (0.5, 1.0, 2.0), 1e-2)
    assert r.worst < 1e-4


def test_equivariance_hyperbolic():
    H = ModelSpace.hyperbolic(4)
    G = _frame(4, 3)
    F0 = curvature_morphism(H, "Frame", G, 1e-2)
    for t in (0.5, 1.0, 2.0):
        assert check_equivariance(H, "Frame", G, t, 1e-2, F0) < 1e-5


def test_flat_flow_has_zero_curvature():
    H = ModelSpace.hyperbolic(4)
    F = curvature_morphism(H, make_flat_flow(H, "SO(3)"), _frame(4, 4))
    assert F.rank == 0
    verdict, _, flat = homothetical_detector(F)
    assert flat


@settings(max_examples=5, deadline=None)
@given(st.floats(-2.0, 2.0).filter(lambda a: abs(a) > 0.05))
def test_line_bundle_ratio_recovers_drift(a):
    H = ModelSpace.hyperbolic(3)
    flow = make_line_bundle_flow(H, a)
    ratio, dl = line_bundle_ratio(H, flow, _frame(3, 5))
    assert dl == pytest.approx(-1.0, abs=1e-10)
    assert ratio == pytest.approx(a, abs=1e-6)


def test_line_bundle_morphism_is_homothetical_rank_one():
    H = ModelSpace.hyperbolic(3)
    F = curvature_morphism(H, make_line_bundle_flow(H, 0.7), _frame(3, 6))
    assert F.rank == 1
    verdict, res, flat = homothetical_detector(F)
    assert verdict and not flat
    assert np.allclose(F.matrix.reshape(2, 2), 0.7 * np.eye(2), atol=1e-6)


def test_frame_morphism_is_not_homothetical():
    H = ModelSpace.hyperbolic(3)
    verdict, res, _ = homothetical_detector(curvature_morphism(H, "Frame", _frame(3, 7)))
    assert not verdict and res > 0.5


def test_rank_is_constant_over_points():
    H = ModelSpace.hyperbolic(4)
    pts = [_frame(4, s, 1.0) for s in range(5)]
    survey = rank_survey(H, "Frame", pts)
    assert survey.constant and survey.ranks[0] == 3


def test_dynamical_connection_projector():
    H = ModelSpace.hyperbolic(3)
    conn = DynConnection(H)
    G = _frame(3, 8)
    P = conn.projector(G)
    assert np.allclose(P @ P, P, atol=1e-8)
    assert np.allclose(P @ conn.horizontal(G), 0, atol=1e-8)
    V = conn.vertical()
    assert np.allclose(P @ V, V, atol=1e-8)


def test_large_h_is_rejected():
    # the log-branch guard or the coarse/fine disagreement check fires, never a silent answer
    H = ModelSpace.hyperbolic(3)
    with pytest.raises((ExtrapolationError, LogBranchError)):
        LoopEstimator(H, "Frame").estimate(_frame(3, 9), ("u", [1, 0]), ("s", [0, 1]), 1.2)


@pytest.mark.slow
def test_perturbed_identities():
    P = ModelSpace.perturbed(3)
    G = _frame(3, 10, 0.3)
    est = LoopEstimator(P, "Frame")
    assert check_structural_identities(P, "Frame", G, (1.0,), 0.04, est).worst < 1e-3
