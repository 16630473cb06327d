import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomy_lab import ContractViolation, LogBranchError
from holonomy_lab.liealg import (
    RELATIONS,
    AlgElement,
    StandardBasis,
    bracket,
    bracket_table,
    commutant,
    expm,
    lie_closure,
    logm,
    minkowski,
    so_basis,
    so_coordinates,
)


@pytest.mark.parametrize("n", range(3, 9))
def test_bracket_table_exact(n):
    rows = bracket_table(n)
    assert {r["relation"] for r in rows} == set(RELATIONS)
    assert len(RELATIONS) == 12
    assert all(r["failures"] == 0 for r in rows)
    assert all(r["checked"] > 0 for r in rows)


def test_brackets_are_integer_and_exact():
    B = StandardBasis(4)
    # [U+_i, U-_i] = 2X and [U+_i, U-_j] = 2R_ij for i != j, in integers
    assert bracket(B.U_plus[2], B.U_minus[2]) == B.X * 2
    assert bracket(B.U_plus[2], B.U_minus[3]) == B.R[(2, 3)] * 2
    assert bracket(B.X, B.U_plus[3]) == B.U_plus[3]
    assert bracket(B.X, B.U_minus[3]) == B.U_minus[3] * -1
    assert B.X.mat.dtype.kind == "i"


@pytest.mark.parametrize("n", range(3, 9))
def test_horizontal_generates_everything(n):
    gens = [np.asarray(a.mat, dtype=float) for a in StandardBasis(n).horizontal()]
    assert lie_closure(gens).dim == n * (n + 1) // 2


def test_elements_preserve_minkowski_form():
    n = 5
    eta = minkowski(n)
    for a in StandardBasis(n).horizontal():
        A = a.mat
        assert np.array_equal(A.T @ eta + eta @ A, np.zeros_like(A))
        assert a.is_valid()


def test_so_basis_and_coordinates_roundtrip():
    rng = np.random.default_rng(3)
    c = rng.normal(size=6)
    A = sum(ci * Bi for ci, Bi in zip(c, so_basis(4)))
    assert np.allclose(so_coordinates(A), c)
    assert lie_closure(so_basis(4)).dim == 6


def test_closure_of_a_single_rotation_is_one_dimensional():
    assert lie_closure([so_basis(3)[0]]).dim == 1


def test_commutant_of_so_is_homotheties():
    C = commutant(so_basis(4))
    assert len(C) == 1
    M = C[0] / C[0][0, 0]
    assert np.allclose(M, np.eye(4))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=3, max_size=3))
def test_exp_log_roundtrip(c):
    A = sum(ci * Bi for ci, Bi in zip(c, so_basis(3)))
    g = expm(AlgElement(A, "so(3)"))
    assert g.is_valid()
    assert np.allclose(logm(g).mat, A, atol=1e-12)


def test_log_refuses_far_from_identity():
    B = StandardBasis(3)
    with pytest.raises(LogBranchError):
        logm(expm(B.X, 3.0))


def test_standard_basis_needs_n_at_least_two():
    with pytest.raises(ContractViolation):
        StandardBasis(1)
