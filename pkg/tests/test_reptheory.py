import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from holonomy_lab.liealg import so_basis
from holonomy_lab.reptheory import (
    closure_dimension,
    complex_structure,
    containment_audit,
    fixed_subspace_catalog,
    is_conformal,
    isotypic_dims,
    normalizer_conformal_check,
    perturbed_spec,
    realify,
    so_to_conf_audit,
    sphere_transitivity,
    standard_specs,
    su3,
    u3,
)

# dimensions of the standard real forms
DIMS = {"su(3)": 8, "u(3)": 9, "so(6)": 15, "sp(6,R)": 21, "sl(3,C)": 16, "sl(6,R)": 35}


def test_standard_specs_are_closed_with_expected_dims():
    for spec in standard_specs():
        assert spec.dim == DIMS[spec.name]
        assert spec.is_closed()
        assert closure_dimension(spec.mats) == spec.dim


def test_containment_lattice():
    audit = containment_audit()
    i = {n: k for k, n in enumerate(audit.names)}
    assert all(audit.contains_su3)
    for big, small in [("u(3)", "su(3)"), ("so(6)", "u(3)"), ("sp(6,R)", "u(3)"), ("sl(6,R)", "sp(6,R)"),
                       ("sl(6,R)", "sl(3,C)")]:
        assert audit.contains[i[big], i[small]]
    assert not audit.contains[i["su(3)"], i["u(3)"]]
    assert not audit.contains[i["so(6)"], i["sp(6,R)"]]


def test_perturbed_span_is_not_closed():
    assert not perturbed_spec(su3(), seed=3).is_closed()


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_realify_is_an_algebra_morphism(a, b):
    A, B = np.array([[a, b], [0, a]]), np.array([[b, 0], [a, b]])
    assert np.allclose(realify(A @ B), realify(A) @ realify(B))


def test_complex_structure_squares_to_minus_one():
    J = complex_structure(3)
    assert np.allclose(J @ J, -np.eye(6))
    assert all(np.allclose(J @ X, X @ J) for X in u3().mats)


@pytest.mark.parametrize("k,dims", [(3, [1, 3, 5]), (4, [1, 3, 3, 9]), (5, [1, 10, 14])])
def test_isotypic_decomposition_of_matrices_under_so(k, dims):
    # End(R^k) = R.I + so(k) + Sym_0; so(4) splits further into self-dual and anti-self-dual parts
    assert isotypic_dims(so_basis(k)) == dims


@pytest.mark.parametrize("k", [3, 4])
def test_so_to_conf_audit(k):
    r = so_to_conf_audit(k, k * (k - 1) // 2)
    assert r["verdict"] and r["dims_sum"] == k * k
    assert r["sl_isotypic_dims"] == [1, k * k - 1]


def test_fixed_subspace_catalog():
    cat = {f.group: f for f in fixed_subspace_catalog()}
    assert cat["SO(2)"].dim == 2
    assert cat["SU(3)"].dim == 2 and cat["SU(3)"].contains_J
    for m in range(3, 9):
        assert cat[f"SO({m})"].dim == 1
    assert all(f.matches for f in cat.values())


def test_conformal_normalizer_examples():
    gens = so_basis(3)
    R = special_ortho_group.rvs(3, random_state=1)
    rows = normalizer_conformal_check(gens, [2.5 * R, np.diag([3.0, 1.0, 1.0])], "SO(3)")
    assert rows[0]["normalizes"] and rows[0]["conformal"] and rows[0]["transitive"]
    assert not rows[1]["normalizes"] and not rows[1]["conformal"]
    assert all(r["implication_ok"] for r in rows)


def test_sphere_transitivity_certificate():
    assert sphere_transitivity(so_basis(3))["transitive"]
    # a single rotation only sweeps circles
    assert not sphere_transitivity([so_basis(3)[0]])["transitive"]


def test_is_conformal():
    assert is_conformal(3 * np.eye(4))[0]
    assert not is_conformal(np.diag([1.0, 2.0]))[0]
