import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscillattr.coupling import (build_laplacian, from_array, load_matrix, neumann_eigenvalues_1d,
                                 periodic_eigenvalues_1d, save_matrix, validate_ha)


def test_small_stencils():
    np.testing.assert_array_equal(build_laplacian(2, 1, 1.0, "neumann").entries, [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(build_laplacian(2, 1, 1.0, "periodic").entries, [[2, -2], [-2, 2]])


@pytest.mark.parametrize("bc, eigs, lam1", [("neumann", [0, 2], 2), ("periodic", [0, 4], 4)])
def test_two_site_spectrum(bc, eigs, lam1):
    rep = validate_ha(build_laplacian(2, 1, 1.0, bc))
    assert rep.ha_satisfied and rep.violation is None
    np.testing.assert_allclose(rep.eigenvalues, eigs, atol=1e-12)
    assert rep.lambda1 == pytest.approx(lam1)


def test_identity_rejected():
    rep = validate_ha(np.eye(3))
    assert not rep.ha_satisfied
    assert "kernel" in rep.violation and "zero eigenvalue" in rep.violation


def test_other_violations_reported():
    asym = np.array([[1.0, -1.0], [-0.5, 0.5]])
    assert "symmetric" in validate_ha(asym).violation
    # two disconnected pairs: double zero eigenvalue
    block = np.kron(np.eye(2), [[1.0, -1.0], [-1.0, 1.0]])
    rep = validate_ha(block)
    assert not rep.ha_satisfied and "simple" in rep.violation
    indef = np.array([[-1.0, 1.0], [1.0, -1.0]])
    assert "indefinite" in validate_ha(indef).violation


def test_builder_rejects_bad_input():
    with pytest.raises(ValueError):
        build_laplacian(1, 1)
    with pytest.raises(ValueError):
        build_laplacian(4, 1, h=0.0)
    with pytest.raises(ValueError):
        build_laplacian(4, 1, bc="dirichlet")


@given(N=st.integers(2, 7), d=st.integers(1, 3), h=st.floats(0.1, 3.0),
       bc=st.sampled_from(["neumann", "periodic"]))
def test_builder_invariants(N, d, h, bc):
    if N**d > 300:
        return
    A = build_laplacian(N, d, h, bc)
    E = A.entries
    scale = np.abs(E).max()
    assert np.abs(E - E.T).max() <= 1e-12 * scale
    assert np.linalg.norm(E @ np.ones(A.size)) <= 1e-12 * np.linalg.norm(E)
    rep = validate_ha(A)
    assert rep.ha_satisfied
    assert rep.eigenvalues.min() >= -1e-10 * rep.eigenvalues.max()
    assert abs(rep.eigenvalues[0]) <= 1e-10


@given(N=st.integers(2, 40), h=st.floats(0.1, 5.0))
def test_neumann_closed_form(N, h):
    eig = np.linalg.eigvalsh(build_laplacian(N, 1, h, "neumann").entries)
    k = np.arange(N)
    np.testing.assert_allclose(eig, np.sort(4 / h**2 * np.sin(k * np.pi / (2 * N)) ** 2), atol=1e-9)
    np.testing.assert_allclose(eig, neumann_eigenvalues_1d(N, h), atol=1e-9)


@given(N=st.integers(2, 40))
def test_periodic_closed_form(N):
    eig = np.linalg.eigvalsh(build_laplacian(N, 1, 1.0, "periodic").entries)
    np.testing.assert_allclose(eig, periodic_eigenvalues_1d(N), atol=1e-9)


@given(N=st.integers(2, 6), d=st.integers(2, 3), bc=st.sampled_from(["neumann", "periodic"]))
def test_kronecker_sum(N, d, bc):
    one_d = np.linalg.eigvalsh(build_laplacian(N, 1, 1.0, bc).entries)
    sums = np.sort([sum(c) for c in itertools.product(one_d, repeat=d)])
    np.testing.assert_allclose(np.linalg.eigvalsh(build_laplacian(N, d, 1.0, bc).entries), sums, atol=1e-9)


def test_matrix_file_roundtrip(tmp_path):
    A = build_laplacian(3, 2, 0.5, "periodic")
    p = tmp_path / "A.txt"
    save_matrix(A, p)
    B = load_matrix(p)
    assert (B.n_side, B.dim) == (3, 2)
    np.testing.assert_array_equal(A.entries, B.entries)


def test_matrix_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 1\n1 -1\n")
    with pytest.raises(ValueError):
        load_matrix(p)
    with pytest.raises(FileNotFoundError):
        load_matrix(tmp_path / "missing.txt")


def test_all_to_all_accepted():
    n = 5
    A = from_array(n * np.eye(n) - np.ones((n, n)), n_side=n, dim=1)
    rep = validate_ha(A)
    assert rep.ha_satisfied and rep.lambda1 == pytest.approx(n)


def test_entries_read_only():
    A = build_laplacian(3, 1)
    with pytest.raises(ValueError):
        A.entries[0, 0] = 5.0
