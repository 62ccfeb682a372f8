import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ramimo import numerics
from ramimo.exceptions import ContractViolation, SingularMatrixError

from conftest import crandn


def random_hermitian(rng, n):
    a = crandn(rng, n, n)
    return a + a.conj().T


def test_eig_identity():
    w, v = numerics.hermitian_eig(np.eye(2))
    assert_allclose(w, [1, 1])
    assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-14)


def test_eig_diagonal_sorted_ascending():
    w, _ = numerics.hermitian_eig(np.diag([3.0, 1.0]))
    assert_allclose(w, [1, 3])


def test_eig_reconstruction(rng):
    a = random_hermitian(rng, 4)
    w, v = numerics.hermitian_eig(a)
    assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - a) < 1e-8


def test_eig_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        numerics.hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_rejects_nan():
    with pytest.raises(ContractViolation):
        numerics.hermitian_eig(np.array([[np.nan, 0], [0, 1.0]]))


def test_svd_zero_matrix():
    _, s, _ = numerics.svd(np.zeros((3, 2)))
    assert_allclose(s, 0)


def test_svd_rank_one():
    u = np.array([1, 1j, 0]) / np.sqrt(2)
    v = np.array([0, 1, 0, 0], dtype=complex)
    _, s, _ = numerics.svd(np.outer(u, v.conj()))
    assert_allclose(s, [1, 0, 0], atol=1e-14)


def test_svd_returns_v_not_vh(rng):
    a = crandn(rng, 2, 4)
    u, s, v = numerics.svd(a)
    assert np.linalg.norm(a - u @ np.diag(s) @ v.conj().T) < 1e-8


def test_null_space_is_orthogonal_complement(rng):
    a = crandn(rng, 2, 5)
    ns = numerics.null_space(a)
    assert ns.shape == (5, 3)
    assert np.linalg.norm(a @ ns) < 1e-12
    assert_allclose(ns.conj().T @ ns, np.eye(3), atol=1e-12)


def test_null_space_of_empty_matrix_is_everything():
    assert_allclose(numerics.null_space(np.zeros((0, 3))), np.eye(3))


def test_solve_identity(rng):
    b = crandn(rng, 3)
    assert_allclose(numerics.solve_hermitian_psd(np.eye(3), b), b)


def test_solve_scaled_identity():
    assert_allclose(numerics.solve_hermitian_psd(2 * np.eye(2), np.array([2.0, 4.0])), [1, 2])


def test_solve_random_spd(rng):
    g = crandn(rng, 5, 5)
    a = g @ g.conj().T + 0.1 * np.eye(5)
    b = crandn(rng, 5, 2)
    x = numerics.solve_hermitian_psd(a, b)
    assert np.linalg.norm(a @ x - b) < 1e-8


def test_solve_singular_reports_condition():
    with pytest.raises(SingularMatrixError) as info:
        numerics.solve_hermitian_psd(np.diag([1.0, 0.0]), np.ones(2))
    assert info.value.condition > 1e15


def test_solve_indefinite_is_rejected():
    with pytest.raises(SingularMatrixError):
        numerics.solve_hermitian_psd(np.diag([1.0, -1.0]), np.ones(2))


def test_logdet_identity_and_diagonal():
    assert numerics.log2_det_psd(np.eye(3)) == 0.0
    assert_allclose(numerics.log2_det_psd(np.diag([2.0, 2.0])), 2.0)


def test_logdet_matches_eigenvalue_product(rng):
    g = crandn(rng, 4, 3)
    a = np.eye(4) + g @ g.conj().T
    oracle = np.log2(np.prod(np.linalg.eigvalsh(a)))
    assert_allclose(numerics.log2_det_psd(a), oracle, rtol=1e-9)


def test_logdet_rejects_eigenvalue_below_one():
    with pytest.raises(ContractViolation):
        numerics.log2_det_psd(np.diag([0.5, 2.0]))


def test_project_psd_clips_negative_part():
    out = numerics.project_psd(np.diag([2.0, -1.0]))
    assert_allclose(out, np.diag([2.0, 0.0]), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_eig_property_unitary_and_real(n, seed):
    a = random_hermitian(np.random.default_rng(seed), n)
    w, v = numerics.hermitian_eig(a)
    assert np.all(np.diff(w) >= -1e-12)
    assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
    assert_allclose(v @ np.diag(w) @ v.conj().T, a, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 5), n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_svd_property_descending_nonnegative(m, n, seed):
    a = crandn(np.random.default_rng(seed), m, n)
    u, s, v = numerics.svd(a)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 1e-12)
    assert_allclose(u @ np.diag(s) @ v.conj().T, a, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), k=st.integers(0, 5), seed=st.integers(0, 2**32 - 1))
def test_logdet_property_nonnegative(n, k, seed):
    g = crandn(np.random.default_rng(seed), n, k)
    assert numerics.log2_det_psd(np.eye(n) + g @ g.conj().T) >= 0.0
