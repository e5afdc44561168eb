import numpy as np
import pytest
from hypothesis import given, strategies as st

from sunkit.errors import ConvergenceFailure, DimensionMismatch, NotMonomial, NotPositiveDefinite, Singular
from sunkit.numlin import (
    Permutation,
    apply_perm_vec,
    cholesky,
    conjugate_by_perm,
    eigen_sym,
    is_positive_definite,
    monomial_factorize,
    orthant_order_preserved,
    random_permutation,
    sym,
)

perms = st.integers(1, 7).flatmap(lambda m: st.permutations(list(range(m)))).map(Permutation)


def test_sym_copies_lower_triangle():
    M = sym([[1.0, 9.0], [2.0, 3.0]])
    assert np.array_equal(M, [[1.0, 2.0], [2.0, 3.0]])
    assert np.array_equal(M, M.T)


def test_sym_keeps_negative_zero():
    M = sym([[1.0, 0.0], [-0.0, 1.0]])
    assert np.signbit(M[0, 1]) and np.signbit(M[1, 0])


def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(2)), np.eye(2))


def test_cholesky_2x2():
    assert np.allclose(cholesky([[4, 2], [2, 5]]), [[2, 0], [1, 2]], atol=1e-15)


def test_cholesky_indefinite():
    with pytest.raises(NotPositiveDefinite) as e:
        cholesky([[1, 2], [2, 1]], "probe")
    assert e.value.block == "probe"


def test_cholesky_relative_pivot_threshold():
    # well conditioned but tiny scale is fine
    assert is_positive_definite(1e-20 * np.eye(3))
    eps = 1e-14
    assert not is_positive_definite([[1.0, 1.0 - eps], [1.0 - eps, 1.0]])


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_cholesky_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n + 3))
    M = A @ A.T
    L = cholesky(M)
    assert np.all(np.diag(L) > 0)
    assert np.allclose(L, np.tril(L))
    assert np.max(np.abs(L @ L.T - M)) <= 1e-10 * np.max(np.abs(M))


def test_eigen_identity():
    vals, _ = eigen_sym(np.eye(3))
    assert np.array_equal(vals, [1.0, 1.0, 1.0])


def test_eigen_diagonal():
    vals, vecs = eigen_sym([[2, 0], [0, 1]])
    assert np.array_equal(vals, [2.0, 1.0])
    assert np.array_equal(np.abs(vecs), np.eye(2))


def test_eigen_equicorrelation():
    rho, m = 0.5, 3
    # oracle: eigenvalues 1 + (m-1) rho and 1 - rho (multiplicity m-1)
    R = (1 - rho) * np.eye(m) + rho * np.ones((m, m))
    vals, vecs = eigen_sym(R)
    assert np.allclose(vals, [1 + (m - 1) * rho, 1 - rho, 1 - rho], atol=1e-12)
    assert np.allclose(R @ vecs, vecs * vals, atol=1e-10)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_eigen_residual_and_order(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    M = sym(A + A.T)
    vals, vecs = eigen_sym(M)
    assert np.all(np.diff(vals) <= 0)
    assert np.max(np.abs(M @ vecs - vecs * vals)) <= 1e-8
    assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)
    assert np.allclose(np.sort(vals), np.linalg.eigvalsh(M), atol=1e-9)


def test_eigen_sweep_cap():
    M = np.array([[1.0, 0.4, 0.2], [0.4, 2.0, 0.3], [0.2, 0.3, 3.0]])
    with pytest.raises(ConvergenceFailure):
        eigen_sym(M, max_sweeps=1)


def test_apply_perm_vec_examples():
    assert apply_perm_vec(Permutation.identity(3), [1, 2, 3]).tolist() == [1, 2, 3]
    assert apply_perm_vec(Permutation((1, 0)), [5, 7]).tolist() == [7, 5]
    assert apply_perm_vec(Permutation((2, 0, 1)), ["a", "b", "c"]).tolist() == ["c", "a", "b"]
    with pytest.raises(DimensionMismatch):
        apply_perm_vec(Permutation((1, 0)), [1, 2, 3])


def test_conjugate_examples():
    M = np.array([[1, 0.3], [0.3, 1]])
    assert np.array_equal(conjugate_by_perm(Permutation((1, 0)), M), M)
    assert np.array_equal(conjugate_by_perm(Permutation.identity(2), M), M)
    out = conjugate_by_perm(Permutation((2, 0, 1)), np.diag([1.0, 2.0, 3.0]))
    assert np.array_equal(out, np.diag([3.0, 1.0, 2.0]))


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0))
    with pytest.raises(ValueError):
        Permutation((1, 2))


@given(perms)
def test_permutation_matrix_properties(p):
    P = p.matrix()
    m = p.order
    assert np.array_equal(P @ P.T, np.eye(m))
    assert np.array_equal(P @ np.ones(m), np.ones(m))
    assert Permutation.from_matrix(P) == p
    v = np.arange(m, dtype=float) * 1.5
    assert np.array_equal(P @ v, apply_perm_vec(p, v))


@given(perms, st.integers(0, 2**32 - 1))
def test_compose_matches_matrix_product(p, seed):
    q = random_permutation(p.order, np.random.default_rng(seed))
    assert np.array_equal((p @ q).matrix(), p.matrix() @ q.matrix())
    assert (p @ p.inverse()).is_identity


@given(perms, st.integers(0, 2**32 - 1))
def test_conjugation_inverse_round_trip(p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p.order, p.order))
    M = sym(A + A.T)
    back = conjugate_by_perm(p.inverse(), conjugate_by_perm(p, M))
    assert np.array_equal(back, M)
    assert np.array_equal(conjugate_by_perm(p, M), p.matrix() @ M @ p.matrix().T)
    assert np.allclose(np.linalg.eigvalsh(conjugate_by_perm(p, M)), np.linalg.eigvalsh(M))


def test_monomial_examples():
    dec = monomial_factorize([[0, 2], [3, 0]])
    assert dec.diag.tolist() == [2.0, 3.0] and dec.perm.map == (1, 0)
    dec = monomial_factorize(np.eye(4))
    assert dec.diag.tolist() == [1.0] * 4 and dec.perm.is_identity
    with pytest.raises(NotMonomial):
        monomial_factorize([[1, 1], [0, 1]])
    with pytest.raises(NotMonomial):
        monomial_factorize([[-1, 0], [0, 1]])
    with pytest.raises(Singular):
        monomial_factorize([[0, 0], [0, 1]])
    with pytest.raises(Singular):
        monomial_factorize([[1, 0], [2, 0]])


def test_monomial_ignores_roundoff_entries():
    A = np.array([[0.0, 2.0], [3.0, 1e-16]])
    assert monomial_factorize(A).perm.map == (1, 0)


@given(perms, st.integers(0, 2**32 - 1))
def test_monomial_recovers_exactly(p, seed):
    rng = np.random.default_rng(seed)
    diag = rng.uniform(0.01, 100.0, p.order)
    A = diag[:, None] * p.matrix()
    dec = monomial_factorize(A)
    assert np.array_equal(dec.diag, diag) and dec.perm == p
    assert np.array_equal(dec.matrix(), A)


def test_order_examples():
    assert orthant_order_preserved(np.diag([2.0, 3.0])).passed
    assert orthant_order_preserved([[0.0, 1.0], [1.0, 0.0]]).passed
    rep = orthant_order_preserved([[1.0, -1.0], [0.0, 1.0]])
    assert not rep.passed and rep.direction == "forward"
    x, y = rep.witness
    assert x.tolist() == [0.0, 0.0] and y.tolist() == [0.0, 1.0]
    A = np.array([[1.0, -1.0], [0.0, 1.0]])
    assert (A @ y)[0] == -1.0 < (A @ x)[0]


def test_order_reverse_direction():
    # nonnegative but the inverse has a negative entry
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    rep = orthant_order_preserved(A)
    assert not rep.passed and rep.direction == "reverse"
    x, y = rep.witness
    assert np.all(A @ x <= A @ y + 1e-12) and not np.all(x <= y)


def test_order_singular():
    with pytest.raises(Singular):
        orthant_order_preserved([[1.0, 2.0], [2.0, 4.0]])
