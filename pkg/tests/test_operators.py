import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unisplit.operators import (CapabilityError, ComplexVector, DenseOperator, LinearMap, NormEstimateWarning,
                                SingularOperatorError, accretivity_lower_bound, compose, dense_inverse, inner,
                                lincomb, norm, operator_norm_estimate, random_unit_vectors)


def _random_matrix(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


class TestComplexVector:
    def test_real_input_becomes_complex(self):
        v = ComplexVector(np.arange(6.0), (2, 3))
        assert v.data.dtype == np.complex128
        assert v.grid.shape == (2, 3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ComplexVector(np.zeros(5), (2, 3))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ComplexVector(np.array([1.0, np.nan]))

    def test_spacing_must_match_axes(self):
        with pytest.raises(ValueError):
            ComplexVector(np.zeros(4), (2, 2), spacing=(0.1,))

    def test_zeros_keeps_dtype(self):
        v = ComplexVector.zeros((4,), dtype=np.complex64)
        assert v.data.dtype == np.complex64 and len(v) == 4


class TestLinearMap:
    def test_apply_counts_evaluations(self):
        m = DenseOperator(np.eye(3))
        x = np.ones(3, dtype=complex)
        for _ in range(4):
            m.apply(x)
        assert m.evals == 4
        m.reset_counter()
        assert m.evals == 0

    def test_counter_is_thread_safe(self):
        m = LinearMap.identity(2)
        x = np.zeros(2, dtype=complex)

        def work():
            for _ in range(500):
                m.apply(x)

        threads = [threading.Thread(target=work) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert m.evals == 2000

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            LinearMap.identity(3).apply(np.zeros(2))

    def test_missing_adjoint(self):
        m = LinearMap(2, lambda x: 2 * x)
        with pytest.raises(CapabilityError):
            m.adjoint_apply(np.zeros(2))
        with pytest.raises(CapabilityError):
            m.H

    @pytest.mark.parametrize("seed", range(3))
    def test_adjoint_identity(self, seed):
        a = _random_matrix(5, seed)
        m = DenseOperator(a)
        rng = np.random.default_rng(seed + 10)
        x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        np.testing.assert_allclose(inner(y, m.apply(x)), inner(m.adjoint_apply(y), x), rtol=1e-12)

    def test_algebra_matches_dense(self):
        a, b = _random_matrix(4, 0), _random_matrix(4, 1)
        A, B = DenseOperator(a), DenseOperator(b)
        np.testing.assert_allclose((A + B).to_dense(), a + b)
        np.testing.assert_allclose((A - B).to_dense(), a - b)
        np.testing.assert_allclose((2j * A).to_dense(), 2j * a)
        np.testing.assert_allclose(compose(A, B).to_dense(), a @ b)
        np.testing.assert_allclose((A @ B).H.to_dense(), (a @ b).conj().T, atol=1e-12)
        np.testing.assert_allclose(lincomb((1j, A), (2.0, B)).H.to_dense(), (1j * a + 2 * b).conj().T)

    def test_compose_rejects_mismatched(self):
        with pytest.raises(ValueError):
            compose(LinearMap.identity(2), LinearMap.identity(3))

    def test_diagonal(self):
        d = LinearMap.diagonal([1, 2j, 3])
        np.testing.assert_allclose(d.apply(np.ones(3)), [1, 2j, 3])
        np.testing.assert_allclose(d.adjoint_apply(np.ones(3)), [1, -2j, 3])

    def test_from_sparse_matrix(self):
        import scipy.sparse
        m = scipy.sparse.random(6, 6, density=0.5, random_state=0, format="csr") * (1 + 1j)
        op = LinearMap.from_matrix(m)
        np.testing.assert_allclose(op.to_dense(), m.toarray())
        np.testing.assert_allclose(op.H.to_dense(), m.toarray().conj().T)


class TestDenseOperator:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            DenseOperator(np.zeros((2, 3)))

    def test_size_limit(self):
        with pytest.raises(ValueError):
            DenseOperator(np.eye(65))

    def test_cond(self):
        assert DenseOperator(np.diag([1.0, 4.0])).cond() == pytest.approx(4.0)

    def test_inverse(self):
        a = _random_matrix(5, 3)
        np.testing.assert_allclose(dense_inverse(DenseOperator(a)).entries @ a, np.eye(5), atol=1e-10)

    def test_singular_inverse(self):
        with pytest.raises(SingularOperatorError):
            dense_inverse(DenseOperator(np.ones((3, 3))))


class TestEstimates:
    def test_random_unit_vectors(self):
        v = random_unit_vectors(7, 5, seed=1)
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
        np.testing.assert_array_equal(v, random_unit_vectors(7, 5, seed=1))

    @pytest.mark.parametrize("seed", range(4))
    def test_norm_estimate_matches_svd(self, seed):
        a = _random_matrix(20, seed)
        est = operator_norm_estimate(DenseOperator(a), max_iters=5000, tol=1e-12)
        assert est == pytest.approx(np.linalg.norm(a, 2), rel=1e-6)

    def test_norm_estimate_large_map(self):
        values = np.linspace(0.1, 3.0, 500)
        est = operator_norm_estimate(LinearMap.diagonal(values), max_iters=5000)
        assert est == pytest.approx(3.0, rel=1e-6)

    def test_norm_estimate_warns(self):
        with pytest.warns(NormEstimateWarning):
            operator_norm_estimate(LinearMap.diagonal(np.linspace(0.9, 1.0, 100)), max_iters=2)

    def test_norm_without_adjoint_too_large(self):
        with pytest.raises(CapabilityError):
            operator_norm_estimate(LinearMap(100, lambda x: x))

    def test_accretivity_dense_is_exact(self):
        a = np.diag([1.0, -0.5]) + np.array([[0, 3], [-3, 0]])
        assert accretivity_lower_bound(DenseOperator(a)) == pytest.approx(-0.5)

    def test_accretivity_sampled_is_upper_bound(self):
        values = np.concatenate([np.full(99, 2.0), [0.5]]) + 1j
        lb = accretivity_lower_bound(LinearMap.diagonal(values), n_samples=30)
        assert 0.5 <= lb <= 2.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=1,
                max_size=20))
def test_norm_and_inner_agree(values):
    x = np.array(values, dtype=complex)
    assert norm(x) == pytest.approx(np.sqrt(inner(x, x).real), rel=1e-12, abs=1e-12)
