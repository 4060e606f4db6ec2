import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from unisplit.analysis import (CandidatePreconditioner, LemmaMismatchError, alpha_max_dense, bound_report_dense,
                               condition_number_bound, contraction_norm_dense, contraction_norm_rayleigh,
                               convergence_rate_bound, hermitian_rate_profile, random_accretive,
                               random_discrepancy, random_hermitian_psd, real_part, uniqueness_counterexample)
from unisplit.operators import SingularOperatorError


def _pair(seed, n=5, v_norm=0.95):
    rng = np.random.default_rng(seed)
    A = random_accretive(n, rng, margin=0.01)
    V = random_discrepancy(n, rng, v_norm)
    return A, np.eye(n) - V


class TestRandomInstances:
    def test_accretive_margin(self):
        rng = np.random.default_rng(0)
        assert real_part(random_accretive(6, rng, margin=0.3)) == pytest.approx(0.3)

    def test_hermitian_psd(self):
        rng = np.random.default_rng(1)
        H = random_hermitian_psd(6, rng, margin=0.05)
        np.testing.assert_allclose(H, H.conj().T)
        assert np.linalg.eigvalsh(H)[0] == pytest.approx(0.05)

    @pytest.mark.parametrize("hermitian", [False, True])
    def test_discrepancy_norm(self, hermitian):
        V = random_discrepancy(5, np.random.default_rng(2), 0.7, hermitian)
        assert np.linalg.norm(V, 2) == pytest.approx(0.7)
        if hermitian:
            np.testing.assert_allclose(V, V.conj().T)


class TestContraction:
    @pytest.mark.parametrize("seed", range(10))
    def test_two_routes_agree(self, seed):
        A, B = _pair(seed)
        for alpha in (0.3, 0.75, 1.0):
            svd = contraction_norm_dense(A, B, alpha, check=False)
            assert contraction_norm_rayleigh(A, B, alpha) == pytest.approx(svd, rel=1e-8)

    def test_zero_alpha_is_identity(self):
        A, B = _pair(0)
        assert contraction_norm_dense(A, B, 0.0) == pytest.approx(1.0)

    def test_rayleigh_needs_positive_alpha(self):
        A, B = _pair(0)
        with pytest.raises(ValueError):
            contraction_norm_rayleigh(A, B, 0.0)

    def test_singular_sum(self):
        A = np.zeros((2, 2))
        B = np.zeros((2, 2))
        with pytest.raises(SingularOperatorError):
            contraction_norm_dense(A, B, 0.5)

    def test_mismatch_raises(self, monkeypatch):
        import unisplit.analysis as an
        A, B = _pair(3)
        monkeypatch.setattr(an, "contraction_norm_rayleigh", lambda *a: 42.0)
        with pytest.raises(LemmaMismatchError):
            an.contraction_norm_dense(A, B, 0.5)

    def test_non_accretive_can_expand(self):
        # -1 is not accretive: the preconditioned iteration need not contract
        A = -np.eye(2) * 0.5
        B = np.eye(2)
        assert contraction_norm_dense(A, B, 0.75) > 1


class TestAlphaMax:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_bisection(self, seed):
        A, B = _pair(seed)

        def excess(a):
            return contraction_norm_dense(A, B, a, check=False) - 1.0

        # the norm exceeds 1 for large steps; locate the crossing directly
        hi = 1.0
        while excess(hi) < 0:
            hi *= 2
        crossing = scipy.optimize.brentq(excess, 1e-6 if excess(1e-6) < 0 else hi / 2, hi, xtol=1e-12)
        assert alpha_max_dense(A, B) == pytest.approx(crossing, rel=1e-5)


class TestBounds:
    @settings(max_examples=60, deadline=None)
    @given(st.floats(1e-3, 1e4))
    def test_kappa_bound_is_minimum_of_profile(self, S):
        kappa, v_opt = condition_number_bound(S)

        def profile(v):
            return (S / v + 1 / (1 - v)) * (1 + v)

        res = scipy.optimize.minimize_scalar(profile, bounds=(1e-9, 1 - 1e-9), method="bounded",
                                             options={"xatol": 1e-12})
        assert kappa == pytest.approx(res.fun, rel=1e-6)
        assert profile(v_opt) == pytest.approx(kappa, rel=1e-12)

    @pytest.mark.parametrize("S", [0.01, 0.5, 2.0, 50.0])
    def test_hermitian_rate_at_optimum(self, S):
        _, v_opt = condition_number_bound(S)
        assert hermitian_rate_profile(S, v_opt) == pytest.approx(convergence_rate_bound(S, True), rel=1e-12)

    @pytest.mark.parametrize("S", [0.01, 1.0, 100.0])
    def test_general_rate(self, S):
        kappa, _ = condition_number_bound(S)
        assert convergence_rate_bound(S) == pytest.approx(math.sqrt(1 - kappa ** -2), rel=1e-12)
        assert convergence_rate_bound(S, True) < 1 and convergence_rate_bound(S) < 1

    def test_rate_tiny_S_resolves(self):
        # 1 - (1 + sqrt(2S))^-4 must not round to zero for small S
        assert convergence_rate_bound(1e-12) > 0

    def test_nonpositive_S(self):
        with pytest.raises(ValueError):
            condition_number_bound(0.0)
        with pytest.raises(ValueError):
            convergence_rate_bound(-1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_report_holds(self, seed):
        rng = np.random.default_rng(seed)
        A = random_accretive(5, rng, margin=0.05)
        V = random_discrepancy(5, rng, 0.5)
        rep = bound_report_dense(A, V)
        assert rep.holds
        assert rep.v_norm == pytest.approx(condition_number_bound(rep.S)[1])

    def test_report_without_rescale_uses_profile(self):
        rng = np.random.default_rng(9)
        A = random_accretive(4, rng, margin=0.5)
        V = random_discrepancy(4, rng, 0.95)
        rep = bound_report_dense(A, V, rescale=False)
        assert rep.v_norm == pytest.approx(0.95)
        assert rep.kappa_bound == pytest.approx((rep.S / 0.95 + 1 / 0.05) * 1.95)
        assert rep.holds

    def test_hermitian_requires_hermitian(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            bound_report_dense(random_accretive(3, rng, 0.1), random_discrepancy(3, rng), hermitian=True)


class TestUniqueness:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.B = np.eye(4) - random_discrepancy(4, rng, 0.5)
        self.universal = CandidatePreconditioner.universal(self.B)

    def test_universal_flags(self):
        assert self.universal.is_universal
        assert not CandidatePreconditioner(self.B, self.B, 0.75, 0.1).is_universal
        assert not CandidatePreconditioner(self.B, self.B, 0.75j, 0).is_universal

    def test_preconditioned_matches_formula(self):
        A = random_accretive(4, np.random.default_rng(3), 0.1)
        expect = 0.75 * self.B @ np.linalg.solve(A + self.B, A)
        np.testing.assert_allclose(self.universal.preconditioned(A), expect, atol=1e-12)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            CandidatePreconditioner(self.B, np.eye(3), 0.75, 0)

    def test_unknown_condition(self):
        with pytest.raises(ValueError):
            uniqueness_counterexample(7, self.universal)

    @pytest.mark.parametrize("condition", [1, 2, 3, 4, 5, "adjoint"])
    def test_universal_never_violated(self, condition):
        ce = uniqueness_counterexample(condition, self.universal)
        assert not ce.violates

    def test_witness_is_real_violation(self):
        cand = CandidatePreconditioner(self.B, self.B, 0.75, 0.1)
        ce = uniqueness_counterexample(1, cand)
        M = np.eye(4) - cand.preconditioned(ce.A)
        w = ce.witness
        assert np.linalg.norm(M @ w) > np.linalg.norm(w)
        assert real_part(ce.A) >= -1e-12
