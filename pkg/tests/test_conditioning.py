import numpy as np
import pytest

from unisplit.analysis import condition_number_bound
from unisplit.operators import DenseOperator, LinearMap
from unisplit.problems import (SchrodingerSpec, build_schrodinger_split, condition_study, double_ring_potential,
                               estimate_condition_number, extreme_singular_values, schrodinger_raw,
                               solver_inverse, split_inverse)
from unisplit.splitting import PreconditionedSystem


class TestEstimates:
    def test_dense_exact(self):
        a = np.diag([1.0, 2.0, 8.0])
        assert estimate_condition_number(DenseOperator(a)) == pytest.approx(8.0)
        assert estimate_condition_number(a) == pytest.approx(8.0)

    def test_small_map_realized(self):
        assert estimate_condition_number(LinearMap.diagonal(np.linspace(1, 5, 30))) == pytest.approx(5.0)

    def test_hermitian_lanczos(self):
        values = np.linspace(0.5, 40.0, 300)
        hi, lo = extreme_singular_values(LinearMap.diagonal(values), hermitian=True)
        assert hi == pytest.approx(40.0, rel=1e-8)
        assert lo == pytest.approx(0.5, rel=1e-8)

    def test_non_hermitian_with_solver_inverse(self):
        rng = np.random.default_rng(0)
        n = 120
        d = 1 + 9 * rng.random(n) + 2j * rng.random(n)
        op = LinearMap.diagonal(d)
        est = estimate_condition_number(op, solver="gmres20")
        exact = np.abs(d).max() / np.abs(d).min()
        assert est == pytest.approx(exact, rel=1e-6)

    def test_solver_inverse(self):
        d = np.linspace(1, 3, 100) + 0.5j
        inv = solver_inverse(LinearMap.diagonal(d), "bicgstab")
        np.testing.assert_allclose(inv.apply(np.ones(100)), 1 / d, rtol=1e-8)

    def test_solver_inverse_reports_failure(self):
        inv = solver_inverse(LinearMap.diagonal(np.full(70, -5.0)), "fp")
        with pytest.raises(RuntimeError):
            inv.apply(np.ones(70))

    def test_non_hermitian_inverse_needs_adjoint(self):
        op = LinearMap.diagonal(np.linspace(1, 2, 80))
        with pytest.raises(ValueError):
            extreme_singular_values(op, inverse=op)


class TestSchrodingerConditioning:
    def setup_class(cls):
        pot, h = double_ring_potential(n=24, extent=6.0)
        cls.spec = SchrodingerSpec(pot, h)

    def test_split_inverse_undoes_raw_operator(self):
        split = build_schrodinger_split(self.spec)
        inv = split_inverse(split)
        rng = np.random.default_rng(1)
        y = rng.standard_normal(split.dim) + 0j
        np.testing.assert_allclose(schrodinger_raw(self.spec).apply(inv.apply(y)), y, atol=1e-8)

    def test_study_matches_dense(self):
        res = condition_study(self.spec)
        H = schrodinger_raw(self.spec).to_dense()
        ev = np.linalg.eigvalsh(H)
        assert res["lambda_min"] == pytest.approx(ev[0], rel=1e-6)
        assert res["kappa_raw"] == pytest.approx(ev[-1] / ev[0], rel=1e-6)
        tuned = build_schrodinger_split(self.spec, target_norm=res["v_opt"])
        P = PreconditionedSystem(tuned).precond_op.to_dense()
        assert res["kappa_preconditioned"] == pytest.approx(np.linalg.cond(P), rel=1e-5)
        assert res["kappa_bound"] == pytest.approx(condition_number_bound(res["S"])[0])
        assert res["kappa_preconditioned"] <= res["kappa_bound"]
        assert res["improvement"] > 1


def test_identity_has_unit_condition():
    assert estimate_condition_number(LinearMap.identity(200), hermitian=True) == pytest.approx(1.0)


def test_random_spd_matches_eigenvalues():
    rng = np.random.default_rng(7)
    g = rng.standard_normal((32, 32))
    spd = g @ g.T + 0.5 * np.eye(32)
    ev = np.linalg.eigvalsh(spd)
    assert estimate_condition_number(DenseOperator(spd)) == pytest.approx(ev[-1] / ev[0], rel=0.01)
