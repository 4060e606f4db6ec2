import numpy as np
import pytest
import scipy.fft

from unisplit.operators import accretivity_lower_bound
from unisplit.problems import (DiffusionSpec, HelmholtzSpec, PantographSpec, SchrodingerSpec, anisotropic_tensor,
                               build_diffusion_split, build_helmholtz_split, build_pantograph_split,
                               build_schrodinger_split, derivative_matrix, dilation_matrix, pantograph_raw,
                               point_source_green_1d, reference_solution, schrodinger_raw, slab_profile)
from unisplit.solvers import SolverConfig, fixed_point_solve, solve
from unisplit.splitting import PreconditionedSystem
from unisplit.analysis import contraction_norm_dense


def _solve(split, tol=1e-10, alg="fp"):
    x, rep = solve(split, alg, config=SolverConfig(tol=tol, max_iter=30000))
    assert rep.converged, rep.status
    return split.view(x.data).data


class TestHelmholtz:
    def test_gain_rejected(self):
        with pytest.raises(ValueError):
            HelmholtzSpec(k2=np.array([1.0, 1.0 - 0.5j]), source=np.zeros(2), spacing=0.1)

    def test_bad_bias(self):
        with pytest.raises(ValueError):
            HelmholtzSpec(k2=np.ones(4), source=np.zeros(4), spacing=0.1, bias="imaginary")

    def test_homogeneous_has_no_discrepancy(self):
        spec = HelmholtzSpec(k2=np.full(16, 4.0 + 1j), source=np.zeros(16), spacing=0.2, absorber_width=0)
        split = build_helmholtz_split(spec)
        assert split.certified_V_norm == 0 and split.scale.degenerate
        pre = PreconditionedSystem(split)
        norm = np.linalg.norm(pre.M_op.to_dense(), 2)
        assert norm < 1
        # with V = 0 the contraction norm is that of a dense pair with B = 1
        A = split.forward.to_dense()
        assert norm == pytest.approx(contraction_norm_dense(A, np.eye(16), split.alpha), rel=1e-10)

    def test_plane_wave_is_eigenfunction(self):
        n, h = 32, 0.25
        spec = HelmholtzSpec(k2=np.full(n, 3.0 + 0.5j), source=np.zeros(n), spacing=h, absorber_width=0)
        split = build_helmholtz_split(spec)
        c, kb = split.info["c"], split.info["bias"]
        x = np.arange(n) * h
        for m in (0, 3, -5):
            p = 2 * np.pi * m / (n * h)
            wave = np.exp(1j * p * x)
            out = split.inv_L_plus_I.apply(wave)
            np.testing.assert_allclose(out, c / (-p ** 2 + kb + c) * wave, atol=1e-12)

    def test_discrepancy_bounded_by_target(self):
        rng = np.random.default_rng(0)
        k2 = 30 + 10 * rng.random((12, 12)) + 2j * rng.random((12, 12))
        split = build_helmholtz_split(HelmholtzSpec(k2, np.zeros_like(k2), 0.1, absorber_width=4),
                                      target_norm=0.8)
        assert split.certified_V_norm == pytest.approx(0.8)
        assert accretivity_lower_bound(split.forward, n_samples=20) >= -1e-10

    def test_real_bias_center_is_real(self):
        k2 = np.array([10.0, 12.0 + 8j, 11.0 + 3j])
        split = build_helmholtz_split(HelmholtzSpec(k2, np.zeros(3), 0.1, absorber_width=2, bias="real"))
        assert split.info["bias"].imag == 0

    def test_point_source_green_function(self):
        k, dx, n, w = 2 * np.pi, 1 / 8, 512, 128
        src = np.zeros(n, dtype=complex)
        src[n // 2] = -1 / dx  # δ on the right-hand side of ∇²ψ + k²ψ
        spec = HelmholtzSpec(np.full(n, k * k + 0j), src, dx, absorber_width=w)
        u = _solve(build_helmholtz_split(spec), tol=1e-9)
        xs = (np.arange(n) - n // 2) * dx
        g = point_source_green_1d(xs, 0.0, k)
        mask = np.abs(xs) > 2.0
        err = np.linalg.norm((u - g)[mask]) / np.linalg.norm(g[mask])
        assert err < 0.01


class TestDiffusion:
    def test_non_accretive_D(self):
        with pytest.raises(ValueError):
            DiffusionSpec(D=np.array([1.0, -1.0]), a=np.zeros(2), source=np.zeros(2), spacing=0.1)

    def test_negative_absorption(self):
        with pytest.raises(ValueError):
            DiffusionSpec(D=np.ones(2), a=np.array([0.0, -0.1]), source=np.zeros(2), spacing=0.1)

    def test_time_dependent_unsupported(self):
        with pytest.raises(NotImplementedError):
            DiffusionSpec(D=np.ones(2), a=np.zeros(2), source=np.zeros(2), spacing=0.1, stationary=False)

    def test_anisotropic_tensor(self):
        D = anisotropic_tensor(np.array([[1.0, 1.0]]), 4.0, 1.0)[0]
        t = np.array([1, 1]) / np.sqrt(2)
        np.testing.assert_allclose(D @ t, 4 * t)
        np.testing.assert_allclose(D @ np.array([-t[1], t[0]]), [-t[1], t[0]])

    def test_slab_profile_solution(self):
        n, dx, T, ze, D = 256, 0.1, 128, 0.6, 1.0
        start = (n - T) // 2
        a = np.full(n, D / ze ** 2)
        a[start:start + T] = 0
        src = np.zeros(n)
        js = start + T // 4
        src[js] = 1 / dx
        u = _solve(build_diffusion_split(DiffusionSpec(np.full(n, D), a, src, dx)))
        # the slab starts half a cell before its first node
        z = (np.arange(n) - start + 0.5) * dx
        prof = slab_profile(z, z[js], T * dx, ze, D)
        m = (z >= 0) & (z <= T * dx)
        assert np.linalg.norm((u - prof)[m]) / np.linalg.norm(prof[m]) < 0.02

    def test_slab_profile_continuity_and_flux(self):
        z = np.linspace(0, 10, 10001)
        u = slab_profile(z, 3.0, 10.0, 0.5, 2.0)
        i = np.searchsorted(z, 3.0)
        slope_left = (u[i] - u[i - 10]) / (z[i] - z[i - 10])
        slope_right = (u[i + 20] - u[i + 10]) / (z[i + 20] - z[i + 10])
        assert 2.0 * (slope_left - slope_right) == pytest.approx(1.0, rel=1e-6)

    def test_matches_dense_spectral_solve(self):
        n, h = 9, 0.5  # odd, so that no Nyquist mode makes the derivative ambiguous
        rng = np.random.default_rng(3)
        dirs = rng.standard_normal((n, n, 2))
        D = anisotropic_tensor(dirs, 3.0, 1.0) * (1 + rng.random((n, n)))[..., None, None]
        a = 0.2 + rng.random((n, n))
        src = rng.standard_normal((n, n))
        spec = DiffusionSpec(D, a, src, (h, h))
        u = _solve(build_diffusion_split(spec), tol=1e-12, alg="gmres20")

        p = 2 * np.pi * scipy.fft.fftfreq(n, h)
        F = scipy.fft.fft(np.eye(n), axis=0)
        d1 = np.linalg.inv(F) @ np.diag(1j * p) @ F
        eye = np.eye(n)
        grad = [np.kron(d1, eye), np.kron(eye, d1)]
        K = np.zeros((n * n, n * n), dtype=complex)
        for i in range(2):
            for j in range(2):
                K -= grad[i] @ np.diag(D[..., i, j].reshape(-1)) @ grad[j]
        K += np.diag(a.reshape(-1))
        expect = np.linalg.solve(K, src.reshape(-1))
        np.testing.assert_allclose(u.reshape(-1), expect, atol=1e-8 * np.abs(expect).max())

    def test_canonical_operator_accretive(self):
        n = 16
        D = np.where(np.arange(n) < 8, 1.0, 5.0)
        spec = DiffusionSpec(D, np.full(n, 0.1), np.zeros(n), 0.2)
        split = build_diffusion_split(spec)
        assert split.certified_V_norm <= 0.95 + 1e-12
        assert accretivity_lower_bound(split.forward) >= -1e-10


def _decay_spec(**kw):
    base = dict(lam=0.5, a=2.0, b=0.0, x0=lambda t: np.exp(-50 * (np.asarray(t) - 1) ** 2), t0=1.0, t_end=6.0,
                dt=0.01)
    base.update(kw)
    return PantographSpec(**base)


class TestPantograph:
    def test_derivative_is_antisymmetric(self):
        Dt = derivative_matrix(7, 0.1).toarray()
        np.testing.assert_allclose(Dt, -Dt.T)

    def test_derivative_exact_for_quadratics_inside(self):
        t = np.arange(1, 11) * 0.1
        Dt = derivative_matrix(10, 0.1)
        np.testing.assert_allclose((Dt @ t ** 2)[1:-1], 2 * t[1:-1], rtol=1e-12)

    def test_dilation_interpolates_linear_functions(self):
        spec = _decay_spec(lam=0.7, x0=lambda t: 3 * np.asarray(t) + 1)
        Dil, hist = dilation_matrix(spec)
        t = spec.times
        f = 3 * t + 1
        np.testing.assert_allclose(Dil @ f + hist, 3 * spec.lam * t + 1, rtol=1e-12)

    def test_lam_above_one_rejected(self):
        with pytest.raises(ValueError):
            dilation_matrix(_decay_spec(lam=1.5))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            _decay_spec(lam=0)
        with pytest.raises(ValueError):
            _decay_spec(dt=-1)
        with pytest.raises(ValueError):
            _decay_spec(t_end=1.0)

    def test_pure_decay(self):
        spec = _decay_spec()
        x = _solve(build_pantograph_split(spec))
        exact = np.exp(-2 * (spec.times - 1))
        assert np.max(np.abs(x - exact)) < 1e-3

    def test_matches_direct_solve(self):
        spec = _decay_spec(a=lambda t: 1.0 + 0.5j * np.asarray(t), b=-1.5, t_end=3.0)
        Dt, a, b, Dil, rhs = pantograph_raw(spec)
        M = Dt.toarray() + np.diag(a) + np.diag(b) @ Dil.toarray()
        direct = np.linalg.solve(M, rhs)
        x = _solve(build_pantograph_split(spec), tol=1e-11, alg="gmres20")
        np.testing.assert_allclose(x, direct, atol=1e-7)

    def test_antisymmetric_matches_direct_solve(self):
        spec = _decay_spec(lam=0.9, a=0.1, b=-5.0, t_end=1.5)
        Dt, a, b, Dil, rhs = pantograph_raw(spec)
        direct = np.linalg.solve(Dt.toarray() + np.diag(a) + np.diag(b) @ Dil.toarray(), rhs)
        split = build_pantograph_split(spec, antisymmetric=True)
        assert accretivity_lower_bound(split.forward, n_samples=10) == pytest.approx(0, abs=1e-10)
        x = _solve(split, tol=1e-11, alg="gmres20")
        np.testing.assert_allclose(x, direct, atol=1e-7 * np.abs(direct).max())

    def test_reference_solver_on_decay(self):
        spec = _decay_spec()
        np.testing.assert_allclose(reference_solution(spec), np.exp(-2 * (spec.times - 1)), rtol=1e-7)

    def test_against_reference_in_interior(self):
        # the grid imposes zero past its end, so compare away from t_end
        spec = _decay_spec(lam=0.5, a=lambda t: np.where(np.asarray(t) < 4, 1.0, 1.0 - 2j), b=0.8, t_end=10.0)
        x = _solve(build_pantograph_split(spec), tol=1e-11, alg="gmres20")
        ref = reference_solution(spec)
        m = spec.times <= 7
        assert np.max(np.abs(x - ref)[m]) / np.max(np.abs(ref)) < 0.05

    def test_second_order_away_from_end(self):
        errs = []
        for dt in (0.02, 0.01):
            spec = _decay_spec(lam=0.5, a=1.0, b=0.8, t_end=12.0, dt=dt)
            x = _solve(build_pantograph_split(spec), tol=1e-12, alg="gmres20")
            ref = reference_solution(spec)
            m = spec.times <= 7
            errs.append(np.max(np.abs(x - ref)[m]))
        assert 3.0 < errs[0] / errs[1] < 5.0


class TestSchrodinger:
    def test_complex_potential_rejected(self):
        with pytest.raises(ValueError):
            SchrodingerSpec(np.array([1.0, 1j]), 0.1)

    def test_unbounded_rejected(self):
        with pytest.raises(ValueError):
            SchrodingerSpec(np.array([1.0, np.inf]), 0.1)

    def test_forward_is_scaled_raw(self):
        rng = np.random.default_rng(0)
        spec = SchrodingerSpec(rng.random((6, 6)) * 4, (0.3, 0.3), shift=1.0)
        split = build_schrodinger_split(spec)
        c = split.scale.scalar_scale
        np.testing.assert_allclose(split.forward.to_dense() * c, schrodinger_raw(spec).to_dense(), atol=1e-10)
        H = schrodinger_raw(spec).to_dense()
        np.testing.assert_allclose(H, H.conj().T, atol=1e-12)

    def test_constant_potential(self):
        split = build_schrodinger_split(SchrodingerSpec(np.full(8, 2.0), 0.5))
        assert split.certified_V_norm == 0 and split.scale.degenerate


class TestModelExamples:
    def test_unit_dilation_is_identity(self):
        Dil, hist = dilation_matrix(_decay_spec(lam=1.0, t_end=2.0))
        np.testing.assert_allclose(Dil.toarray(), np.eye(Dil.shape[0]))
        assert not np.any(hist)

    def test_free_particle_plane_waves(self):
        n, h, shift = 16, 0.4, 0.7
        spec = SchrodingerSpec(np.zeros((n, n)), (h, h), shift=shift)
        H = schrodinger_raw(spec)
        x = np.arange(n) * h
        X, Y = np.meshgrid(x, x, indexing="ij")
        px, py = 2 * np.pi * 2 / (n * h), 2 * np.pi * -3 / (n * h)
        wave = np.exp(1j * (px * X + py * Y)).reshape(-1)
        np.testing.assert_allclose(H.apply(wave), (0.5 * (px ** 2 + py ** 2) + shift) * wave, atol=1e-10)
        assert build_schrodinger_split(spec).certified_V_norm == 0

    def test_row_problem_decays_where_delay_term_is_off(self):
        from unisplit.problems.catalog import pantograph_row_spec
        spec = pantograph_row_spec()
        x = _solve(build_pantograph_split(spec), tol=1e-10, alg="gmres20")
        t = spec.times
        # the stencil's alternating mode, excited where b switches back on at
        # t = 5, decays leftward and swamps the true solution near t = 5
        m = (t >= 3.2) & (t <= 4.0)
        slope = np.polyfit(t[m], np.log(np.abs(x[m])), 1)[0]
        assert slope == pytest.approx(-5.0, rel=0.02)

    @pytest.mark.parametrize("builder", ["helmholtz", "diffusion", "schrodinger"])
    def test_round_trip_of_L_plus_one(self, builder):
        rng = np.random.default_rng(2)
        if builder == "helmholtz":
            k2 = 20 + 5 * rng.random((10, 10)) + 1j * rng.random((10, 10))
            split = build_helmholtz_split(HelmholtzSpec(k2, np.zeros_like(k2), 0.1, absorber_width=3))
        elif builder == "diffusion":
            split = build_diffusion_split(DiffusionSpec(1 + rng.random((8, 8)), rng.random((8, 8)),
                                                        np.zeros((8, 8)), (0.5, 0.5)))
        else:
            split = build_schrodinger_split(SchrodingerSpec(5 * rng.random((8, 8)), (0.3, 0.3)))
        x = rng.standard_normal(split.dim) + 1j * rng.standard_normal(split.dim)
        back = split.inv_L_plus_I.apply(split.L_plus_I.apply(x))
        assert np.linalg.norm(back - x) <= 1e-9 * np.linalg.norm(x)
        assert accretivity_lower_bound(split.forward, n_samples=100) >= -1e-9
