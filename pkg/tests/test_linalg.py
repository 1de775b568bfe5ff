import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

import oracles
from replaywm.errors import (
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    UnstableMatrix,
)
from replaywm.linalg import (
    SolverOptions,
    dare_residual,
    dlyap_residual,
    inverse_pd,
    logdet_pd,
    psd_pinv,
    psd_sqrt,
    solve_dare,
    solve_dlyap,
    spectral_radius,
    symmetrize,
)


def random_stable(rng, n, rho_max=0.95):
    a = rng.standard_normal((n, n))
    return a * (rng.uniform(0.2, rho_max) / spectral_radius(a))


def random_symmetric(rng, n):
    m = rng.standard_normal((n, n))
    return symmetrize(m)


def random_pd(rng, n, jitter=0.1):
    m = rng.standard_normal((n, n))
    return m @ m.T + jitter * np.eye(n)


class TestSolveDare:
    def test_zero_dynamics_fixed_point_is_q(self):
        q = np.diag([2.0, 3.0])
        p = solve_dare(np.zeros((2, 2)), np.eye(2), q, np.eye(2))
        assert np.allclose(p, q, atol=1e-12)

    def test_scalar_closed_form(self):
        # p = a^2 p + q - a^2 p^2 c^2 / (c^2 p + r) reduces to
        # p^2 - 0.25 p - 1 = 0 for a=0.5, c=1, q=1, r=1
        expected = (0.25 + np.sqrt(0.25**2 + 4.0)) / 2.0
        p = solve_dare([[0.5]], [[1.0]], [[1.0]], [[1.0]])
        assert abs(p[0, 0] - expected) < 1e-9

    def test_matches_scipy_on_benchmarks(self, system_a, system_b, system_c):
        for bench in (system_a, system_b, system_c):
            sysm = bench.model
            p = solve_dare(sysm.A, sysm.C, sysm.Q, sysm.R)
            assert np.allclose(p, oracles.dare_filter(sysm), atol=1e-8)
            assert dare_residual(p, sysm.A, sysm.C, sysm.Q, sysm.R) <= 1e-9

    def test_control_side_via_transposes(self, system_a):
        sysm = system_a.model
        s = solve_dare(sysm.A.T, sysm.B.T, sysm.W, sysm.U)
        assert np.allclose(s, oracles.dare_control(sysm), atol=1e-8)

    def test_returned_solution_symmetric(self, system_b):
        sysm = system_b.model
        p = solve_dare(sysm.A, sysm.C, sysm.Q, sysm.R)
        assert np.max(np.abs(p - p.T)) < 1e-12

    def test_non_pd_r_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            solve_dare(np.eye(2) * 0.5, np.eye(2), np.eye(2), -np.eye(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_dare(np.eye(2), np.eye(3), np.eye(2), np.eye(3))

    def test_undetectable_unstable_pair_does_not_converge(self):
        opts = SolverOptions(max_iterations=200)
        with pytest.raises(NonConvergence):
            solve_dare([[1.5]], [[0.0]], [[1.0]], [[1.0]], opts)


class TestSolveDlyap:
    def test_zero_dynamics(self):
        q = np.diag([1.0, 4.0])
        assert np.allclose(solve_dlyap(np.zeros((2, 2)), q), q, atol=1e-12)

    def test_scalar_closed_form(self):
        # x = q / (1 - a^2) = 0.75 / 0.75 = 1
        x = solve_dlyap([[0.5]], [[0.75]])
        assert abs(x[0, 0] - 1.0) < 1e-10

    def test_fixed_point_matches_direct_4x4(self):
        rng = np.random.default_rng(7)
        a = random_stable(rng, 4)
        q = random_symmetric(rng, 4)
        x_fp = solve_dlyap(a, q, method="fixed_point")
        x_direct = solve_dlyap(a, q, method="direct")
        assert np.max(np.abs(x_fp - x_direct)) < 1e-10

    def test_fixed_point_matches_direct_100_random(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            a = random_stable(rng, n)
            q = random_symmetric(rng, n)
            x_fp = solve_dlyap(a, q, method="fixed_point")
            x_direct = solve_dlyap(a, q, method="direct")
            assert np.max(np.abs(x_fp - x_direct)) < 1e-9
            assert dlyap_residual(x_fp, a, q) <= 1e-9

    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        a = random_stable(rng, 5)
        q = random_pd(rng, 5)
        x = solve_dlyap(a, q)
        assert np.allclose(x, solve_discrete_lyapunov(a, q), atol=1e-8)

    def test_symmetric_output_for_psd_q(self):
        rng = np.random.default_rng(4)
        a = random_stable(rng, 4)
        x = solve_dlyap(a, random_pd(rng, 4))
        assert np.max(np.abs(x - x.T)) < 1e-12

    def test_unstable_rejected(self):
        with pytest.raises(UnstableMatrix):
            solve_dlyap([[1.0]], [[1.0]])
        with pytest.raises(UnstableMatrix):
            solve_dlyap(np.diag([0.5, 1.2]), np.eye(2))


class TestSpectralRadius:
    def test_identity(self):
        assert abs(spectral_radius(np.eye(3)) - 1.0) < 1e-12

    def test_diagonal(self):
        assert abs(spectral_radius(np.diag([0.4, 0.2, 0.2, 0.7])) - 0.7) < 1e-12

    def test_closed_loop_stable(self, design_a):
        assert spectral_radius(design_a.Acl) < 1.0

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((4, 4))
        base = spectral_radius(a)
        for alpha in (-2.0, 0.5, 3.0):
            assert abs(spectral_radius(alpha * a) - abs(alpha) * base) < 1e-8


class TestPdHelpers:
    def test_logdet_identity(self):
        assert abs(logdet_pd(np.eye(5))) < 1e-12

    def test_logdet_diag(self):
        assert abs(logdet_pd(np.diag([2.0, 2.0])) - 2 * np.log(2.0)) < 1e-12

    def test_logdet_matches_eigenvalues(self):
        rng = np.random.default_rng(6)
        m = random_pd(rng, 3)
        assert abs(np.exp(logdet_pd(m)) - np.prod(np.linalg.eigvalsh(m))) < 1e-10

    def test_logdet_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            logdet_pd(np.diag([1.0, -1.0]))

    def test_inverse_pd(self):
        rng = np.random.default_rng(8)
        m = random_pd(rng, 4)
        assert np.allclose(inverse_pd(m) @ m, np.eye(4), atol=1e-10)

    def test_psd_sqrt_squares_back(self):
        rng = np.random.default_rng(9)
        u = rng.standard_normal(3)
        rank_one = np.outer(u, u)
        root = psd_sqrt(rank_one)
        assert np.allclose(root @ root, rank_one, atol=1e-10)

    def test_psd_sqrt_rejects_negative(self):
        with pytest.raises(NotPositiveDefinite):
            psd_sqrt(np.diag([1.0, -0.5]))

    def test_psd_pinv_rank_one(self):
        u = np.array([3.0, 4.0])
        m = np.outer(u, u)
        pinv = psd_pinv(m)
        assert np.allclose(m @ pinv @ m, m, atol=1e-9)
        assert np.allclose(pinv, np.linalg.pinv(m), atol=1e-9)
