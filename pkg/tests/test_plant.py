import numpy as np
import pytest

from conftest import frob_rel
from replaywm import ReplayAttack, SystemModel, design, simulate, step_normal
from replaywm.attack import step_replay
from replaywm.errors import DimensionMismatch, UnstableClosedLoop
from replaywm.linalg import dare_residual, spectral_radius
from replaywm.plant import (
    draw_noise,
    initial_state,
    noise_streams,
    simulate_arrays,
    stage_cost,
)


class TestSystemModel:
    def test_dimensions_exposed(self, system_b):
        sysm = system_b.model
        assert (sysm.n, sysm.m, sysm.p) == (4, 2, 2)

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(DimensionMismatch):
            SystemModel(
                A=np.eye(2), B=np.eye(3), C=np.eye(2), Q=np.eye(2),
                R=np.eye(2), W=np.eye(2), U=np.eye(3),
            )

    def test_non_diagonal_weight_rejected(self):
        with pytest.raises(ValueError):
            SystemModel(
                A=np.eye(2) * 0.5, B=np.eye(2), C=np.eye(2), Q=np.eye(2),
                R=np.eye(2), W=[[1.0, 0.1], [0.1, 1.0]], U=np.eye(2),
            )

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            SystemModel(
                A=[[np.nan, 0], [0, 0.5]], B=np.eye(2), C=np.eye(2),
                Q=np.eye(2), R=np.eye(2), W=np.eye(2), U=np.eye(2),
            )


class TestDesign:
    def test_benchmark_residuals(self, system_a, system_b, system_c):
        for bench in (system_a, system_b, system_c):
            sysm = bench.model
            des = design(sysm)
            assert dare_residual(des.P, sysm.A, sysm.C, sysm.Q, sysm.R) <= 1e-9
            assert dare_residual(des.S, sysm.A.T, sysm.B.T, sysm.W, sysm.U) <= 1e-9
            assert spectral_radius(des.Acl) < 1.0

    def test_identity_system_closed_form(self):
        sysm = SystemModel(
            A=np.zeros((2, 2)), B=np.eye(2), C=np.eye(2), Q=np.eye(2),
            R=np.eye(2), W=np.eye(2), U=np.eye(2),
        )
        des = design(sysm)
        assert np.allclose(des.P, np.eye(2), atol=1e-10)
        assert np.allclose(des.K, 0.5 * np.eye(2), atol=1e-10)
        assert np.allclose(des.Sigma_gamma, 2.0 * np.eye(2), atol=1e-10)
        assert np.allclose(des.L, np.zeros((2, 2)), atol=1e-10)

    def test_gain_equations_hold(self, system_b, design_b):
        sysm = system_b.model
        des = design_b
        k_expected = des.P @ sysm.C.T @ np.linalg.inv(sysm.C @ des.P @ sysm.C.T + sysm.R)
        l_expected = -np.linalg.inv(sysm.B.T @ des.S @ sysm.B + sysm.U) @ sysm.B.T @ des.S @ sysm.A
        assert np.allclose(des.K, k_expected, atol=1e-10)
        assert np.allclose(des.L, l_expected, atol=1e-10)
        assert np.allclose(des.Sigma_gamma, sysm.C @ des.P @ sysm.C.T + sysm.R, atol=1e-12)


class TestStepNormal:
    def test_noiseless_zero_fixed_point(self, system_a, design_a):
        sysm = system_a.model
        state = initial_state(sysm)
        zero = np.zeros
        for _ in range(20):
            state, rec = step_normal(
                state, design_a, sysm, zero(sysm.n), zero(sysm.m), zero(sysm.p)
            )
            assert np.all(rec.y == 0) and np.all(rec.gamma == 0) and np.all(rec.u == 0)
            assert np.all(state.x == 0) and np.all(state.xhat == 0)

    def test_innovation_covariance_empirical(self, system_a, design_a):
        sysm = system_a.model
        out = simulate_arrays(sysm, design_a, 0.5 * np.eye(2), 100_000, seed=101)
        emp = out.gamma.T @ out.gamma / out.gamma.shape[0]
        assert frob_rel(emp, design_a.Sigma_gamma) < 0.05

    def test_innovation_uncorrelated_with_lagged_watermark(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.5 * np.eye(2)
        out = simulate_arrays(sysm, design_a, sigma_e, 100_000, seed=102)
        cross = out.gamma[1:].T @ out.e[:-1] / (out.gamma.shape[0] - 1)
        scale = np.sqrt(
            np.linalg.norm(design_a.Sigma_gamma) * np.linalg.norm(sigma_e)
        )
        assert np.linalg.norm(cross) < 0.05 * scale


class TestSimulate:
    def test_deterministic_given_seed(self, system_a, design_a):
        records_1 = simulate(system_a.model, design_a, 0.3 * np.eye(2), 100, seed=5)
        records_2 = simulate(system_a.model, design_a, 0.3 * np.eye(2), 100, seed=5)
        for r1, r2 in zip(records_1, records_2):
            assert r1.k == r2.k and r1.attacked == r2.attacked
            assert np.array_equal(r1.y, r2.y)
            assert np.array_equal(r1.gamma, r2.gamma)
            assert np.array_equal(r1.u, r2.u)

    def test_attack_window_flags(self, system_a, design_a):
        attack = ReplayAttack(nu=50, k0=40)
        records = simulate(system_a.model, design_a, 0.3 * np.eye(2), 100, seed=6, attack=attack)
        for rec in records:
            assert rec.attacked == (rec.k >= 50)

    def test_replay_delivers_shifted_observations(self, system_a, design_a):
        attack = ReplayAttack(nu=50, k0=40)
        out = simulate_arrays(
            system_a.model, design_a, 0.3 * np.eye(2), 100, seed=7, attack=attack
        )
        for i in range(49, 100):
            assert np.array_equal(out.y_delivered[i], out.y_true[i - 40])
        for i in range(49):
            assert np.array_equal(out.y_delivered[i], out.y_true[i])

    def test_watermark_increases_stage_cost(self, system_a, design_a):
        sysm = system_a.model
        base = simulate_arrays(sysm, design_a, np.zeros((2, 2)), 50_000, seed=8)
        marked = simulate_arrays(sysm, design_a, 0.5 * np.eye(2), 50_000, seed=8)
        cost_base = stage_cost(sysm, base.x, base.u).mean()
        cost_marked = stage_cost(sysm, marked.x, marked.u).mean()
        assert cost_marked > cost_base

    def test_matches_step_composition(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.4 * np.eye(2)
        horizon = 120
        attack = ReplayAttack(nu=60, k0=30)
        out = simulate_arrays(
            sysm, design_a, sigma_e, horizon, seed=9, attack=attack, burn_in=0
        )
        w, v, e = draw_noise(sysm, sigma_e, horizon, seed=9)
        state = initial_state(sysm)
        y_log = []
        for i in range(horizon):
            k = i + 1
            if k >= attack.nu:
                state, rec, y_true = step_replay(
                    state, design_a, sysm, w[i], v[i], e[i], y_log[i - attack.k0]
                )
            else:
                state, rec = step_normal(state, design_a, sysm, w[i], v[i], e[i])
                y_true = rec.y
            y_log.append(y_true)
            assert np.allclose(rec.y, out.y_delivered[i], atol=1e-10)
            assert np.allclose(rec.gamma, out.gamma[i], atol=1e-10)
            assert np.allclose(rec.u, out.u[i], atol=1e-10)
            assert rec.attacked == bool(out.attacked[i])

    def test_bad_horizon_rejected(self, system_a, design_a):
        with pytest.raises(ValueError):
            simulate(system_a.model, design_a, np.zeros((2, 2)), 0, seed=1)


class TestNoiseStreams:
    def test_streams_are_named_and_deterministic(self):
        streams = noise_streams(123)
        assert set(streams) == {"w", "v", "e"}
        again = noise_streams(123)
        for name in streams:
            assert np.array_equal(
                streams[name].standard_normal(8), again[name].standard_normal(8)
            )

    def test_attack_and_normal_runs_share_noise(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.3 * np.eye(2)
        plain = simulate_arrays(sysm, design_a, sigma_e, 80, seed=11)
        attacked = simulate_arrays(
            sysm, design_a, sigma_e, 80, seed=11, attack=ReplayAttack(nu=40, k0=20)
        )
        assert np.array_equal(plain.e, attacked.e)
        assert np.array_equal(plain.y_true[:39], attacked.y_true[:39])
