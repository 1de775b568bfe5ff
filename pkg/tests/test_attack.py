import numpy as np
import pytest

import oracles
from conftest import frob_rel
from replaywm import ReplayAttack, build_attacker_gmp, ezz
from replaywm.attack import AttackerGMP, mixing_k0, step_replay
from replaywm.errors import InvalidAttackWindow
from replaywm.linalg import dlyap_residual, spectral_radius
from replaywm.plant import initial_state, simulate_arrays


class TestReplayAttack:
    def test_zero_delay_rejected(self):
        with pytest.raises(InvalidAttackWindow):
            ReplayAttack(nu=10, k0=0)

    def test_start_must_exceed_delay(self):
        with pytest.raises(InvalidAttackWindow):
            ReplayAttack(nu=5, k0=5)
        ReplayAttack(nu=6, k0=5)

    def test_window_beyond_horizon_rejected(self, system_a, design_a):
        from replaywm import simulate

        with pytest.raises(InvalidAttackWindow):
            simulate(
                system_a.model, design_a, np.zeros((2, 2)), 40,
                seed=0, attack=ReplayAttack(nu=50, k0=10),
            )


class TestAttackerGmp:
    def test_structure_system_a(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.5 * np.eye(2)
        gmp = build_attacker_gmp(sysm, design_a, sigma_e)
        n, m = sysm.n, sysm.m
        assert gmp.n_a == 2 * n + m == 5
        assert np.all(gmp.Aa[2 * n:, :] == 0.0)
        assert np.array_equal(gmp.Ca, np.block([[sysm.C, np.zeros((m, n)), np.eye(m)]]))
        bseb = sysm.B @ sigma_e @ sysm.B.T
        assert np.allclose(gmp.Qa[:n, :n], bseb + sysm.Q, atol=1e-12)
        assert np.allclose(gmp.Qa[:n, n:2 * n], bseb, atol=1e-12)
        assert np.allclose(gmp.Qa[n:2 * n, n:2 * n], bseb, atol=1e-12)
        assert np.allclose(gmp.Qa[2 * n:, 2 * n:], sysm.R, atol=1e-12)
        assert np.all(gmp.Qa[:2 * n, 2 * n:] == 0.0)

    def test_stationary_covariance_solves_lyapunov(self, system_b, design_b):
        gmp = build_attacker_gmp(system_b.model, design_b, 0.29 * np.eye(2))
        assert dlyap_residual(gmp.Exa0, gmp.Aa, gmp.Qa) <= 1e-9

    def test_observation_covariance_matches_simulation(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.5 * np.eye(2)
        gmp = build_attacker_gmp(sysm, design_a, sigma_e)
        analytic = ezz(gmp, 0)
        out = simulate_arrays(sysm, design_a, sigma_e, 100_000, seed=21)
        emp = out.y_true.T @ out.y_true / out.y_true.shape[0]
        assert frob_rel(emp, analytic) < 0.05


class TestEzz:
    def test_lag_zero_symmetric_pd(self, system_b, design_b):
        gmp = build_attacker_gmp(system_b.model, design_b, 0.29 * np.eye(2))
        cov = ezz(gmp, 0)
        assert np.max(np.abs(cov - cov.T)) < 1e-9
        assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_large_lag_vanishes(self, system_a, design_a):
        gmp = build_attacker_gmp(system_a.model, design_a, 0.5 * np.eye(2))
        assert np.linalg.norm(ezz(gmp, 200)) < 1e-6 * np.linalg.norm(ezz(gmp, 0))

    def test_geometric_decay_rate(self, system_a, design_a):
        gmp = build_attacker_gmp(system_a.model, design_a, 0.5 * np.eye(2))
        rate = spectral_radius(gmp.Aa) + 0.05
        base = np.linalg.norm(ezz(gmp, 10))
        for lag in (20, 30, 40):
            assert np.linalg.norm(ezz(gmp, lag)) <= 5.0 * base * rate ** (lag - 10)

    def test_lag_one_matches_sample_cross_covariance(self, system_b, design_b):
        sysm = system_b.model
        sigma_e = 0.29 * np.eye(2)
        gmp = build_attacker_gmp(sysm, design_b, sigma_e)
        out = simulate_arrays(sysm, design_b, sigma_e, 200_000, seed=22)
        y = out.y_true
        emp = y[1:].T @ y[:-1] / (y.shape[0] - 1)  # E[y_k y_{k-1}^T]
        assert frob_rel(emp, ezz(gmp, 1)) < 0.05

    def test_negative_lag_rejected(self, system_a, design_a):
        gmp = build_attacker_gmp(system_a.model, design_a, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            ezz(gmp, -1)


class TestStepReplay:
    def test_noiseless_replay_of_zeros_stays_zero(self, system_a, design_a):
        sysm = system_a.model
        state = initial_state(sysm)
        zeros_y = np.zeros(sysm.m)
        for _ in range(10):
            state, rec, y_true = step_replay(
                state, design_a, sysm,
                np.zeros(sysm.n), np.zeros(sysm.m), np.zeros(sysm.p), zeros_y,
            )
            assert np.all(rec.gamma == 0) and np.all(y_true == 0)
            assert rec.attacked

    def test_attacked_cross_covariance_matches_theory(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.5 * np.eye(2)

        def collect(out, lo, hi):
            # innovation at k paired with the watermark drawn one step before
            return np.concatenate(
                [out.gamma[lo:hi, :, None] * out.e[lo - 1:hi - 1, None, :]], axis=0
            )

        products = oracles.pooled_attack_window(
            sysm, design_a, sigma_e, trials=250, k0=200, seed0=404, collect=collect
        )
        emp = products.mean(axis=0)
        expected = -sysm.C @ sysm.B @ sigma_e
        assert frob_rel(emp, expected) < 0.05

    def test_windowed_innovation_covariance_light(self, system_a, design_a):
        sysm = system_a.model
        sigma_e = 0.5 * np.eye(2)
        gmp = build_attacker_gmp(sysm, design_a, sigma_e)
        _, _, sgt = oracles.stacked_replay_moments(sysm, design_a, gmp, sigma_e)

        def collect(out, lo, hi):
            return out.gamma[lo:hi]

        samples = oracles.pooled_attack_window(
            sysm, design_a, sigma_e, trials=150, k0=200, seed0=405, collect=collect
        )
        emp = samples.T @ samples / samples.shape[0]
        assert frob_rel(emp, sgt) < 0.05


def test_mixing_k0_reasonable(system_a, design_a):
    gmp = build_attacker_gmp(system_a.model, design_a, 0.5 * np.eye(2))
    k0 = mixing_k0(gmp)
    rho = spectral_radius(gmp.Aa)
    assert rho ** k0 <= 1e-6
    assert rho ** (k0 - 1) > 1e-7
